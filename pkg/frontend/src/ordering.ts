/** Rank assignment by explicit picking: the rater clicks items in rank
 * order, so the picked sequence is a prefix of a permutation by
 * construction — an invalid (repeated or gapped) ranking cannot be built. */

export class RankPicker {
  private readonly pool: readonly string[];
  private readonly sequence: string[] = [];

  constructor(pool: readonly string[]) {
    if (new Set(pool).size !== pool.length) {
      throw new Error("ranking pool contains duplicate ids");
    }
    this.pool = [...pool];
  }

  get items(): readonly string[] {
    return this.pool;
  }

  get picked(): readonly string[] {
    return this.sequence;
  }

  /** true once every item has a rank */
  get complete(): boolean {
    return this.sequence.length === this.pool.length;
  }

  /** rank of an item (1-based), or null while unranked */
  rankOf(id: string): number | null {
    const idx = this.sequence.indexOf(id);
    return idx === -1 ? null : idx + 1;
  }

  /** Assign the next free rank to `id`. No-op for unknown or already-ranked ids. */
  pick(id: string): void {
    if (!this.pool.includes(id) || this.sequence.includes(id)) {
      return;
    }
    this.sequence.push(id);
  }

  /** Remove the most recent pick. */
  undo(): void {
    this.sequence.pop();
  }

  /** Swap the ranks of two already-ranked items (drag-to-reorder). */
  swap(a: string, b: string): void {
    const ia = this.sequence.indexOf(a);
    const ib = this.sequence.indexOf(b);
    if (ia === -1 || ib === -1 || ia === ib) {
      return;
    }
    [this.sequence[ia], this.sequence[ib]] = [this.sequence[ib], this.sequence[ia]];
  }

  reset(): void {
    this.sequence.length = 0;
  }

  /** id -> rank map; only callable on a complete (total) ordering. */
  ranks(): Record<string, number> {
    if (!this.complete) {
      throw new Error("ordering is incomplete");
    }
    const out: Record<string, number> = {};
    this.sequence.forEach((id, idx) => {
      out[id] = idx + 1;
    });
    return out;
  }
}
