/** The rating flow: one blinded set at a time, ranked in two phases
 * (naturalness over every image, then similarity over the
 * reference-conditioned subset), submitted, and advanced. The server decides
 * which set is next, so reloading the page resumes at the first incomplete
 * set automatically. */

import { ApiError, ReviewApi, SetView } from "./api.js";
import { RankPicker } from "./ordering.js";

const SESSION_KEY = "review-session";

type Phase = "naturalness" | "similarity";

interface ActiveSet {
  view: SetView;
  phase: Phase;
  naturalness: RankPicker;
  similarity: RankPicker;
}

interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

const PHASE_COPY: Record<Phase, { title: string; hint: string }> = {
  naturalness: {
    title: "Phase 1 — naturalness",
    hint: "Click the images from most natural (rank 1) to least natural. Drag a ranked image onto another to swap their ranks.",
  },
  similarity: {
    title: "Phase 2 — similarity to the reference",
    hint: "Click the highlighted images from most similar to the reference (rank 1) to least similar.",
  },
};

export class ReviewApp {
  private session: string | null;
  private active: ActiveSet | null = null;
  private doneView: SetView | null = null;
  private error: string | null = null;
  private dragSource: string | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ReviewApi,
    private readonly storage: StorageLike,
  ) {
    this.session = storage.getItem(SESSION_KEY);
  }

  /** Render the first screen; resumes a stored session if one exists. */
  async start(): Promise<void> {
    if (this.session) {
      await this.loadNext();
    } else {
      this.render();
    }
  }

  private async beginSession(token: string): Promise<void> {
    const trimmed = token.trim();
    if (!trimmed) {
      return;
    }
    this.session = trimmed;
    this.storage.setItem(SESSION_KEY, trimmed);
    await this.loadNext();
  }

  private endSession(): void {
    this.storage.removeItem(SESSION_KEY);
    this.session = null;
    this.active = null;
    this.doneView = null;
    this.error = null;
    this.render();
  }

  private async loadNext(): Promise<void> {
    if (!this.session) {
      this.render();
      return;
    }
    try {
      const view = await this.api.nextSet(this.session);
      this.error = null;
      if (view.done) {
        this.active = null;
        this.doneView = view;
      } else {
        this.doneView = null;
        this.active = {
          view,
          phase: "naturalness",
          naturalness: new RankPicker(view.images ?? []),
          similarity: new RankPicker(view.similarity_images ?? []),
        };
      }
    } catch (err) {
      this.error = describeError(err);
    }
    this.render();
  }

  private picker(): RankPicker | null {
    if (!this.active) {
      return null;
    }
    return this.active.phase === "naturalness" ? this.active.naturalness : this.active.similarity;
  }

  private advancePhase(): void {
    if (this.active && this.active.phase === "naturalness" && this.active.naturalness.complete) {
      this.active.phase = "similarity";
      this.render();
    }
  }

  private async submit(): Promise<void> {
    const active = this.active;
    if (!active || !this.session || !active.view.set_id) {
      return;
    }
    // Both phases must be total orders before this button is enabled; the
    // pickers throw rather than emit a partial ranking.
    if (!active.naturalness.complete || !active.similarity.complete) {
      return;
    }
    try {
      await this.api.submit({
        session: this.session,
        set_id: active.view.set_id,
        naturalness: active.naturalness.ranks(),
        similarity: active.similarity.ranks(),
      });
      await this.loadNext();
    } catch (err) {
      // Rankings stay on screen: the rater can retry (transient failure) or
      // skip ahead (duplicate) without losing work.
      this.error = describeError(err);
      this.render();
    }
  }

  private handleCardClick(id: string): void {
    const picker = this.picker();
    if (!picker) {
      return;
    }
    picker.pick(id);
    this.render();
  }

  private handleDrop(targetId: string): void {
    const picker = this.picker();
    if (picker && this.dragSource) {
      picker.swap(this.dragSource, targetId);
    }
    this.dragSource = null;
    this.render();
  }

  // ------------------------------------------------------------- rendering

  private render(): void {
    this.root.textContent = "";
    if (!this.session) {
      this.root.appendChild(this.renderStart());
      return;
    }
    if (this.error) {
      this.root.appendChild(this.renderError());
    }
    if (this.doneView) {
      this.root.appendChild(this.renderDone(this.doneView));
      return;
    }
    if (this.active) {
      this.root.appendChild(this.renderSet(this.active));
    }
  }

  private renderStart(): HTMLElement {
    const panel = el("section", "panel start-panel");
    panel.dataset.testid = "start-screen";
    panel.appendChild(el("h1", "", "Image review"));
    panel.appendChild(
      el(
        "p",
        "hint",
        "Enter your rater id to begin. You can close the page at any time; your session resumes where you left off.",
      ),
    );
    const form = document.createElement("form");
    form.dataset.testid = "start-form";
    const input = document.createElement("input");
    input.type = "text";
    input.placeholder = "rater id";
    input.dataset.testid = "session-input";
    const button = document.createElement("button");
    button.type = "submit";
    button.textContent = "Start session";
    button.dataset.testid = "start-button";
    form.append(input, button);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.beginSession(input.value);
    });
    panel.appendChild(form);
    return panel;
  }

  private renderError(): HTMLElement {
    const banner = el("div", "error-banner");
    banner.dataset.testid = "error-banner";
    banner.setAttribute("role", "alert");
    banner.appendChild(el("span", "", this.error ?? "something went wrong"));
    const reload = document.createElement("button");
    reload.type = "button";
    reload.textContent = "Load next set";
    reload.dataset.testid = "error-reload";
    reload.addEventListener("click", () => void this.loadNext());
    banner.appendChild(reload);
    return banner;
  }

  private renderDone(view: SetView): HTMLElement {
    const panel = el("section", "panel done-panel");
    panel.dataset.testid = "done-screen";
    panel.appendChild(el("h1", "", "All sets completed"));
    const count = el(
      "p",
      "",
      `You ranked ${view.progress.completed} of ${view.progress.total} sets. Thank you!`,
    );
    count.dataset.testid = "done-count";
    panel.appendChild(count);
    panel.appendChild(this.renderSwitchLink());
    return panel;
  }

  private renderSwitchLink(): HTMLElement {
    const link = document.createElement("button");
    link.type = "button";
    link.className = "link";
    link.textContent = "Switch rater";
    link.dataset.testid = "switch-rater";
    link.addEventListener("click", () => this.endSession());
    return link;
  }

  private renderSet(active: ActiveSet): HTMLElement {
    const picker = this.picker() as RankPicker;
    const copy = PHASE_COPY[active.phase];
    const panel = el("section", "panel set-panel");
    panel.dataset.testid = "set-screen";

    const header = el("header", "set-header");
    const progress = el(
      "p",
      "progress",
      `Set ${active.view.progress.completed + 1} of ${active.view.progress.total}`,
    );
    progress.dataset.testid = "progress";
    header.appendChild(progress);
    const title = el("h1", "", copy.title);
    title.dataset.testid = "phase-title";
    header.appendChild(title);
    header.appendChild(el("p", "hint", copy.hint));
    panel.appendChild(header);

    panel.appendChild(this.renderContext(active));
    panel.appendChild(this.renderGrid(active, picker));
    panel.appendChild(this.renderControls(active, picker));
    return panel;
  }

  private renderContext(active: ActiveSet): HTMLElement {
    const row = el("div", "context-row");
    if (active.phase === "naturalness" && active.view.background) {
      row.appendChild(this.contextFigure("background", active.view.background, "Background"));
    }
    if (active.phase === "similarity" && active.view.reference) {
      row.appendChild(this.contextFigure("reference", active.view.reference, "Reference"));
    }
    return row;
  }

  private contextFigure(kind: string, opaqueId: string, label: string): HTMLElement {
    const figure = el("figure", `context context-${kind}`);
    figure.dataset.testid = `context-${kind}`;
    const img = document.createElement("img");
    img.src = this.api.imageUrl(opaqueId);
    img.alt = label;
    figure.appendChild(img);
    figure.appendChild(el("figcaption", "", label));
    return figure;
  }

  private renderGrid(active: ActiveSet, picker: RankPicker): HTMLElement {
    const grid = el("div", "image-grid");
    grid.dataset.testid = "image-grid";
    const inPhase = new Set(picker.items);
    for (const id of active.view.images ?? []) {
      const card = el("figure", "image-card");
      card.dataset.testid = "image-card";
      card.dataset.imageId = id;
      const rank = picker.rankOf(id);
      const pickable = inPhase.has(id);
      if (!pickable) {
        card.classList.add("inactive");
      }
      if (rank !== null) {
        card.classList.add("ranked");
        card.draggable = true;
      }
      const badge = el("span", "rank-badge", rank === null ? "" : String(rank));
      badge.dataset.testid = "rank-badge";
      card.appendChild(badge);
      const img = document.createElement("img");
      img.src = this.api.imageUrl(id);
      img.alt = "candidate image";
      card.appendChild(img);
      if (pickable) {
        card.addEventListener("click", () => this.handleCardClick(id));
        card.addEventListener("dragstart", () => {
          this.dragSource = id;
        });
        card.addEventListener("dragover", (event) => event.preventDefault());
        card.addEventListener("drop", (event) => {
          event.preventDefault();
          this.handleDrop(id);
        });
      }
      grid.appendChild(card);
    }
    return grid;
  }

  private renderControls(active: ActiveSet, picker: RankPicker): HTMLElement {
    const row = el("div", "controls");
    const undo = document.createElement("button");
    undo.type = "button";
    undo.textContent = "Undo";
    undo.dataset.testid = "undo-button";
    undo.disabled = picker.picked.length === 0;
    undo.addEventListener("click", () => {
      picker.undo();
      this.render();
    });
    const reset = document.createElement("button");
    reset.type = "button";
    reset.textContent = "Reset";
    reset.dataset.testid = "reset-button";
    reset.disabled = picker.picked.length === 0;
    reset.addEventListener("click", () => {
      picker.reset();
      this.render();
    });
    row.append(undo, reset);

    if (active.phase === "naturalness") {
      const next = document.createElement("button");
      next.type = "button";
      next.className = "primary";
      next.textContent = "Continue to similarity";
      next.dataset.testid = "continue-button";
      next.disabled = !picker.complete;
      next.addEventListener("click", () => this.advancePhase());
      row.appendChild(next);
    } else {
      const submit = document.createElement("button");
      submit.type = "button";
      submit.className = "primary";
      submit.textContent = "Submit rankings";
      submit.dataset.testid = "submit-button";
      submit.disabled = !active.naturalness.complete || !active.similarity.complete;
      submit.addEventListener("click", () => void this.submit());
      row.appendChild(submit);
    }
    row.appendChild(this.renderSwitchLink());
    return row;
  }
}

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

function describeError(err: unknown): string {
  if (err instanceof ApiError) {
    return `The server rejected the request (${err.status}): ${err.message}`;
  }
  return "Could not reach the server. Your rankings are still here — try again.";
}
