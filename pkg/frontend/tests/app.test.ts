import { beforeEach, describe, expect, it } from "vitest";

import { ReviewApi } from "../src/api.js";
import { ReviewApp } from "../src/app.js";

/** Method names the client must never see rendered anywhere. */
const METHODS = ["methodAlpha", "methodBravo", "methodCharlie", "methodDelta", "methodEcho"];
const SIM_METHODS = METHODS.slice(0, 3);

interface FakeSet {
  set_id: string;
  byMethod: Record<string, string>;
  images: string[];
  simIds: string[];
  background: string;
  reference: string;
}

interface RecordedSubmission {
  session: string;
  set_id: string;
  naturalnessByMethod: Record<string, number>;
  similarityByMethod: Record<string, number>;
}

function jsonResponse(status: number, body: unknown): Response {
  return {
    ok: status >= 200 && status < 300,
    status,
    json: async () => body,
  } as unknown as Response;
}

/** In-memory stand-in for the rating service, same routes and contract. */
class FakeService {
  readonly sets: FakeSet[] = [];
  readonly submissions: RecordedSubmission[] = [];
  private readonly records = new Set<string>();
  failNextSubmit: { status: number; detail: string } | null = null;

  constructor(nSets: number) {
    for (let k = 0; k < nSets; k += 1) {
      const byMethod: Record<string, string> = {};
      METHODS.forEach((method, i) => {
        byMethod[method] = `img-s${k}x${i}`;
      });
      const ids = Object.values(byMethod);
      // fixed, server-chosen display order: rotate by set index
      const images = [...ids.slice(k % ids.length), ...ids.slice(0, k % ids.length)];
      this.sets.push({
        set_id: `set-${k}`,
        byMethod,
        images,
        simIds: SIM_METHODS.map((m) => byMethod[m]),
        background: `img-bg${k}`,
        reference: `img-ref${k}`,
      });
    }
  }

  fetch = async (url: string, init?: RequestInit): Promise<Response> => {
    if (url.startsWith("/sets/next")) {
      const session = decodeURIComponent(url.split("session=")[1] ?? "");
      return this.nextSet(session);
    }
    if (url === "/rankings" && init?.method === "POST") {
      return this.submit(JSON.parse(String(init.body)));
    }
    return jsonResponse(404, { detail: `no route for ${url}` });
  };

  private nextSet(session: string): Response {
    const completed = this.sets.filter((s) => this.records.has(`${session}|${s.set_id}`)).length;
    const progress = { completed, total: this.sets.length };
    for (const s of this.sets) {
      if (this.records.has(`${session}|${s.set_id}`)) {
        continue;
      }
      return jsonResponse(200, {
        done: false,
        set_id: s.set_id,
        images: s.images,
        similarity_images: s.simIds,
        background: s.background,
        reference: s.reference,
        progress,
      });
    }
    return jsonResponse(200, { done: true, set_id: null, progress });
  }

  private submit(body: {
    session: string;
    set_id: string;
    naturalness: Record<string, number>;
    similarity: Record<string, number>;
  }): Response {
    const found = this.sets.find((s) => s.set_id === body.set_id);
    if (!found) {
      return jsonResponse(404, { detail: `unknown set id '${body.set_id}'` });
    }
    const key = `${body.session}|${body.set_id}`;
    if (this.records.has(key)) {
      return jsonResponse(409, { detail: `session already ranked set '${body.set_id}'` });
    }
    if (this.failNextSubmit) {
      const fail = this.failNextSubmit;
      this.failNextSubmit = null;
      return jsonResponse(fail.status, { detail: fail.detail });
    }
    const allIds = [...found.images].sort();
    const natError = checkPermutation(body.naturalness, allIds);
    const simError = checkPermutation(body.similarity, [...found.simIds].sort());
    if (natError || simError) {
      return jsonResponse(422, { detail: natError ?? simError });
    }
    this.records.add(key);
    const byImage = Object.fromEntries(
      Object.entries(found.byMethod).map(([method, id]) => [id, method]),
    );
    this.submissions.push({
      session: body.session,
      set_id: body.set_id,
      naturalnessByMethod: remap(body.naturalness, byImage),
      similarityByMethod: remap(body.similarity, byImage),
    });
    return jsonResponse(200, { stored: true });
  }
}

function checkPermutation(ranks: Record<string, number>, expectedIds: string[]): string | null {
  if ([...Object.keys(ranks)].sort().join() !== expectedIds.join()) {
    return "ranking keys do not match the set";
  }
  const values = Object.values(ranks).sort((a, b) => a - b);
  if (values.join() !== expectedIds.map((_, i) => i + 1).join()) {
    return "ranks are not a 1..n permutation";
  }
  return null;
}

function remap(
  ranks: Record<string, number>,
  byImage: Record<string, string>,
): Record<string, number> {
  return Object.fromEntries(Object.entries(ranks).map(([id, r]) => [byImage[id], r]));
}

// ----------------------------------------------------------------- helpers

const flush = () => new Promise((resolve) => setTimeout(resolve, 0));

function freshRoot(): HTMLElement {
  document.body.innerHTML = '<main id="app"></main>';
  return document.getElementById("app") as HTMLElement;
}

async function startApp(root: HTMLElement, fake: FakeService): Promise<ReviewApp> {
  const app = new ReviewApp(root, new ReviewApi(fake.fetch), window.localStorage);
  await app.start();
  await flush();
  return app;
}

function q<T extends HTMLElement>(root: HTMLElement, testid: string): T {
  const node = root.querySelector<T>(`[data-testid="${testid}"]`);
  if (!node) {
    throw new Error(`expected [data-testid=${testid}] in DOM`);
  }
  return node;
}

function maybe(root: HTMLElement, testid: string): HTMLElement | null {
  return root.querySelector<HTMLElement>(`[data-testid="${testid}"]`);
}

function cardIds(root: HTMLElement): string[] {
  return [...root.querySelectorAll<HTMLElement>('[data-testid="image-card"]')].map(
    (c) => c.dataset.imageId as string,
  );
}

function clickCard(root: HTMLElement, id: string): void {
  const card = root.querySelector<HTMLElement>(`[data-image-id="${id}"]`);
  if (!card) {
    throw new Error(`no card for ${id}`);
  }
  card.click();
}

function expectNoMethodNames(root: HTMLElement): void {
  for (const method of METHODS) {
    expect(root.innerHTML).not.toContain(method);
  }
}

async function enterSession(root: HTMLElement, name: string): Promise<void> {
  const input = q<HTMLInputElement>(root, "session-input");
  input.value = name;
  q(root, "start-form").dispatchEvent(new Event("submit", { bubbles: true, cancelable: true }));
  await flush();
  await flush();
}

/** Ranks every image in display order, advances, ranks similarity, submits. */
async function completeCurrentSet(root: HTMLElement, fake: FakeService): Promise<void> {
  const displayed = cardIds(root);
  for (const id of displayed) {
    clickCard(root, id);
  }
  const cont = q<HTMLButtonElement>(root, "continue-button");
  expect(cont.disabled).toBe(false);
  cont.click();
  const active = [
    ...root.querySelectorAll<HTMLElement>('[data-testid="image-card"]:not(.inactive)'),
  ].map((c) => c.dataset.imageId as string);
  for (const id of active) {
    clickCard(root, id);
  }
  q<HTMLButtonElement>(root, "submit-button").click();
  await flush();
  await flush();
  void fake;
}

beforeEach(() => {
  window.localStorage.clear();
});

// ------------------------------------------------------------------- tests

describe("review flow", () => {
  it("runs a full blinded session: two-phase ranking of every set", async () => {
    const fake = new FakeService(3);
    const root = freshRoot();
    await startApp(root, fake);

    expect(maybe(root, "start-screen")).not.toBeNull();
    await enterSession(root, "rater1");

    for (let step = 0; step < 3; step += 1) {
      expect(q(root, "progress").textContent).toBe(`Set ${step + 1} of 3`);
      expect(q(root, "phase-title").textContent).toContain("naturalness");
      expect(maybe(root, "context-background")).not.toBeNull();
      expectNoMethodNames(root);

      const displayed = cardIds(root);
      expect(displayed).toEqual(fake.sets[step].images); // server-fixed order

      // incomplete ordering keeps the phase switch disabled
      const firstFour = displayed.slice(0, 4);
      for (const id of firstFour) {
        clickCard(root, id);
      }
      expect(q<HTMLButtonElement>(root, "continue-button").disabled).toBe(true);
      clickCard(root, displayed[4]);
      expect(q<HTMLButtonElement>(root, "continue-button").disabled).toBe(false);
      q<HTMLButtonElement>(root, "continue-button").click();

      expect(q(root, "phase-title").textContent).toContain("similarity");
      expect(maybe(root, "context-reference")).not.toBeNull();
      expectNoMethodNames(root);

      const simIds = fake.sets[step].simIds;
      // a card outside the similarity subset is inert in phase 2
      const outsider = displayed.find((id) => !simIds.includes(id)) as string;
      clickCard(root, outsider);
      expect(q<HTMLButtonElement>(root, "submit-button").disabled).toBe(true);

      const inDisplayOrder = displayed.filter((id) => simIds.includes(id));
      clickCard(root, inDisplayOrder[0]);
      clickCard(root, inDisplayOrder[1]);
      expect(q<HTMLButtonElement>(root, "submit-button").disabled).toBe(true);
      clickCard(root, inDisplayOrder[2]);
      expect(q<HTMLButtonElement>(root, "submit-button").disabled).toBe(false);
      q<HTMLButtonElement>(root, "submit-button").click();
      await flush();
      await flush();
    }

    expect(maybe(root, "done-screen")).not.toBeNull();
    expect(q(root, "done-count").textContent).toContain("3 of 3");
    expect(fake.submissions).toHaveLength(3);

    // the first submission's ranks match what was clicked, method-resolved
    const first = fake.submissions[0];
    const order = fake.sets[0].images;
    const expectedNaturalness = Object.fromEntries(
      METHODS.map((m) => [m, order.indexOf(fake.sets[0].byMethod[m]) + 1]),
    );
    expect(first.naturalnessByMethod).toEqual(expectedNaturalness);
    expect(Object.keys(first.similarityByMethod).sort()).toEqual([...SIM_METHODS].sort());
  });

  it("resumes at the first incomplete set after a reload", async () => {
    const fake = new FakeService(3);
    let root = freshRoot();
    await startApp(root, fake);
    await enterSession(root, "rater2");
    await completeCurrentSet(root, fake);
    expect(q(root, "progress").textContent).toBe("Set 2 of 3");

    // simulate a reload: new DOM, new app instance, same stored session
    root = freshRoot();
    await startApp(root, fake);
    expect(maybe(root, "start-screen")).toBeNull();
    expect(q(root, "progress").textContent).toBe("Set 2 of 3");

    await completeCurrentSet(root, fake);
    await completeCurrentSet(root, fake);
    expect(maybe(root, "done-screen")).not.toBeNull();
    expect(fake.submissions).toHaveLength(3);
  });

  it("surfaces a duplicate rejection inline and keeps the rankings", async () => {
    const fake = new FakeService(2);
    const root = freshRoot();
    await startApp(root, fake);
    await enterSession(root, "rater3");

    fake.failNextSubmit = { status: 409, detail: "session already ranked this set" };
    await completeCurrentSet(root, fake);

    const banner = q(root, "error-banner");
    expect(banner.textContent).toContain("409");
    expect(banner.textContent).toContain("already ranked");
    // no data loss: the completed similarity ranking is still on screen
    const badges = [...root.querySelectorAll<HTMLElement>('[data-testid="rank-badge"]')]
      .map((b) => b.textContent)
      .filter((t) => t !== "");
    expect(badges.length).toBeGreaterThan(0);
    expect(maybe(root, "submit-button")).not.toBeNull();

    // the banner's reload action re-syncs with the server
    q(root, "error-reload").click();
    await flush();
    await flush();
    expect(maybe(root, "error-banner")).toBeNull();
    expect(q(root, "progress").textContent).toBe("Set 1 of 2");

    await completeCurrentSet(root, fake);
    expect(q(root, "progress").textContent).toBe("Set 2 of 2");
    expect(fake.submissions).toHaveLength(1);
  });

  it("never submits while an ordering is incomplete", async () => {
    const fake = new FakeService(1);
    const root = freshRoot();
    await startApp(root, fake);
    await enterSession(root, "rater4");

    const displayed = cardIds(root);
    clickCard(root, displayed[0]);
    clickCard(root, displayed[1]);
    const cont = q<HTMLButtonElement>(root, "continue-button");
    expect(cont.disabled).toBe(true);
    cont.click(); // disabled buttons do not fire; phase must not advance
    expect(q(root, "phase-title").textContent).toContain("naturalness");
    expect(fake.submissions).toHaveLength(0);
  });

  it("switching rater returns to the start screen and clears the session", async () => {
    const fake = new FakeService(1);
    const root = freshRoot();
    await startApp(root, fake);
    await enterSession(root, "rater5");
    expect(maybe(root, "set-screen")).not.toBeNull();

    q(root, "switch-rater").click();
    expect(maybe(root, "start-screen")).not.toBeNull();
    expect(window.localStorage.getItem("review-session")).toBeNull();
  });
});
