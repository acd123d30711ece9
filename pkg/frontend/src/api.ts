/** Typed client for the review service's HTTP/JSON API. */

export interface Progress {
  completed: number;
  total: number;
}

/** The rater-facing view of one review set; never contains method names. */
export interface SetView {
  done: boolean;
  set_id: string | null;
  images?: string[];
  similarity_images?: string[];
  background?: string;
  reference?: string;
  progress: Progress;
}

export interface Submission {
  session: string;
  set_id: string;
  naturalness: Record<string, number>;
  similarity: Record<string, number>;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

type FetchFn = (input: string, init?: RequestInit) => Promise<Response>;

async function errorDetail(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { detail?: unknown };
    if (typeof body.detail === "string" && body.detail.length > 0) {
      return body.detail;
    }
  } catch {
    // fall through to the generic message
  }
  return `request failed with status ${response.status}`;
}

export class ReviewApi {
  constructor(
    private readonly fetchFn: FetchFn,
    private readonly base: string = "",
  ) {}

  async nextSet(session: string): Promise<SetView> {
    const url = `${this.base}/sets/next?session=${encodeURIComponent(session)}`;
    const response = await this.fetchFn(url);
    if (!response.ok) {
      throw new ApiError(response.status, await errorDetail(response));
    }
    return (await response.json()) as SetView;
  }

  async submit(body: Submission): Promise<void> {
    const response = await this.fetchFn(`${this.base}/rankings`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) {
      throw new ApiError(response.status, await errorDetail(response));
    }
  }

  imageUrl(opaqueId: string): string {
    return `${this.base}/image/${encodeURIComponent(opaqueId)}`;
  }
}
