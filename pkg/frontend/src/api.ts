import type { ImageSummary, Keypoint, QueryResponse, QueryResult } from "./types.js";

const SCORE_LITERAL = /"score":\s*([-+0-9.eE]+)/g;

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

async function errorMessage(res: Response): Promise<string> {
  try {
    const body = (await res.json()) as { error?: string };
    return body.error ?? res.statusText;
  } catch {
    return res.statusText;
  }
}

/** Thin client for the query service; never recomputes scores. */
export class ApiClient {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  async listImages(): Promise<ImageSummary[]> {
    const res = await fetch(this.url("/images"));
    if (!res.ok) throw new ApiError(res.status, await errorMessage(res));
    return (await res.json()) as ImageSummary[];
  }

  async getKeypoints(imageId: string): Promise<Keypoint[]> {
    const res = await fetch(this.url(`/images/${encodeURIComponent(imageId)}/keypoints`));
    if (!res.ok) throw new ApiError(res.status, await errorMessage(res));
    const body = (await res.json()) as { keypoints: Keypoint[] };
    return body.keypoints;
  }

  async query(keypoints: Keypoint[], k: number): Promise<QueryResponse> {
    const res = await fetch(this.url("/query"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ keypoints, k }),
    });
    if (!res.ok) throw new ApiError(res.status, await errorMessage(res));
    // keep the raw body so score text can be rendered verbatim
    const raw = await res.text();
    const results = JSON.parse(raw) as QueryResult[];
    const scoreTexts = [...raw.matchAll(SCORE_LITERAL)].map((m) => m[1]);
    return { results, scoreTexts };
  }
}
