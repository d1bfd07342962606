import type { QueryResponse } from "./types.js";

/** What one rendered result card shows; order mirrors the response. */
export interface ResultCard {
  rank: number;
  imageId: string;
  /** Score text verbatim from the service response. */
  scoreText: string;
  matchCenter: [number, number];
}

export function buildResultCards(response: QueryResponse): ResultCard[] {
  return response.results.map((r, i) => ({
    rank: i + 1,
    imageId: r.image_id,
    scoreText: response.scoreTexts[i] ?? String(r.score),
    matchCenter: r.match_center,
  }));
}
