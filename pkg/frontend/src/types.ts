export interface ImageSummary {
  image_id: string;
  keypoint_count: number;
}

/** [x, y, word] as served by the keypoint endpoints. */
export type Keypoint = [number, number, number];

export interface QueryResult {
  image_id: string;
  score: number;
  query_center: [number, number];
  match_center: [number, number];
}

export interface QueryResponse {
  results: QueryResult[];
  /** Score literals exactly as they appeared in the response body. */
  scoreTexts: string[];
}
