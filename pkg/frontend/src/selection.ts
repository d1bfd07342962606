import type { Keypoint } from "./types.js";

/** Axis-aligned region in image coordinates. */
export interface Box {
  xMin: number;
  yMin: number;
  xMax: number;
  yMax: number;
}

/** Box spanned by two drag endpoints (any corner order). */
export function normalizeBox(x1: number, y1: number, x2: number, y2: number): Box {
  return {
    xMin: Math.min(x1, x2),
    yMin: Math.min(y1, y2),
    xMax: Math.max(x1, x2),
    yMax: Math.max(y1, y2),
  };
}

/** A valid region needs strictly positive width and height. */
export function isDegenerate(box: Box): boolean {
  return !(box.xMin < box.xMax && box.yMin < box.yMax);
}

export function keypointsInBox(keypoints: Keypoint[], box: Box): Keypoint[] {
  return keypoints.filter(
    ([x, y]) => x >= box.xMin && x <= box.xMax && y >= box.yMin && y <= box.yMax,
  );
}

/** Submission is allowed only for a proper box holding at least 2 keypoints. */
export function canSubmit(box: Box | null, keypoints: Keypoint[]): boolean {
  if (box === null || isDegenerate(box)) return false;
  return keypointsInBox(keypoints, box).length >= 2;
}
