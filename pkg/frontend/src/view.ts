import type { Keypoint } from "./types.js";

/**
 * Maps image coordinates to a fixed canvas with padding, preserving the
 * aspect ratio. Keypoint scatters have no intrinsic pixel grid, so the
 * viewport is derived from the keypoints' bounding box.
 */
export class Viewport {
  readonly scale: number;
  readonly offsetX: number;
  readonly offsetY: number;

  constructor(
    keypoints: Keypoint[],
    readonly width: number,
    readonly height: number,
    readonly pad = 12,
  ) {
    let xMin = Infinity,
      yMin = Infinity,
      xMax = -Infinity,
      yMax = -Infinity;
    for (const [x, y] of keypoints) {
      xMin = Math.min(xMin, x);
      yMin = Math.min(yMin, y);
      xMax = Math.max(xMax, x);
      yMax = Math.max(yMax, y);
    }
    if (!isFinite(xMin)) {
      xMin = yMin = 0;
      xMax = yMax = 1;
    }
    const spanX = Math.max(xMax - xMin, 1e-9);
    const spanY = Math.max(yMax - yMin, 1e-9);
    this.scale = Math.min((width - 2 * pad) / spanX, (height - 2 * pad) / spanY);
    this.offsetX = pad + ((width - 2 * pad) - spanX * this.scale) / 2 - xMin * this.scale;
    this.offsetY = pad + ((height - 2 * pad) - spanY * this.scale) / 2 - yMin * this.scale;
  }

  toCanvas(x: number, y: number): [number, number] {
    return [x * this.scale + this.offsetX, y * this.scale + this.offsetY];
  }

  toImage(cx: number, cy: number): [number, number] {
    return [(cx - this.offsetX) / this.scale, (cy - this.offsetY) / this.scale];
  }
}

/** Stable word -> hue assignment for scatter coloring. */
export function wordColor(word: number): string {
  const hue = (word * 137.508) % 360;
  return `hsl(${hue.toFixed(1)}, 70%, 45%)`;
}
