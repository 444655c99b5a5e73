/** Client-side rasterization of the stroke buffer to the grayscale sketch
 * bitmap the pipeline consumes (white background, black ink), so the PNG
 * uploaded with the scene is exactly what the user drew at canvas
 * resolution. */

import type { Stroke } from "./types.js";

export const INK = 0;
export const BACKGROUND = 255;

export function blankBitmap(
  width: number,
  height: number,
  fill = BACKGROUND,
): Uint8Array {
  return new Uint8Array(width * height).fill(fill);
}

function stampDisk(
  pixels: Uint8Array,
  width: number,
  height: number,
  cx: number,
  cy: number,
  radius: number,
  value: number,
): void {
  const r2 = radius * radius;
  const x0 = Math.max(0, Math.floor(cx - radius));
  const x1 = Math.min(width - 1, Math.ceil(cx + radius));
  const y0 = Math.max(0, Math.floor(cy - radius));
  const y1 = Math.min(height - 1, Math.ceil(cy + radius));
  for (let y = y0; y <= y1; y++) {
    for (let x = x0; x <= x1; x++) {
      const dx = x + 0.5 - cx;
      const dy = y + 0.5 - cy;
      if (dx * dx + dy * dy <= r2) pixels[y * width + x] = value;
    }
  }
}

/** Draw one polyline by stamping disks at sub-pixel intervals along each
 * segment; single-point strokes become a dot. */
export function drawStroke(
  pixels: Uint8Array,
  width: number,
  height: number,
  stroke: Stroke,
  thickness = 2,
  value = INK,
): void {
  if (stroke.length === 0) return;
  const radius = Math.max(0.5, thickness / 2);
  let [px, py] = stroke[0]!;
  stampDisk(pixels, width, height, px, py, radius, value);
  for (let i = 1; i < stroke.length; i++) {
    const [x, y] = stroke[i]!;
    const dist = Math.hypot(x - px, y - py);
    const steps = Math.max(1, Math.ceil(dist / 0.5));
    for (let s = 1; s <= steps; s++) {
      const t = s / steps;
      stampDisk(
        pixels,
        width,
        height,
        px + (x - px) * t,
        py + (y - py) * t,
        radius,
        value,
      );
    }
    px = x;
    py = y;
  }
}

export function rasterizeStrokes(
  width: number,
  height: number,
  strokes: Iterable<Stroke>,
  thickness = 2,
): Uint8Array {
  const pixels = blankBitmap(width, height);
  for (const stroke of strokes) {
    drawStroke(pixels, width, height, stroke, thickness);
  }
  return pixels;
}

/** Minimum distance from a point to a polyline (for the vector eraser). */
export function strokeDistance(stroke: Stroke, x: number, y: number): number {
  if (stroke.length === 0) return Infinity;
  let best = Infinity;
  for (let i = 0; i < stroke.length; i++) {
    const [ax, ay] = stroke[i]!;
    if (i + 1 < stroke.length) {
      const [bx, by] = stroke[i + 1]!;
      const vx = bx - ax;
      const vy = by - ay;
      const len2 = vx * vx + vy * vy;
      const t =
        len2 === 0
          ? 0
          : Math.max(0, Math.min(1, ((x - ax) * vx + (y - ay) * vy) / len2));
      best = Math.min(best, Math.hypot(x - (ax + t * vx), y - (ay + t * vy)));
    } else {
      best = Math.min(best, Math.hypot(x - ax, y - ay));
    }
  }
  return best;
}
