/** Color scales and symbol constants. */

/** Orange scale: region/kernel location counts. Light = few, dark = many. */
export function orangeScale(t: number): string {
  return ramp(t, [255, 245, 224], [204, 85, 0]);
}

/** Green scale: region covariance difference. Light = similar to global. */
export function greenScale(t: number): string {
  return ramp(t, [237, 248, 233], [0, 109, 44]);
}

/** Grayscale for per-bin variogram dispersion squares (dark = dissimilar). */
export function grayScale(t: number): string {
  return ramp(t, [238, 238, 238], [40, 40, 40]);
}

function ramp(t: number, from: number[], to: number[]): string {
  const u = Math.max(0, Math.min(1, t));
  const channel = (i: number) => Math.round(from[i] + (to[i] - from[i]) * u);
  return `rgb(${channel(0)},${channel(1)},${channel(2)})`;
}

export function normalize(value: number, min: number, max: number): number {
  if (!(max > min)) return 0.5;
  return (value - min) / (max - min);
}

/** Triangle sizes per sextile (px at default zoom): extreme sextiles render
 * larger since extreme values matter most; relative steps follow common
 * cartographic symbol grading. */
export const TRIANGLE_SIZES: Record<number, number> = {
  1: 13,
  2: 9,
  3: 6,
  4: 6,
  5: 9,
  6: 13,
};

export interface TriangleStyle {
  size: number;
  fill: string;
  upward: boolean;
}

/** Lower three sextiles: gray, downward; upper three: black, upward. */
export function triangleStyle(sextile: number): TriangleStyle {
  const upward = sextile >= 4;
  return {
    size: TRIANGLE_SIZES[sextile] ?? 6,
    fill: upward ? "#111111" : "#8a8a8a",
    upward,
  };
}

/** SVG points string for a triangle mark centered at (cx, cy). */
export function trianglePoints(
  cx: number,
  cy: number,
  size: number,
  upward: boolean,
): string {
  const h = size;
  const w = size * 1.15;
  if (upward) {
    return `${cx},${cy - h / 2} ${cx - w / 2},${cy + h / 2} ${cx + w / 2},${cy + h / 2}`;
  }
  return `${cx},${cy + h / 2} ${cx - w / 2},${cy - h / 2} ${cx + w / 2},${cy - h / 2}`;
}
