/** Planar-coordinate viewport: the only numeric work the UI does is this
 * pixel mapping (world meters -> screen px, y flipped). */

import type { Point } from "./types.js";

export interface Viewport {
  scale: number; // px per meter
  tx: number; // screen x of world origin
  ty: number;
  width: number;
  height: number;
}

export function fitBounds(
  bbox: [number, number, number, number],
  width: number,
  height: number,
  padding = 24,
): Viewport {
  const [xmin, ymin, xmax, ymax] = bbox;
  const spanX = Math.max(xmax - xmin, 1e-9);
  const spanY = Math.max(ymax - ymin, 1e-9);
  const scale = Math.min(
    (width - 2 * padding) / spanX,
    (height - 2 * padding) / spanY,
  );
  const cx = (xmin + xmax) / 2;
  const cy = (ymin + ymax) / 2;
  return {
    scale,
    tx: width / 2 - cx * scale,
    ty: height / 2 + cy * scale,
    width,
    height,
  };
}

export function worldToScreen(p: Point, vp: Viewport): Point {
  return { x: p.x * vp.scale + vp.tx, y: -p.y * vp.scale + vp.ty };
}

export function screenToWorld(p: Point, vp: Viewport): Point {
  return { x: (p.x - vp.tx) / vp.scale, y: -(p.y - vp.ty) / vp.scale };
}

/** Zoom by `factor` keeping the world point under `cursor` fixed. */
export function zoomAt(vp: Viewport, cursor: Point, factor: number): Viewport {
  const world = screenToWorld(cursor, vp);
  const scale = vp.scale * factor;
  return {
    ...vp,
    scale,
    tx: cursor.x - world.x * scale,
    ty: cursor.y + world.y * scale,
  };
}

export function panBy(vp: Viewport, dx: number, dy: number): Viewport {
  return { ...vp, tx: vp.tx + dx, ty: vp.ty + dy };
}

/** SVG path for a closed polygon ring given in world coordinates. */
export function polygonPath(ring: number[][], vp: Viewport): string {
  if (ring.length === 0) return "";
  const parts = ring.map(([x, y], i) => {
    const s = worldToScreen({ x, y }, vp);
    return `${i === 0 ? "M" : "L"}${round2(s.x)} ${round2(s.y)}`;
  });
  return parts.join("") + "Z";
}

/** SVG path for an open polyline in world coordinates. */
export function polylinePath(points: [number, number][], vp: Viewport): string {
  return points
    .map(([x, y], i) => {
      const s = worldToScreen({ x, y }, vp);
      return `${i === 0 ? "M" : "L"}${round2(s.x)} ${round2(s.y)}`;
    })
    .join("");
}

export function distance(a: Point, b: Point): number {
  return Math.hypot(a.x - b.x, a.y - b.y);
}

/** Area centroid of a simple polygon (world coordinates). */
export function polygonCentroid(ring: number[][]): Point {
  let area = 0;
  let cx = 0;
  let cy = 0;
  for (let i = 0; i < ring.length; i++) {
    const [x1, y1] = ring[i];
    const [x2, y2] = ring[(i + 1) % ring.length];
    const cross = x1 * y2 - x2 * y1;
    area += cross;
    cx += (x1 + x2) * cross;
    cy += (y1 + y2) * cross;
  }
  if (Math.abs(area) < 1e-12) {
    const n = Math.max(ring.length, 1);
    return {
      x: ring.reduce((s, p) => s + p[0], 0) / n,
      y: ring.reduce((s, p) => s + p[1], 0) / n,
    };
  }
  return { x: cx / (3 * area), y: cy / (3 * area) };
}

function round2(v: number): number {
  return Math.round(v * 100) / 100;
}
