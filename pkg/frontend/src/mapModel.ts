/** Pure builders turning server state into drawable primitives.
 *
 * Everything here is pixel mapping; all values shown come straight from
 * server responses.
 */

import { triangleStyle, trianglePoints } from "./colors.js";
import type {
  GridCellJson,
  RegionMetricJson,
  RingJson,
  SettingJson,
  Point,
} from "./types.js";
import {
  polygonCentroid,
  polygonPath,
  polylinePath,
  worldToScreen,
  Viewport,
} from "./viewport.js";

export interface RegionShape {
  id: string;
  path: string;
  flagged: boolean;
  fill: string | null; // choropleth fill; null = unfilled outline (custom mode)
}

export interface KernelRingShape {
  cx: number;
  cy: number;
  innerPx: number;
  outerPx: number;
  clipRegionId: string;
}

export interface TriangleMark {
  points: string;
  fill: string;
}

export interface MapRenderModel {
  regions: RegionShape[];
  kernelRings: KernelRingShape[];
  locations: Point[];
  variableMarks: TriangleMark[];
  annotationPaths: string[];
  splitPreviewPath: string | null;
  kernelPreview: { cx: number; cy: number; radii: number[] } | null;
}

export interface MapInputs {
  setting: SettingJson | null;
  flags?: Map<string, boolean>;
  fills?: Map<string, string>;
  locations?: [number, number][];
  gridCells?: GridCellJson[];
  annotationBoundaries?: number[][][];
  splitDraft?: [number, number][];
  kernelCenter?: Point | null;
  kernelPreviewRadii?: number[];
}

export function buildMapModel(inputs: MapInputs, vp: Viewport): MapRenderModel {
  const model: MapRenderModel = {
    regions: [],
    kernelRings: [],
    locations: [],
    variableMarks: [],
    annotationPaths: [],
    splitPreviewPath: null,
    kernelPreview: null,
  };
  const setting = inputs.setting;
  if (setting) {
    for (const feature of setting.regionalization.features) {
      const ring = feature.geometry.coordinates[0];
      const id = feature.properties.id;
      model.regions.push({
        id,
        path: polygonPath(ring, vp),
        flagged: inputs.flags?.get(id) ?? false,
        fill: inputs.fills?.get(id) ?? null,
      });
      // one kernel copy per region, rings clipped by the region boundary
      const centroid = polygonCentroid(ring);
      const c = worldToScreen(centroid, vp);
      for (const kernelRing of setting.kernel) {
        model.kernelRings.push({
          cx: c.x,
          cy: c.y,
          innerPx: kernelRing.inner * vp.scale,
          outerPx: kernelRing.outer * vp.scale,
          clipRegionId: id,
        });
      }
    }
  }
  if (inputs.locations) {
    model.locations = inputs.locations.map(([x, y]) => worldToScreen({ x, y }, vp));
  }
  if (inputs.gridCells) {
    for (const cell of inputs.gridCells) {
      const s = worldToScreen({ x: cell.center[0], y: cell.center[1] }, vp);
      const style = triangleStyle(cell.sextile);
      model.variableMarks.push({
        points: trianglePoints(s.x, s.y, style.size, style.upward),
        fill: style.fill,
      });
    }
  }
  if (inputs.annotationBoundaries) {
    for (const boundary of inputs.annotationBoundaries) {
      model.annotationPaths.push(
        polylinePath(boundary as [number, number][], vp),
      );
    }
  }
  if (inputs.splitDraft && inputs.splitDraft.length >= 2) {
    model.splitPreviewPath = polylinePath(inputs.splitDraft, vp);
  }
  if (inputs.kernelCenter && inputs.kernelPreviewRadii?.length) {
    const c = worldToScreen(inputs.kernelCenter, vp);
    model.kernelPreview = {
      cx: c.x,
      cy: c.y,
      radii: inputs.kernelPreviewRadii.map((r) => r * vp.scale),
    };
  }
  return model;
}

/** Region fills for a suggestion under the active color scale. */
export function choroplethFills(
  regions: RegionMetricJson[],
  scale: "counts" | "cov_diff",
  colorFn: (t: number) => string,
): Map<string, string> {
  const values = regions.map((r) =>
    scale === "counts" ? r.count : r.cov_diff ?? 0,
  );
  const min = Math.min(...values);
  const max = Math.max(...values);
  const fills = new Map<string, string>();
  regions.forEach((region, i) => {
    const t = max > min ? (values[i] - min) / (max - min) : 0.5;
    fills.set(region.id, colorFn(t));
  });
  return fills;
}

/** Snap a cursor to the closest annotation boundary vertex within
 * `radiusPx`; returns the snapped world point or the cursor unchanged. */
export function snapToBoundaries(
  cursorWorld: Point,
  boundaries: number[][][],
  vp: Viewport,
  radiusPx = 10,
): Point {
  const cursorScreen = worldToScreen(cursorWorld, vp);
  let best: Point | null = null;
  let bestDist = radiusPx;
  for (const boundary of boundaries) {
    for (const [x, y] of boundary) {
      const s = worldToScreen({ x, y }, vp);
      const d = Math.hypot(s.x - cursorScreen.x, s.y - cursorScreen.y);
      if (d <= bestDist) {
        bestDist = d;
        best = { x, y };
      }
    }
  }
  return best ?? cursorWorld;
}

/** Rings of the setting as variogram-extent bands (meters). */
export function kernelExtents(setting: SettingJson | null): [number, number][] {
  if (!setting) return [];
  return setting.kernel.map((ring: RingJson) => [ring.inner, ring.outer]);
}
