/** Render models for the guidance browser and the linked statistic views. */

import { grayScale, greenScale, normalize, orangeScale } from "./colors.js";
import type {
  DistanceDensityJson,
  GuidanceBundleJson,
  VariogramJson,
} from "./types.js";

// -- kernel suggestion bars ---------------------------------------------------

export interface KernelBar {
  index: number;
  x: number; // px, left edge = inner radius
  width: number; // px, right edge = outer radius
  y: number;
  height: number; // linear in ring thickness
  fill: string;
}

/** Stacked bars: X encodes distance (left edge inner, right edge outer),
 * bar height encodes ring thickness linearly, one row per level. */
export function kernelBarModel(
  bundle: GuidanceBundleJson,
  width: number,
  rowHeight = 26,
  gap = 4,
): KernelBar[] {
  const suggestions = bundle.kernel_suggestions;
  if (!suggestions.length) return [];
  const maxRadius = Math.max(...suggestions.map((s) => s.outer));
  const maxThickness = Math.max(...suggestions.map((s) => s.outer - s.inner));
  const means = suggestions.map((s) => s.mean_counts[0] ?? 0);
  const minMean = Math.min(...means);
  const maxMean = Math.max(...means);
  return suggestions.map((s, index) => {
    const height = Math.max(
      4,
      (rowHeight - 6) * ((s.outer - s.inner) / maxThickness),
    );
    const rowTop = s.level * (rowHeight + gap);
    return {
      index,
      x: (s.inner / maxRadius) * width,
      width: ((s.outer - s.inner) / maxRadius) * width,
      y: rowTop + (rowHeight - height),
      height,
      fill: orangeScale(normalize(means[index], minMean, maxMean)),
    };
  });
}

// -- suggestion list ----------------------------------------------------------

export interface SuggestionSwatch {
  index: number;
  key: string;
  source: string;
  regionCount: number;
  flaggedCount: number;
}

export function suggestionList(bundle: GuidanceBundleJson): SuggestionSwatch[] {
  return bundle.regionalizations.map((s, index) => ({
    index,
    key: s.key,
    source: s.source,
    regionCount: s.regions.length,
    flaggedCount: s.regions.filter((r) => r.flagged).length,
  }));
}

export function scaleColor(
  scale: "counts" | "cov_diff",
): (t: number) => string {
  return scale === "counts" ? orangeScale : greenScale;
}

// -- variograms ---------------------------------------------------------------

export interface VariogramLine {
  variable: string;
  points: { x: number; y: number }[];
}

export interface DispersionSquare {
  x: number;
  y: number;
  size: number;
  fill: string;
}

export interface VariogramModel {
  lines: VariogramLine[];
  squares: DispersionSquare[];
  extents: { x0: number; x1: number }[]; // kernel bands, px
  maxLag: number;
  maxGamma: number;
}

export function variogramModel(
  data: VariogramJson,
  kernelExtents: [number, number][],
  width: number,
  height: number,
): VariogramModel {
  const edges = data.edges;
  const maxLag = edges[edges.length - 1];
  const centers = edges.slice(0, -1).map((e, i) => (e + edges[i + 1]) / 2);
  let maxGamma = 0;
  for (const values of Object.values(data.per_variable)) {
    for (const v of values) if (v !== null && v > maxGamma) maxGamma = v;
  }
  if (maxGamma === 0) maxGamma = 1;
  const sx = (lag: number) => (lag / maxLag) * width;
  const sy = (gamma: number) => height - (gamma / maxGamma) * (height - 18);

  const lines: VariogramLine[] = Object.entries(data.per_variable).map(
    ([variable, values]) => ({
      variable,
      points: values
        .map((v, i) => (v === null ? null : { x: sx(centers[i]), y: sy(v) }))
        .filter((p): p is { x: number; y: number } => p !== null),
    }),
  );

  const dispersionValues = data.dispersion.filter(
    (d): d is number => d !== null,
  );
  const maxDispersion = dispersionValues.length
    ? Math.max(...dispersionValues)
    : 1;
  const squares: DispersionSquare[] = [];
  data.dispersion.forEach((d, i) => {
    if (d === null) return;
    squares.push({
      x: sx(centers[i]) - 5,
      y: 2,
      size: 10,
      fill: grayScale(maxDispersion > 0 ? d / maxDispersion : 0),
    });
  });

  return {
    lines,
    squares,
    extents: kernelExtents
      .filter(([a, b]) => a < maxLag && b > 0)
      .map(([a, b]) => ({
        x0: sx(Math.max(0, a)),
        x1: sx(Math.min(maxLag, b)),
      })),
    maxLag,
    maxGamma,
  };
}

// -- distance density -----------------------------------------------------------

export interface DensityBar {
  x: number;
  width: number;
  height: number;
}

export function densityModel(
  data: DistanceDensityJson,
  width: number,
  height: number,
): DensityBar[] {
  const maxCount = Math.max(...data.counts, 1);
  const barWidth = width / data.counts.length;
  return data.counts.map((count, i) => ({
    x: i * barWidth,
    width: Math.max(barWidth - 1, 1),
    height: (count / maxCount) * height,
  }));
}
