/** Wire types mirroring the service JSON API. */

export interface RingJson {
  inner: number;
  outer: number;
}

export interface RegionFeature {
  type: "Feature";
  properties: { id: string; [key: string]: unknown };
  geometry: { type: "Polygon"; coordinates: number[][][] };
}

export interface RegionalizationJson {
  type: "FeatureCollection";
  features: RegionFeature[];
}

export interface SettingJson {
  schema_version?: number;
  label: string;
  created_at?: string;
  regionalization: RegionalizationJson;
  kernel: RingJson[];
  [key: string]: unknown;
}

export interface WorkspaceSummary {
  id: string;
  n: number;
  p: number;
  variable_names: string[];
  crs_note: string;
  bounding_box: [number, number, number, number];
}

export interface RegionMetricJson {
  id: string;
  count: number;
  flagged: boolean;
  cov_diff: number | null;
}

export interface RegionalizationSuggestionJson {
  source: "grid" | "covariance";
  key: string;
  regionalization: RegionalizationJson;
  regions: RegionMetricJson[];
  kernel_mean_counts: number[][];
  kernel_flagged: boolean[][];
}

export interface KernelSuggestionJson {
  inner: number;
  outer: number;
  level: number;
  mean_counts: number[];
}

export interface GuidanceBundleJson {
  schema_version: number;
  thresholds: { min_count_fraction: number };
  max_radius: number;
  regionalizations: RegionalizationSuggestionJson[];
  kernel_suggestions: KernelSuggestionJson[];
}

export interface MetricReportJson {
  threshold: number;
  regions: RegionMetricJson[];
  kernel: {
    per_ring_means: number[][];
    per_ring_flagged: boolean[][];
    config_means: number[];
    config_flagged: boolean[];
  };
  eigenvalue_differences?: (number | null)[][];
}

export interface VariogramJson {
  edges: number[];
  per_variable: Record<string, (number | null)[]>;
  dispersion: (number | null)[];
  pair_counts: number[];
}

export interface DistanceDensityJson {
  edges: number[];
  counts: number[];
}

export interface GridCellJson {
  row: number;
  col: number;
  center: [number, number];
  count: number;
  median: number;
  sextile: number;
}

export interface VariableGridJson {
  variable: string;
  cells: GridCellJson[];
}

export interface HistoryEntryJson {
  id: string;
  label: string;
  created_at: string;
  result_id: string | null;
}

export interface SbssRunJson {
  result_id: string;
  unmixing: number[][];
  component_order: number[];
  diagnostics: Record<string, unknown>;
  urls: Record<string, string>;
}

export interface Point {
  x: number;
  y: number;
}
