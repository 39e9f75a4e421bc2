export type Shape = "grid" | "taz";
export type Scale = "50x25" | "100x50" | "200x100";
export type Metric = "prmse" | "u" | "corr";
export type Tool = "point" | "rect" | "lasso";
export type ViewName = "map" | "scatter" | "attribution";

export const SCALES: readonly Scale[] = ["50x25", "100x50", "200x100"];
export const SHAPES: readonly Shape[] = ["grid", "taz"];
export const METRICS: readonly Metric[] = ["prmse", "u", "corr"];
export const TOOLS: readonly Tool[] = ["point", "rect", "lasso"];

export const SCALE_DIMS: Record<Scale, [number, number]> = {
  "50x25": [50, 25],
  "100x50": [100, 50],
  "200x100": [200, 100],
};

export interface BBox {
  lon_min: number;
  lon_max: number;
  lat_min: number;
  lat_max: number;
}

export interface RunSummary {
  run_id: string;
  sealed: boolean;
  combos: string[];
  shapes: Shape[];
  scales: Scale[];
  days: number | null;
  train_days: number | null;
  test_days: number | null;
  seed: number | null;
}

/** Bin edges are implicit: uniform up to the stored maxima. */
export interface VsupEdges {
  value_max: number;
  error_max: number;
}

export interface VsupCell {
  level: number;
  bin: number;
}

export interface MapCell {
  region_id: number;
  vsup: VsupCell;
  mean_volume: number;
  mean_abs_error: number;
}

export interface MapPayload {
  run_id: string;
  shape: Shape;
  scale: Scale;
  w: number;
  h: number;
  bbox: BBox;
  vsup: VsupEdges;
  cells: MapCell[];
}

export interface ScatterPoint {
  region_id: number;
  z_value: number;
  z_lag: number;
  lisa: number;
  z_error: number | null;
}

export interface MoranSummary {
  global_i: number;
  regression_slope: number;
  intercept: number;
  pearson_r: number;
  p_value: number;
}

export interface ScatterPayload {
  run_id: string;
  shape: Shape;
  scale: Scale;
  moran: MoranSummary;
  points: ScatterPoint[];
}

export interface PlotDot {
  region_id: number;
  x: number;
  y: number;
  diameter: number;
  color_value: number | null;
}

export interface Plot {
  scale: Scale;
  subset_index: number;
  W: number;
  H: number;
  dots: PlotDot[];
}

export interface AttributionPayload {
  run_id: string;
  shape: Shape;
  scales: Scale[];
  color_metric: Metric;
  plots: Plot[];
  /** Parent scale -> region id (stringified) -> child ids one scale down. */
  child_map: Record<string, Record<string, number[]>>;
}

export interface TemporalCell {
  level: number;
  bin: number;
  volume: number;
  error: number;
}

export interface TemporalPayload {
  run_id: string;
  shape: Shape;
  scale: Scale;
  region_id: number;
  days: number;
  slots: number;
  vsup: VsupEdges;
  cells: TemporalCell[][];
}

export interface MetaPayload {
  run_id: string;
  shape: Shape;
  scale: Scale;
  w: number;
  h: number;
  bbox: BBox;
  test_slot_range: { t_first: number; t_last: number } | null;
  config: Record<string, unknown>;
  cleaning: Record<string, unknown>;
  discards: Record<string, unknown>;
  global: Record<string, unknown>;
  vsup: VsupEdges;
}

/** Geometry travels in the origin view's coordinate space. */
export type SelectionGeometry =
  | { x: number; y: number }
  | { x0: number; y0: number; x1: number; y1: number }
  | { points: [number, number][] };

export interface SelectionRequest {
  view: ViewName;
  tool: Tool;
  shape: Shape;
  scale: Scale;
  geometry: SelectionGeometry;
  /** Attribution selections address one plot of the hierarchy. */
  plot?: { scale: Scale; subset_index: number };
  expand?: Scale[];
  run?: string;
}

export interface ResolvedSelection {
  view: ViewName;
  tool: Tool;
  shape: Shape;
  scale: Scale;
  resolved: Partial<Record<Scale, number[]>>;
}
