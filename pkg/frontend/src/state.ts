import type { Metric, ResolvedSelection, Scale, Shape, Tool } from "./types.js";

export interface OverlayState {
  /** Stable key: shape|scale|region. */
  key: string;
  shape: Shape;
  scale: Scale;
  region: number;
  x: number;
  y: number;
}

export interface ViewState {
  run: string | null;
  shape: Shape;
  scale: Scale;
  metric: Metric;
  tool: Tool;
  selection: ResolvedSelection | null;
  overlays: OverlayState[];
}

export function initialState(): ViewState {
  return {
    run: null,
    shape: "grid",
    scale: "50x25",
    metric: "prmse",
    tool: "point",
    selection: null,
    overlays: [],
  };
}

export function overlayKey(shape: Shape, scale: Scale, region: number): string {
  return `${shape}|${scale}|${region}`;
}

type Listener = (state: ViewState) => void;

/**
 * Single mutable holder for display state.  Every change goes through
 * update(), which replaces the state object and notifies subscribers,
 * so rendering stays a function of (payloads, state) with no hidden
 * per-view caches of membership.
 */
export class StateStore {
  private state: ViewState;
  private readonly listeners: Listener[] = [];

  constructor(state: ViewState = initialState()) {
    this.state = state;
  }

  get(): ViewState {
    return this.state;
  }

  subscribe(fn: Listener): () => void {
    this.listeners.push(fn);
    return () => {
      const i = this.listeners.indexOf(fn);
      if (i >= 0) this.listeners.splice(i, 1);
    };
  }

  update(patch: Partial<ViewState>): void {
    this.state = { ...this.state, ...patch };
    for (const fn of [...this.listeners]) fn(this.state);
  }

  setRun(run: string | null): void {
    // ids resolved against one run's artifacts mean nothing in another
    this.update({ run, selection: null, overlays: [] });
  }

  setShape(shape: Shape): void {
    if (shape === this.state.shape) return;
    // selection ids stay valid only for the scheme they were resolved on
    this.update({ shape, selection: null, overlays: [] });
  }

  setScale(scale: Scale): void {
    // resolved sets carry every ladder scale, so the selection survives
    this.update({ scale });
  }

  setMetric(metric: Metric): void {
    this.update({ metric });
  }

  setTool(tool: Tool): void {
    this.update({ tool });
  }

  applySelection(selection: ResolvedSelection): void {
    this.update({ selection });
  }

  clearSelection(): void {
    this.update({ selection: null, overlays: [] });
  }

  /** Highlighted ids for one scale, from the server-resolved ladder only. */
  highlightAt(scale: Scale): Set<number> {
    const sel = this.state.selection;
    const ids = sel?.resolved[scale];
    return new Set(ids ?? []);
  }

  openOverlay(shape: Shape, scale: Scale, region: number): void {
    const key = overlayKey(shape, scale, region);
    if (this.state.overlays.some((o) => o.key === key)) return;
    // stagger new overlays so stacked ones stay grabbable
    const n = this.state.overlays.length;
    const overlay: OverlayState = { key, shape, scale, region, x: 16 + 24 * n, y: 16 + 24 * n };
    this.update({ overlays: [...this.state.overlays, overlay] });
  }

  moveOverlay(key: string, x: number, y: number): void {
    this.update({
      overlays: this.state.overlays.map((o) => (o.key === key ? { ...o, x, y } : o)),
    });
  }

  closeOverlay(key: string): void {
    this.update({ overlays: this.state.overlays.filter((o) => o.key !== key) });
  }
}
