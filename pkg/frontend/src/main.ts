import { ApiClient, ApiError, StaleGate } from "./api.js";
import { AttributionView } from "./attributionview.js";
import { clear, el } from "./dom.js";
import { LinkingController } from "./linking.js";
import { MapView } from "./mapview.js";
import { ScatterView } from "./scatterview.js";
import { StateStore, ViewState } from "./state.js";
import { TemporalOverlays } from "./temporal.js";
import type {
  AttributionPayload,
  MapPayload,
  RunSummary,
  Scale,
  ScatterPayload,
  Shape,
  TemporalPayload,
} from "./types.js";
import { METRICS, SCALES, SHAPES, TOOLS } from "./types.js";

interface Slot<T> {
  payload: T | null;
  error: string | null;
  /** Cache key the payload was fetched under. */
  key: string | null;
}

function emptySlot<T>(): Slot<T> {
  return { payload: null, error: null, key: null };
}

function comboKey(shape: Shape, scale: Scale): string {
  return `${shape}_${scale}`;
}

/**
 * Wires the three views, the selection resolver, and the widget bar to
 * one state store.  Payload slots are refreshed whenever the state's
 * cache key for a slot changes; every response passes the staleness gate
 * so a slow older reply can never overwrite a newer one.
 */
export class App {
  readonly store = new StateStore();
  readonly gate = new StaleGate();
  readonly api: ApiClient;
  readonly linking: LinkingController;

  mapView!: MapView;
  scatterView!: ScatterView;
  attributionView!: AttributionView;
  overlays!: TemporalOverlays;

  private runs: RunSummary[] = [];
  private mapSlot = emptySlot<MapPayload>();
  private scatterSlot = emptySlot<ScatterPayload>();
  private attributionSlot = emptySlot<AttributionPayload>();
  private readonly temporalCache = new Map<string, Promise<TemporalPayload>>();
  private statusNode!: HTMLElement;
  private headerNode!: HTMLElement;
  private readonly root: HTMLElement;

  constructor(root: HTMLElement, api = new ApiClient()) {
    this.root = root;
    this.api = api;
    this.linking = new LinkingController(this.api, this.gate, this.store, (msg) =>
      this.setStatus(msg),
    );
  }

  async start(): Promise<void> {
    this.buildShell();
    this.store.subscribe((s) => {
      this.renderHeader(s);
      void this.refresh(s);
      this.renderViews(s);
    });
    try {
      this.runs = await this.api.runs();
    } catch (err) {
      this.setStatus(err instanceof Error ? err.message : String(err));
      this.renderHeader(this.store.get());
      return;
    }
    const sealed = this.runs.filter((r) => r.sealed);
    if (sealed.length === 0) {
      this.setStatus("no sealed runs available");
      this.renderHeader(this.store.get());
      return;
    }
    this.store.setRun(sealed[0].run_id);
  }

  activeRun(): RunSummary | null {
    const id = this.store.get().run;
    return this.runs.find((r) => r.run_id === id) ?? null;
  }

  /** Deepest ladder scale built for the shape, for the hierarchy request. */
  deepestScale(run: RunSummary, shape: Shape): Scale | null {
    let best: Scale | null = null;
    for (const s of SCALES) {
      if (run.combos.includes(comboKey(shape, s))) best = s;
    }
    return best;
  }

  private buildShell(): void {
    clear(this.root);
    this.headerNode = el("header", { class: "topbar" });
    this.root.appendChild(this.headerNode);

    const grid = el("div", { class: "panels" });
    const mapPanel = el("section", { class: "panel", id: "map-panel" });
    mapPanel.appendChild(el("h2", {}, "bivariate map"));
    const mapBody = el("div", { class: "panel-body map-body" });
    mapPanel.appendChild(mapBody);
    const overlayLayer = el("div", { class: "overlay-layer" });
    mapPanel.appendChild(overlayLayer);

    const scatterPanel = el("section", { class: "panel", id: "scatter-panel" });
    scatterPanel.appendChild(el("h2", {}, "association scatterplot"));
    const scatterBody = el("div", { class: "panel-body" });
    scatterPanel.appendChild(scatterBody);

    const attrPanel = el("section", { class: "panel", id: "attribution-panel" });
    attrPanel.appendChild(el("h2", {}, "multi-scale attribution"));
    const attrBody = el("div", { class: "panel-body" });
    attrPanel.appendChild(attrBody);

    grid.appendChild(mapPanel);
    grid.appendChild(scatterPanel);
    grid.appendChild(attrPanel);
    this.root.appendChild(grid);

    this.statusNode = el("div", { class: "status", role: "status" });
    this.root.appendChild(this.statusNode);

    this.mapView = new MapView(mapBody, (tool, geometry) => {
      void this.linking.fromMap(tool, geometry);
    });
    this.scatterView = new ScatterView(scatterBody, (tool, geometry) => {
      void this.linking.fromScatter(tool, geometry);
    });
    this.attributionView = new AttributionView(attrBody, (tool, plot, geometry) => {
      void this.linking.fromAttribution(tool, plot, geometry);
    });
    this.overlays = new TemporalOverlays(overlayLayer, {
      load: (shape, scale, region) => this.loadTemporal(shape, scale, region),
      onMove: (key, x, y) => this.store.moveOverlay(key, x, y),
      onClose: (key) => this.store.closeOverlay(key),
    });
  }

  private setStatus(msg: string | null): void {
    if (this.statusNode) this.statusNode.textContent = msg ?? "";
  }

  private renderHeader(s: ViewState): void {
    clear(this.headerNode);
    this.headerNode.appendChild(el("span", { class: "app-title" }, "maupscope"));

    const runSel = el("select", { class: "run-select", "aria-label": "run" });
    for (const r of this.runs) {
      const opt = el("option", { value: r.run_id }, r.run_id);
      if (!r.sealed) opt.setAttribute("disabled", "disabled");
      if (r.run_id === s.run) opt.setAttribute("selected", "selected");
      runSel.appendChild(opt);
    }
    runSel.addEventListener("change", () => this.store.setRun(runSel.value));
    this.headerNode.appendChild(runSel);

    const run = this.activeRun();
    this.headerNode.appendChild(
      this.buttonGroup("shape", SHAPES, s.shape, (shape) => this.store.setShape(shape), (shape) =>
        run !== null && SCALES.some((sc) => run.combos.includes(comboKey(shape, sc))),
      ),
    );
    this.headerNode.appendChild(
      this.buttonGroup("scale", SCALES, s.scale, (scale) => this.store.setScale(scale), (scale) =>
        run !== null && run.combos.includes(comboKey(s.shape, scale)),
      ),
    );
    this.headerNode.appendChild(
      this.buttonGroup("metric", METRICS, s.metric, (m) => this.store.setMetric(m), () => true),
    );
    this.headerNode.appendChild(
      this.buttonGroup("tool", TOOLS, s.tool, (t) => this.store.setTool(t), () => true),
    );

    const clearBtn = el("button", { class: "clear-btn", type: "button" }, "clear selection");
    clearBtn.addEventListener("click", () => this.store.clearSelection());
    this.headerNode.appendChild(clearBtn);
  }

  private buttonGroup<T extends string>(
    label: string,
    values: readonly T[],
    active: T,
    pick: (v: T) => void,
    enabled: (v: T) => boolean,
  ): HTMLElement {
    const group = el("div", { class: "btn-group", "data-group": label });
    group.appendChild(el("span", { class: "group-label" }, label));
    for (const v of values) {
      const btn = el("button", { type: "button", "data-value": v }, v);
      btn.className = v === active ? "active" : "";
      if (!enabled(v)) btn.setAttribute("disabled", "disabled");
      btn.addEventListener("click", () => pick(v));
      group.appendChild(btn);
    }
    return group;
  }

  /** Fetch every slot whose cache key moved; stale replies are dropped. */
  private async refresh(s: ViewState): Promise<void> {
    if (s.run === null) return;
    const run = s.run;
    const jobs: Promise<void>[] = [];

    const mapKey = `${run}|${s.shape}|${s.scale}`;
    if (this.mapSlot.key !== mapKey) {
      this.mapSlot = { ...emptySlot<MapPayload>(), key: mapKey };
      jobs.push(
        this.fetchSlot("map", mapKey, () => this.api.map({ shape: s.shape, scale: s.scale, run }), (r) => {
          this.mapSlot = r;
        }),
      );
    }

    const scatterKey = mapKey;
    if (this.scatterSlot.key !== scatterKey) {
      this.scatterSlot = { ...emptySlot<ScatterPayload>(), key: scatterKey };
      jobs.push(
        this.fetchSlot(
          "scatter",
          scatterKey,
          () => this.api.scatter({ shape: s.shape, scale: s.scale, run }),
          (r) => {
            this.scatterSlot = r;
          },
        ),
      );
    }

    const summary = this.activeRun();
    const deepest = summary === null ? null : this.deepestScale(summary, s.shape);
    const attrKey = deepest === null ? null : `${run}|${s.shape}|${deepest}|${s.metric}`;
    if (attrKey !== null && this.attributionSlot.key !== attrKey) {
      this.attributionSlot = { ...emptySlot<AttributionPayload>(), key: attrKey };
      jobs.push(
        this.fetchSlot(
          "attribution",
          attrKey,
          () => this.api.attribution({ shape: s.shape, scale: deepest!, metric: s.metric, run }),
          (r) => {
            this.attributionSlot = r;
          },
        ),
      );
    }

    if (jobs.length === 0) return;
    await Promise.all(jobs);
    this.renderViews(this.store.get());
  }

  private async fetchSlot<T>(
    slot: string,
    key: string,
    work: () => Promise<T>,
    commit: (r: Slot<T>) => void,
  ): Promise<void> {
    try {
      const value = await this.gate.run(slot, work);
      if (value === null) return; // a newer request owns this slot
      commit({ payload: value, error: null, key });
    } catch (err) {
      const msg = err instanceof ApiError ? err.message : `request failed: ${err}`;
      commit({ payload: null, error: msg, key });
    }
  }

  private loadTemporal(shape: Shape, scale: Scale, region: number): Promise<TemporalPayload> {
    const s = this.store.get();
    const key = `${s.run}|${shape}|${scale}|${region}`;
    let hit = this.temporalCache.get(key);
    if (hit === undefined) {
      hit = this.api.temporal({ shape, scale, region, run: s.run ?? undefined });
      this.temporalCache.set(key, hit);
    }
    return hit;
  }

  renderViews(s: ViewState): void {
    this.mapView.render({
      payload: this.mapSlot.payload,
      error: this.mapSlot.error,
      highlight: this.store.highlightAt(s.scale),
      tool: s.tool,
    });
    this.scatterView.render({
      payload: this.scatterSlot.payload,
      error: this.scatterSlot.error,
      highlight: this.store.highlightAt(s.scale),
      tool: s.tool,
    });
    const perScale = new Map<Scale, Set<number>>();
    for (const scale of SCALES) perScale.set(scale, this.store.highlightAt(scale));
    this.attributionView.render({
      payload: this.attributionSlot.payload,
      error: this.attributionSlot.error,
      highlight: perScale,
      tool: s.tool,
    });
    this.overlays.render(s.overlays);
  }
}

export function mount(selector = "#app"): App {
  const root = document.querySelector<HTMLElement>(selector);
  if (root === null) throw new Error(`no mount point matching ${selector}`);
  const app = new App(root);
  void app.start();
  return app;
}

if (typeof document !== "undefined" && document.querySelector("#app") !== null) {
  mount();
}
