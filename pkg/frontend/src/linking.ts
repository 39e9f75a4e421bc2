import { ApiClient, StaleGate } from "./api.js";
import type { PlotRef } from "./attributionview.js";
import { StateStore } from "./state.js";
import type { Scale, SelectionGeometry, SelectionRequest, Tool, ViewName } from "./types.js";
import { SCALES } from "./types.js";

/**
 * One path from gesture to highlight: every selection, whichever view it
 * starts in, is sent to the server's resolver and the returned per-scale
 * id sets are stored as the single selection.  Views highlight straight
 * from those sets; nothing on the client recomputes membership, so the
 * three views can never disagree.
 *
 * Point selections additionally open a temporal heatmap overlay for the
 * picked region, keyed to the scale the pick was made at.
 */
export class LinkingController {
  private readonly api: ApiClient;
  private readonly gate: StaleGate;
  private readonly store: StateStore;
  private readonly onError: (msg: string | null) => void;

  constructor(
    api: ApiClient,
    gate: StaleGate,
    store: StateStore,
    onError: (msg: string | null) => void = () => undefined,
  ) {
    this.api = api;
    this.gate = gate;
    this.store = store;
    this.onError = onError;
  }

  fromMap(tool: Tool, geometry: SelectionGeometry): Promise<void> {
    return this.submit("map", tool, geometry);
  }

  fromScatter(tool: Tool, geometry: SelectionGeometry): Promise<void> {
    return this.submit("scatter", tool, geometry);
  }

  fromAttribution(tool: Tool, plot: PlotRef, geometry: SelectionGeometry): Promise<void> {
    return this.submit("attribution", tool, geometry, plot);
  }

  private async submit(
    view: ViewName,
    tool: Tool,
    geometry: SelectionGeometry,
    plot?: PlotRef,
  ): Promise<void> {
    const s = this.store.get();
    const req: SelectionRequest = {
      view,
      tool,
      shape: s.shape,
      scale: s.scale,
      geometry,
      expand: [...SCALES],
    };
    if (plot !== undefined) req.plot = plot;
    if (s.run !== null) req.run = s.run;

    let resolved;
    try {
      resolved = await this.gate.run("resolve", () => this.api.resolve(req));
    } catch (err) {
      this.onError(err instanceof Error ? err.message : String(err));
      return;
    }
    if (resolved === null) return; // superseded by a newer gesture
    this.onError(null);
    this.store.applySelection(resolved);

    if (tool === "point") {
      // the pick's own scale names the region the heatmap describes
      const originScale: Scale = resolved.scale;
      const ids = resolved.resolved[originScale] ?? [];
      for (const region of ids) {
        this.store.openOverlay(s.shape, originScale, region);
      }
    }
  }
}
