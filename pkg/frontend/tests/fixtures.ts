/**
 * Fake service for UI tests.  Payload builders mirror the documented
 * endpoint shapes, and the selection resolver reimplements the server's
 * semantics over the fixture data (nearest point, closed-rect
 * containment, even-odd lasso, dyadic ladder expansion), so the client
 * under test is exercised exactly as against the real API.
 */
import type {
  AttributionPayload,
  MapPayload,
  Plot,
  ResolvedSelection,
  RunSummary,
  Scale,
  ScatterPayload,
  ScatterPoint,
  SelectionRequest,
  TemporalPayload,
} from "../src/types.js";
import { SCALES, SCALE_DIMS } from "../src/types.js";

export const RUN_ID = "run-fixture00ab";
export const BBOX = { lon_min: 113.775, lon_max: 114.629, lat_min: 22.443, lat_max: 22.855 };

/** Coarse-scale regions the fixture knows about. */
export const COARSE_REGIONS = [0, 1, 7, 52];

export function childIds(id: number, scale: Scale): number[] {
  const [w] = SCALE_DIMS[scale];
  const ix = id % w;
  const iy = Math.floor(id / w);
  const out: number[] = [];
  for (const dy of [0, 1]) {
    for (const dx of [0, 1]) {
      out.push((2 * iy + dy) * 2 * w + (2 * ix + dx));
    }
  }
  return out.sort((a, b) => a - b);
}

export function descendants(id: number, from: Scale, to: Scale): number[] {
  let ids = [id];
  let at = SCALES.indexOf(from);
  const target = SCALES.indexOf(to);
  while (at < target) {
    ids = ids.flatMap((i) => childIds(i, SCALES[at]));
    at += 1;
  }
  return ids.sort((a, b) => a - b);
}

function parentId(id: number, scale: Scale): number {
  const [w] = SCALE_DIMS[scale];
  const ix = id % w;
  const iy = Math.floor(id / w);
  return Math.floor(iy / 2) * (w / 2) + Math.floor(ix / 2);
}

export function expandLadder(ids: number[], origin: Scale): Record<Scale, number[]> {
  const out = {} as Record<Scale, number[]>;
  const from = SCALES.indexOf(origin);
  for (const target of SCALES) {
    const to = SCALES.indexOf(target);
    if (to === from) {
      out[target] = [...ids].sort((a, b) => a - b);
    } else if (to > from) {
      out[target] = [...new Set(ids.flatMap((i) => descendants(i, origin, target)))].sort(
        (a, b) => a - b,
      );
    } else {
      let up = ids;
      for (let level = from; level > to; level--) {
        up = up.map((i) => parentId(i, SCALES[level]));
      }
      out[target] = [...new Set(up)].sort((a, b) => a - b);
    }
  }
  return out;
}

export function makeRuns(): RunSummary[] {
  return [
    {
      run_id: RUN_ID,
      sealed: true,
      combos: ["grid_50x25", "grid_100x50", "grid_200x100", "taz_50x25"],
      shapes: ["grid", "taz"],
      scales: ["50x25", "100x50", "200x100"],
      days: 14,
      train_days: 7,
      test_days: 7,
      seed: 11,
    },
  ];
}

export function makeMap(shape: "grid" | "taz" = "grid"): MapPayload {
  return {
    run_id: RUN_ID,
    shape,
    scale: "50x25",
    w: 50,
    h: 25,
    bbox: { ...BBOX },
    vsup: { value_max: 1000, error_max: 4 },
    cells: [
      { region_id: 0, vsup: { level: 0, bin: 7 }, mean_volume: 930.5, mean_abs_error: 0.4 },
      { region_id: 1, vsup: { level: 1, bin: 3 }, mean_volume: 612.0, mean_abs_error: 1.3 },
      { region_id: 7, vsup: { level: 3, bin: 0 }, mean_volume: 410.2, mean_abs_error: 3.7 },
      { region_id: 52, vsup: { level: 3, bin: 0 }, mean_volume: 95.8, mean_abs_error: 3.9 },
    ],
  };
}

const SCATTER_POINTS: ScatterPoint[] = [
  { region_id: 0, z_value: 1.5, z_lag: 1.2, lisa: 1.8, z_error: 1.4 },
  { region_id: 1, z_value: 1.1, z_lag: 0.9, lisa: 0.99, z_error: 0.7 },
  { region_id: 7, z_value: -0.5, z_lag: -0.3, lisa: 0.15, z_error: -0.4 },
  { region_id: 52, z_value: -1.2, z_lag: -0.8, lisa: 0.96, z_error: null },
];

export function makeScatter(shape: "grid" | "taz" = "grid"): ScatterPayload {
  return {
    run_id: RUN_ID,
    shape,
    scale: "50x25",
    moran: {
      global_i: 0.42,
      regression_slope: 0.42,
      intercept: 0.0,
      pearson_r: 0.79,
      p_value: 0.0004,
    },
    points: SCATTER_POINTS.map((p) => ({ ...p })),
  };
}

function plotDots(regions: number[], diameter: number): Plot["dots"] {
  return regions.map((region, i) => ({
    region_id: region,
    x: 1.5 + 3 * i,
    y: 4,
    diameter,
    color_value: 0.05 + 0.11 * (i % 7),
  }));
}

export function makeAttribution(): AttributionPayload {
  const plots: Plot[] = [];
  plots.push({ scale: "50x25", subset_index: 0, W: 48, H: 12, dots: plotDots(COARSE_REGIONS, 2.4) });
  const level1 = COARSE_REGIONS.map((r) => childIds(r, "50x25"));
  level1.forEach((children, s) => {
    plots.push({ scale: "100x50", subset_index: s, W: 12, H: 12, dots: plotDots(children, 1.6) });
  });
  const level2 = level1.flat().map((c) => childIds(c, "100x50"));
  level2.forEach((children, s) => {
    plots.push({ scale: "200x100", subset_index: s, W: 3, H: 12, dots: plotDots(children, 0.8) });
  });
  const childMap: Record<string, Record<string, number[]>> = { "50x25": {}, "100x50": {} };
  for (const r of COARSE_REGIONS) childMap["50x25"][String(r)] = childIds(r, "50x25");
  for (const c of level1.flat()) childMap["100x50"][String(c)] = childIds(c, "100x50");
  return {
    run_id: RUN_ID,
    shape: "grid",
    scales: ["50x25", "100x50", "200x100"],
    color_metric: "prmse",
    plots,
    child_map: childMap,
  };
}

/** Single-scale variant, as served when only the coarse combo is built. */
export function makeAttributionShallow(): AttributionPayload {
  const full = makeAttribution();
  return {
    ...full,
    shape: "taz",
    scales: ["50x25"],
    plots: full.plots.filter((p) => p.scale === "50x25"),
    child_map: {},
  };
}

export function makeTemporal(region: number, scale: Scale = "50x25"): TemporalPayload {
  const days = 7;
  const slots = 48;
  const cells = [];
  for (let d = 0; d < days; d++) {
    const row = [];
    for (let s = 0; s < slots; s++) {
      const level = (d + s) % 4;
      row.push({
        level,
        bin: (s % 8) >> level,
        volume: 10 * d + s,
        error: (d + s) % 5,
      });
    }
    cells.push(row);
  }
  return {
    run_id: RUN_ID,
    shape: "grid",
    scale,
    region_id: region,
    days,
    slots,
    vsup: { value_max: 1000, error_max: 4 },
    cells,
  };
}

// --- selection resolution over the fixture data ---------------------------

type XY = [number, number];

function pointInRing(ring: XY[], x: number, y: number): boolean {
  let inside = false;
  for (let i = 0, j = ring.length - 1; i < ring.length; j = i++) {
    const [xi, yi] = ring[i];
    const [xj, yj] = ring[j];
    if (yi > y !== yj > y && x < ((xj - xi) * (y - yi)) / (yj - yi) + xi) {
      inside = !inside;
    }
  }
  return inside;
}

function pickFromPoints(
  tool: string,
  geometry: Record<string, unknown>,
  pts: [number, number, number][],
): number[] {
  if (tool === "point") {
    const x = geometry.x as number;
    const y = geometry.y as number;
    let best: [number, number] | null = null;
    for (const [id, px, py] of pts) {
      const d = (px - x) ** 2 + (py - y) ** 2;
      if (best === null || d < best[0] || (d === best[0] && id < best[1])) best = [d, id];
    }
    return best === null ? [] : [best[1]];
  }
  if (tool === "rect") {
    const x0 = Math.min(geometry.x0 as number, geometry.x1 as number);
    const x1 = Math.max(geometry.x0 as number, geometry.x1 as number);
    const y0 = Math.min(geometry.y0 as number, geometry.y1 as number);
    const y1 = Math.max(geometry.y0 as number, geometry.y1 as number);
    return pts.filter(([, px, py]) => x0 <= px && px <= x1 && y0 <= py && py <= y1).map(([id]) => id);
  }
  const ring = geometry.points as XY[];
  return pts.filter(([, px, py]) => pointInRing(ring, px, py)).map(([id]) => id);
}

function mapCenters(scale: Scale): [number, number, number][] {
  const [w, h] = SCALE_DIMS[scale];
  const out: [number, number, number][] = [];
  for (let id = 0; id < w * h; id++) {
    const ix = id % w;
    const iy = Math.floor(id / w);
    out.push([
      id,
      BBOX.lon_min + ((ix + 0.5) / w) * (BBOX.lon_max - BBOX.lon_min),
      BBOX.lat_min + ((iy + 0.5) / h) * (BBOX.lat_max - BBOX.lat_min),
    ]);
  }
  return out;
}

export function resolveFixture(req: SelectionRequest): ResolvedSelection {
  let origin: Scale = req.scale;
  let ids: number[];
  const geometry = req.geometry as unknown as Record<string, unknown>;
  if (req.view === "map") {
    ids = pickFromPoints(req.tool, geometry, mapCenters(req.scale));
  } else if (req.view === "scatter") {
    ids = pickFromPoints(
      req.tool,
      geometry,
      SCATTER_POINTS.map((p) => [p.region_id, p.z_value, p.z_lag]),
    );
  } else {
    const plotRef = req.plot!;
    origin = plotRef.scale;
    const plot = makeAttribution().plots.find(
      (p) => p.scale === plotRef.scale && p.subset_index === plotRef.subset_index,
    );
    if (plot === undefined) throw new Error(`no plot ${plotRef.subset_index} at ${plotRef.scale}`);
    ids = pickFromPoints(
      req.tool,
      geometry,
      plot.dots.map((d) => [d.region_id, d.x, d.y]),
    );
  }
  return {
    view: req.view,
    tool: req.tool,
    shape: req.shape,
    scale: origin,
    resolved: expandLadder(ids, origin),
  };
}

// --- fetch stub ------------------------------------------------------------

export interface FakeApi {
  /** Requested paths with query strings, in order. */
  calls: string[];
  /** While true, resolve responses wait until released. */
  holdResolve: boolean;
  releaseResolve(index: number): void;
  restore(): void;
}

export function installApi(): FakeApi {
  const calls: string[] = [];
  const held: (() => void)[] = [];
  const original = globalThis.fetch;

  const api: FakeApi = {
    calls,
    holdResolve: false,
    releaseResolve(index: number) {
      const release = held[index];
      if (release === undefined) throw new Error(`no held resolve #${index}`);
      release();
    },
    restore() {
      globalThis.fetch = original;
    },
  };

  const json = (body: unknown, status = 200) =>
    new Response(JSON.stringify(body), {
      status,
      headers: { "content-type": "application/json" },
    });

  globalThis.fetch = (async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = new URL(String(input), "http://fixture.test");
    calls.push(url.pathname + url.search);
    const q = url.searchParams;
    switch (url.pathname) {
      case "/api/runs":
        return json(makeRuns());
      case "/api/map": {
        const shape = q.get("shape");
        if (shape === "taz" && q.get("scale") !== "50x25") {
          return json({ detail: "combo not built" }, 404);
        }
        return json(makeMap(shape === "taz" ? "taz" : "grid"));
      }
      case "/api/scatter": {
        const shape = q.get("shape");
        if (shape === "taz" && q.get("scale") !== "50x25") {
          return json({ detail: "combo not built" }, 404);
        }
        return json(makeScatter(shape === "taz" ? "taz" : "grid"));
      }
      case "/api/attribution":
        return json(q.get("shape") === "taz" ? makeAttributionShallow() : makeAttribution());
      case "/api/temporal":
        return json(makeTemporal(Number(q.get("region")), (q.get("scale") as Scale) ?? "50x25"));
      case "/api/selection/resolve": {
        if (api.holdResolve) {
          await new Promise<void>((release) => held.push(release));
        }
        const req = JSON.parse(String(init?.body)) as SelectionRequest;
        try {
          return json(resolveFixture(req));
        } catch (err) {
          return json({ detail: String(err) }, 400);
        }
      }
      default:
        return json({ detail: `no route ${url.pathname}` }, 404);
    }
  }) as typeof fetch;

  return api;
}

/** Drain queued microtasks and timer turns so async renders finish. */
export async function settle(turns = 12): Promise<void> {
  for (let i = 0; i < turns; i++) {
    await new Promise((resolve) => setTimeout(resolve, 0));
  }
}

export function selIds(root: ParentNode, selector: string): Set<number> {
  return new Set(
    Array.from(root.querySelectorAll(selector), (n) => Number(n.getAttribute("data-region"))),
  );
}
