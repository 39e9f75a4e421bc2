import type {
  AttributionPayload,
  MapPayload,
  MetaPayload,
  Metric,
  ResolvedSelection,
  RunSummary,
  Scale,
  ScatterPayload,
  SelectionRequest,
  Shape,
  TemporalPayload,
} from "./types.js";

export class ApiError extends Error {
  readonly status: number;

  constructor(status: number, detail: string) {
    super(detail);
    this.name = "ApiError";
    this.status = status;
  }
}

async function errorDetail(res: Response): Promise<string> {
  try {
    const body = await res.json();
    if (body && typeof body.detail === "string") return body.detail;
  } catch {
    /* non-JSON error body */
  }
  return `${res.status} ${res.statusText}`;
}

function query(params: Record<string, string | number | undefined>): string {
  const qs = new URLSearchParams();
  for (const [k, v] of Object.entries(params)) {
    if (v !== undefined) qs.set(k, String(v));
  }
  const s = qs.toString();
  return s ? `?${s}` : "";
}

export interface ComboQuery {
  shape: Shape;
  scale: Scale;
  run?: string;
}

export class ApiClient {
  readonly base: string;

  constructor(base = "") {
    this.base = base.replace(/\/$/, "");
  }

  private async get<T>(path: string): Promise<T> {
    const res = await fetch(this.base + path);
    if (!res.ok) throw new ApiError(res.status, await errorDetail(res));
    return (await res.json()) as T;
  }

  runs(): Promise<RunSummary[]> {
    return this.get("/api/runs");
  }

  map(q: ComboQuery): Promise<MapPayload> {
    return this.get(`/api/map${query({ ...q })}`);
  }

  scatter(q: ComboQuery): Promise<ScatterPayload> {
    return this.get(`/api/scatter${query({ ...q })}`);
  }

  attribution(q: ComboQuery & { metric: Metric }): Promise<AttributionPayload> {
    return this.get(`/api/attribution${query({ ...q })}`);
  }

  temporal(q: ComboQuery & { region: number }): Promise<TemporalPayload> {
    return this.get(`/api/temporal${query({ ...q })}`);
  }

  meta(q: ComboQuery): Promise<MetaPayload> {
    return this.get(`/api/meta${query({ ...q })}`);
  }

  async resolve(sel: SelectionRequest): Promise<ResolvedSelection> {
    const res = await fetch(`${this.base}/api/selection/resolve`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(sel),
    });
    if (!res.ok) throw new ApiError(res.status, await errorDetail(res));
    return (await res.json()) as ResolvedSelection;
  }
}

/**
 * Per-slot monotone sequence numbers for in-flight requests.  A response
 * is applied only if no newer request on the same slot has started since;
 * later-arriving stale responses are dropped instead of clobbering fresh
 * state.
 */
export class StaleGate {
  private readonly latest = new Map<string, number>();
  private seq = 0;

  begin(slot: string): number {
    this.seq += 1;
    this.latest.set(slot, this.seq);
    return this.seq;
  }

  isCurrent(slot: string, token: number): boolean {
    return this.latest.get(slot) === token;
  }

  /** Run one fetch under the gate; resolves null when superseded. */
  async run<T>(slot: string, work: () => Promise<T>): Promise<T | null> {
    const token = this.begin(slot);
    const value = await work();
    return this.isCurrent(slot, token) ? value : null;
  }
}
