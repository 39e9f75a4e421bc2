import { clear, el, errorBox, fmt, svgEl } from "./dom.js";
import { legendSectors, vsupColor } from "./palette.js";
import type { MapPayload, SelectionGeometry, Tool } from "./types.js";

export interface MapViewProps {
  payload: MapPayload | null;
  error: string | null;
  highlight: Set<number>;
  tool: Tool;
}

export interface MapSelectHandler {
  (tool: Tool, geometry: SelectionGeometry): void;
}

interface DragState {
  tool: "rect" | "lasso";
  points: [number, number][];
  ghost: SVGElement;
}

/**
 * Bivariate choropleth over the study extent.  Cell fill comes from the
 * (error level, value bin) lookup table; a wedge legend renders the same
 * table.  Point clicks select the clicked cell; rect and lasso drags send
 * their geometry, in lon/lat, to the selection resolver.
 */
export class MapView {
  private readonly root: HTMLElement;
  private readonly onSelect: MapSelectHandler;
  private payload: MapPayload | null = null;
  private tool: Tool = "point";
  private svg: SVGSVGElement | null = null;
  private cellNodes = new Map<number, SVGRectElement>();
  private drag: DragState | null = null;

  constructor(root: HTMLElement, onSelect: MapSelectHandler) {
    this.root = root;
    this.onSelect = onSelect;
  }

  render(props: MapViewProps): void {
    this.tool = props.tool;
    if (props.error !== null) {
      this.payload = null;
      clear(this.root);
      this.root.appendChild(errorBox(props.error));
      return;
    }
    if (props.payload === null) {
      this.payload = null;
      clear(this.root);
      this.root.appendChild(el("div", { class: "placeholder" }, "loading map"));
      return;
    }
    if (props.payload !== this.payload) {
      this.payload = props.payload;
      this.build(props.payload);
    }
    this.applyHighlight(props.highlight);
  }

  /** Lon/lat center of a cell; mirrors the server's uniform grid. */
  cellCenter(region: number): [number, number] {
    const p = this.payload;
    if (p === null) throw new Error("no map payload");
    const ix = region % p.w;
    const iy = Math.floor(region / p.w);
    const lon = p.bbox.lon_min + ((ix + 0.5) / p.w) * (p.bbox.lon_max - p.bbox.lon_min);
    const lat = p.bbox.lat_min + ((iy + 0.5) / p.h) * (p.bbox.lat_max - p.bbox.lat_min);
    return [lon, lat];
  }

  selectPoint(lon: number, lat: number): void {
    this.onSelect("point", { x: lon, y: lat });
  }

  selectRect(lon0: number, lat0: number, lon1: number, lat1: number): void {
    this.onSelect("rect", { x0: lon0, y0: lat0, x1: lon1, y1: lat1 });
  }

  selectLasso(points: [number, number][]): void {
    this.onSelect("lasso", { points });
  }

  private build(p: MapPayload): void {
    clear(this.root);
    this.cellNodes = new Map();

    const svg = svgEl("svg", {
      class: "map-canvas",
      viewBox: `0 0 ${p.w} ${p.h}`,
      preserveAspectRatio: "xMidYMid meet",
    });
    svg.appendChild(
      svgEl("rect", { x: 0, y: 0, width: p.w, height: p.h, class: "map-backdrop" }),
    );
    for (const cell of p.cells) {
      const ix = cell.region_id % p.w;
      const iy = Math.floor(cell.region_id / p.w);
      const rect = svgEl("rect", {
        x: ix,
        y: p.h - 1 - iy,
        width: 1,
        height: 1,
        class: "cell",
        fill: vsupColor(cell.vsup.level, cell.vsup.bin),
        "data-region": cell.region_id,
      });
      const tip = svgEl("title");
      tip.textContent =
        `region ${cell.region_id}\n` +
        `mean volume ${fmt(cell.mean_volume)}\n` +
        `mean abs error ${fmt(cell.mean_abs_error)}`;
      rect.appendChild(tip);
      svg.appendChild(rect);
      this.cellNodes.set(cell.region_id, rect);
    }
    svg.addEventListener("click", (ev) => this.onClick(ev));
    svg.addEventListener("pointerdown", (ev) => this.onPointerDown(ev));
    svg.addEventListener("pointermove", (ev) => this.onPointerMove(ev));
    svg.addEventListener("pointerup", (ev) => this.onPointerUp(ev));
    this.svg = svg;
    this.root.appendChild(svg);
    this.root.appendChild(this.buildLegend(p));
  }

  private buildLegend(p: MapPayload): HTMLElement {
    const box = el("div", { class: "legend" });
    const svg = svgEl("svg", { class: "legend-wedge", viewBox: "0 0 120 86" });
    for (const s of legendSectors(60, 82, 14, 72)) {
      svg.appendChild(
        svgEl("path", {
          d: s.d,
          fill: s.color,
          class: "legend-sector",
          "data-level": s.level,
          "data-bin": s.bin,
        }),
      );
    }
    box.appendChild(svg);
    const cap = el("div", { class: "legend-caption" });
    cap.appendChild(el("div", {}, `volume 0 to ${fmt(p.vsup.value_max, 1)} across the rim`));
    cap.appendChild(el("div", {}, `abs error 0 to ${fmt(p.vsup.error_max, 2)} toward the apex`));
    box.appendChild(cap);
    return box;
  }

  private applyHighlight(ids: Set<number>): void {
    for (const [region, node] of this.cellNodes) {
      node.setAttribute("class", ids.has(region) ? "cell sel" : "cell");
    }
  }

  private onClick(ev: MouseEvent): void {
    if (this.tool !== "point" || this.payload === null) return;
    const target = ev.target as Element | null;
    const raw = target?.getAttribute?.("data-region");
    if (raw === null || raw === undefined) return;
    const [lon, lat] = this.cellCenter(Number(raw));
    this.selectPoint(lon, lat);
  }

  /** Pointer position in lon/lat, or null when the svg has no layout box. */
  private eventLonLat(ev: PointerEvent): [number, number] | null {
    const p = this.payload;
    if (p === null || this.svg === null) return null;
    const box = this.svg.getBoundingClientRect();
    if (!(box.width > 0) || !(box.height > 0)) return null;
    const fx = (ev.clientX - box.left) / box.width;
    const fy = (ev.clientY - box.top) / box.height;
    const lon = p.bbox.lon_min + fx * (p.bbox.lon_max - p.bbox.lon_min);
    const lat = p.bbox.lat_max - fy * (p.bbox.lat_max - p.bbox.lat_min);
    return [lon, lat];
  }

  private onPointerDown(ev: PointerEvent): void {
    if (this.tool === "point" || this.svg === null || this.payload === null) return;
    const at = this.eventLonLat(ev);
    if (at === null) return;
    const ghost = svgEl(this.tool === "rect" ? "rect" : "polyline", { class: "rubber-band" });
    this.svg.appendChild(ghost);
    this.drag = { tool: this.tool, points: [at], ghost };
  }

  private onPointerMove(ev: PointerEvent): void {
    if (this.drag === null) return;
    const at = this.eventLonLat(ev);
    if (at === null) return;
    if (this.drag.tool === "rect") {
      this.drag.points[1] = at;
    } else {
      this.drag.points.push(at);
    }
    this.paintGhost();
  }

  private onPointerUp(ev: PointerEvent): void {
    if (this.drag === null) return;
    const at = this.eventLonLat(ev);
    const { tool, points, ghost } = this.drag;
    this.drag = null;
    ghost.remove();
    if (at !== null) points.push(at);
    if (tool === "rect" && points.length >= 2) {
      const last = points[points.length - 1];
      this.selectRect(points[0][0], points[0][1], last[0], last[1]);
    } else if (tool === "lasso" && points.length >= 3) {
      this.selectLasso(points);
    }
  }

  private paintGhost(): void {
    const d = this.drag;
    const p = this.payload;
    if (d === null || p === null) return;
    const toGrid = ([lon, lat]: [number, number]): [number, number] => [
      ((lon - p.bbox.lon_min) / (p.bbox.lon_max - p.bbox.lon_min)) * p.w,
      ((p.bbox.lat_max - lat) / (p.bbox.lat_max - p.bbox.lat_min)) * p.h,
    ];
    if (d.tool === "rect" && d.points.length >= 2) {
      const [x0, y0] = toGrid(d.points[0]);
      const [x1, y1] = toGrid(d.points[d.points.length - 1]);
      d.ghost.setAttribute("x", String(Math.min(x0, x1)));
      d.ghost.setAttribute("y", String(Math.min(y0, y1)));
      d.ghost.setAttribute("width", String(Math.abs(x1 - x0)));
      d.ghost.setAttribute("height", String(Math.abs(y1 - y0)));
    } else if (d.tool === "lasso") {
      d.ghost.setAttribute(
        "points",
        d.points.map((pt) => toGrid(pt).map((v) => v.toFixed(3)).join(",")).join(" "),
      );
    }
  }
}
