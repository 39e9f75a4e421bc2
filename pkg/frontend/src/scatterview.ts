import { clear, el, errorBox, fmt, svgEl } from "./dom.js";
import { sequentialColor } from "./palette.js";
import type { ScatterPayload, SelectionGeometry, Tool } from "./types.js";

export interface ScatterViewProps {
  payload: ScatterPayload | null;
  error: string | null;
  highlight: Set<number>;
  tool: Tool;
}

export interface ScatterSelectHandler {
  (tool: Tool, geometry: SelectionGeometry): void;
}

const SIZE = 420;
const MARGIN = 34;
const R = 3.2;
const R_SELECTED = 5.2;

interface DragState {
  tool: "rect" | "lasso";
  points: [number, number][];
  ghost: SVGElement;
}

/**
 * Association scatterplot: each region is a point at (standardized
 * volume, standardized neighbour lag), colored by standardized error.
 * The regression line through the cloud has the global association
 * index as its slope; its r and p are printed above the plot.
 * Selected points turn blue and grow.  Selection geometry is sent in
 * z-plane coordinates, matching what the resolver expects.
 */
export class ScatterView {
  private readonly root: HTMLElement;
  private readonly onSelect: ScatterSelectHandler;
  private payload: ScatterPayload | null = null;
  private tool: Tool = "point";
  private svg: SVGSVGElement | null = null;
  private pointNodes = new Map<number, SVGCircleElement>();
  private drag: DragState | null = null;
  private domain = 1;

  constructor(root: HTMLElement, onSelect: ScatterSelectHandler) {
    this.root = root;
    this.onSelect = onSelect;
  }

  render(props: ScatterViewProps): void {
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
      this.root.appendChild(el("div", { class: "placeholder" }, "loading scatter"));
      return;
    }
    if (props.payload !== this.payload) {
      this.payload = props.payload;
      this.build(props.payload);
    }
    this.applyHighlight(props.highlight);
  }

  selectPoint(zx: number, zy: number): void {
    this.onSelect("point", { x: zx, y: zy });
  }

  selectRect(x0: number, y0: number, x1: number, y1: number): void {
    this.onSelect("rect", { x0, y0, x1, y1 });
  }

  selectLasso(points: [number, number][]): void {
    this.onSelect("lasso", { points });
  }

  private toPx(z: number): number {
    return MARGIN + ((z + this.domain) / (2 * this.domain)) * (SIZE - 2 * MARGIN);
  }

  private toPxY(z: number): number {
    // svg y grows downward
    return SIZE - this.toPx(z);
  }

  private build(p: ScatterPayload): void {
    clear(this.root);
    this.pointNodes = new Map();

    if (p.points.length === 0) {
      this.svg = null;
      this.root.appendChild(el("div", { class: "placeholder" }, "no regions with defined association"));
      return;
    }

    let m = 0;
    for (const pt of p.points) {
      m = Math.max(m, Math.abs(pt.z_value), Math.abs(pt.z_lag));
    }
    this.domain = m > 0 ? m * 1.05 : 1;

    const errs = p.points.map((pt) => pt.z_error).filter((e): e is number => e !== null);
    const eLo = errs.length ? Math.min(...errs) : 0;
    const eHi = errs.length ? Math.max(...errs) : 1;
    const eSpan = eHi > eLo ? eHi - eLo : 1;

    const head = el("div", { class: "scatter-stats" });
    head.textContent =
      `I = ${fmt(p.moran.global_i)}   r = ${fmt(p.moran.pearson_r)}   ` +
      (p.moran.p_value < 0.001 ? "p < 0.001" : `p = ${fmt(p.moran.p_value)}`);
    this.root.appendChild(head);

    const svg = svgEl("svg", { class: "scatter-canvas", viewBox: `0 0 ${SIZE} ${SIZE}` });
    svg.appendChild(
      svgEl("line", {
        x1: this.toPx(-this.domain), y1: this.toPxY(0),
        x2: this.toPx(this.domain), y2: this.toPxY(0),
        class: "axis",
      }),
    );
    svg.appendChild(
      svgEl("line", {
        x1: this.toPx(0), y1: this.toPxY(-this.domain),
        x2: this.toPx(0), y2: this.toPxY(this.domain),
        class: "axis",
      }),
    );
    const xLab = svgEl("text", { x: SIZE - MARGIN, y: this.toPxY(0) - 6, class: "axis-label", "text-anchor": "end" });
    xLab.textContent = "z volume, region";
    svg.appendChild(xLab);
    const yLab = svgEl("text", { x: this.toPx(0) + 6, y: MARGIN + 4, class: "axis-label" });
    yLab.textContent = "z volume, local tract";
    svg.appendChild(yLab);

    const { regression_slope: a, intercept: b } = p.moran;
    svg.appendChild(
      svgEl("line", {
        x1: this.toPx(-this.domain), y1: this.toPxY(a * -this.domain + b),
        x2: this.toPx(this.domain), y2: this.toPxY(a * this.domain + b),
        class: "regression",
      }),
    );

    for (const pt of p.points) {
      const fill = pt.z_error === null ? "#b7b7b7" : sequentialColor((pt.z_error - eLo) / eSpan);
      const node = svgEl("circle", {
        cx: this.toPx(pt.z_value),
        cy: this.toPxY(pt.z_lag),
        r: R,
        fill,
        class: "pt",
        "data-region": pt.region_id,
        "data-zx": pt.z_value,
        "data-zy": pt.z_lag,
      });
      const tip = svgEl("title");
      tip.textContent = `region ${pt.region_id}\nlisa ${fmt(pt.lisa)}`;
      node.appendChild(tip);
      svg.appendChild(node);
      this.pointNodes.set(pt.region_id, node);
    }

    svg.addEventListener("click", (ev) => this.onClick(ev));
    svg.addEventListener("pointerdown", (ev) => this.onPointerDown(ev));
    svg.addEventListener("pointermove", (ev) => this.onPointerMove(ev));
    svg.addEventListener("pointerup", (ev) => this.onPointerUp(ev));
    this.svg = svg;
    this.root.appendChild(svg);
  }

  private applyHighlight(ids: Set<number>): void {
    for (const [region, node] of this.pointNodes) {
      const on = ids.has(region);
      node.setAttribute("class", on ? "pt sel" : "pt");
      node.setAttribute("r", String(on ? R_SELECTED : R));
    }
  }

  private onClick(ev: MouseEvent): void {
    if (this.tool !== "point") return;
    const target = ev.target as Element | null;
    const zx = target?.getAttribute?.("data-zx");
    const zy = target?.getAttribute?.("data-zy");
    if (zx === null || zx === undefined || zy === null || zy === undefined) return;
    this.selectPoint(Number(zx), Number(zy));
  }

  /** Pointer position in z coordinates, or null without a layout box. */
  private eventZ(ev: PointerEvent): [number, number] | null {
    if (this.svg === null) return null;
    const box = this.svg.getBoundingClientRect();
    if (!(box.width > 0) || !(box.height > 0)) return null;
    const px = ((ev.clientX - box.left) / box.width) * SIZE;
    const py = ((ev.clientY - box.top) / box.height) * SIZE;
    const z = (v: number) => ((v - MARGIN) / (SIZE - 2 * MARGIN)) * 2 * this.domain - this.domain;
    return [z(px), -z(py)];
  }

  private onPointerDown(ev: PointerEvent): void {
    if (this.tool === "point" || this.svg === null) return;
    const at = this.eventZ(ev);
    if (at === null) return;
    const ghost = svgEl(this.tool === "rect" ? "rect" : "polyline", { class: "rubber-band" });
    this.svg.appendChild(ghost);
    this.drag = { tool: this.tool, points: [at], ghost };
  }

  private onPointerMove(ev: PointerEvent): void {
    if (this.drag === null) return;
    const at = this.eventZ(ev);
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
    const at = this.eventZ(ev);
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
    if (d === null) return;
    if (d.tool === "rect" && d.points.length >= 2) {
      const [zx0, zy0] = d.points[0];
      const [zx1, zy1] = d.points[d.points.length - 1];
      const x = Math.min(this.toPx(zx0), this.toPx(zx1));
      const y = Math.min(this.toPxY(zy0), this.toPxY(zy1));
      d.ghost.setAttribute("x", String(x));
      d.ghost.setAttribute("y", String(y));
      d.ghost.setAttribute("width", String(Math.abs(this.toPx(zx1) - this.toPx(zx0))));
      d.ghost.setAttribute("height", String(Math.abs(this.toPxY(zy1) - this.toPxY(zy0))));
    } else if (d.tool === "lasso") {
      d.ghost.setAttribute(
        "points",
        d.points.map(([zx, zy]) => `${this.toPx(zx).toFixed(2)},${this.toPxY(zy).toFixed(2)}`).join(" "),
      );
    }
  }
}
