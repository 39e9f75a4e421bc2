import { clear, el, errorBox, fmt, noticeBox, svgEl } from "./dom.js";
import { sequentialColor } from "./palette.js";
import type { AttributionPayload, Plot, Scale, SelectionGeometry, Tool } from "./types.js";
import { SCALES } from "./types.js";

export interface AttributionViewProps {
  payload: AttributionPayload | null;
  error: string | null;
  highlight: ReadonlyMap<Scale, Set<number>>;
  tool: Tool;
}

export interface PlotRef {
  scale: Scale;
  subset_index: number;
}

export interface AttributionSelectHandler {
  (tool: Tool, plot: PlotRef, geometry: SelectionGeometry): void;
}

interface DotNode {
  scale: Scale;
  region: number;
  node: SVGCircleElement;
}

interface DragState {
  tool: "rect" | "lasso";
  plot: PlotRef;
  offsetX: number;
  svg: SVGSVGElement;
  box: DOMRect;
  rowWidth: number;
  rowHeight: number;
  points: [number, number][];
  ghost: SVGElement;
}

/**
 * The scale ladder as stacked dot-plot rows: one plot at the coarsest
 * scale, four beneath it, sixteen beneath those, each row splitting the
 * previous row's volume into quarters.  Dot size carries volume, dot
 * position carries error rank, and color carries the chosen metric on
 * one range shared by every row, so shades compare across scales.
 * Selections address a single plot and travel in its local coordinates.
 */
export class AttributionView {
  private readonly root: HTMLElement;
  private readonly onSelect: AttributionSelectHandler;
  private payload: AttributionPayload | null = null;
  private tool: Tool = "point";
  private dotNodes: DotNode[] = [];
  private drag: DragState | null = null;

  constructor(root: HTMLElement, onSelect: AttributionSelectHandler) {
    this.root = root;
    this.onSelect = onSelect;
  }

  render(props: AttributionViewProps): void {
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
      this.root.appendChild(el("div", { class: "placeholder" }, "loading attribution"));
      return;
    }
    if (props.payload !== this.payload) {
      this.payload = props.payload;
      this.build(props.payload);
    }
    this.applyHighlight(props.highlight);
  }

  selectDot(plot: PlotRef, x: number, y: number): void {
    this.onSelect("point", plot, { x, y });
  }

  selectRect(plot: PlotRef, x0: number, y0: number, x1: number, y1: number): void {
    this.onSelect("rect", plot, { x0, y0, x1, y1 });
  }

  selectLasso(plot: PlotRef, points: [number, number][]): void {
    this.onSelect("lasso", plot, { points });
  }

  private build(p: AttributionPayload): void {
    clear(this.root);
    this.dotNodes = [];

    let lo = Infinity;
    let hi = -Infinity;
    for (const plot of p.plots) {
      for (const d of plot.dots) {
        if (d.color_value !== null && Number.isFinite(d.color_value)) {
          lo = Math.min(lo, d.color_value);
          hi = Math.max(hi, d.color_value);
        }
      }
    }
    const span = hi > lo ? hi - lo : 1;
    const colorOf = (v: number | null): string =>
      v === null || !Number.isFinite(v) ? "#b7b7b7" : sequentialColor((v - lo) / span);

    const missing = SCALES.filter((s) => !p.scales.includes(s));
    if (missing.length > 0) {
      this.root.appendChild(noticeBox(`not built at ${missing.join(", ")}; showing available scales`));
    }

    for (const scale of p.scales) {
      const plots = p.plots
        .filter((pl) => pl.scale === scale)
        .sort((a, b) => a.subset_index - b.subset_index);
      if (plots.length === 0) continue;
      this.root.appendChild(this.buildRow(scale, plots, p.color_metric, colorOf));
    }
  }

  private buildRow(
    scale: Scale,
    plots: Plot[],
    metric: string,
    colorOf: (v: number | null) => string,
  ): HTMLElement {
    const row = el("div", { class: "attribution-row", "data-scale": scale });
    row.appendChild(el("div", { class: "row-label" }, scale));
    const totalW = plots.reduce((acc, pl) => acc + pl.W, 0);
    const height = Math.max(...plots.map((pl) => pl.H), 1);
    const svg = svgEl("svg", {
      class: "attribution-canvas",
      viewBox: `0 0 ${totalW || 1} ${height}`,
      "data-scale": scale,
    });

    let offset = 0;
    for (const plot of plots) {
      const ref: PlotRef = { scale, subset_index: plot.subset_index };
      const group = svgEl("g", {
        transform: `translate(${offset} 0)`,
        "data-scale": scale,
        "data-subset": plot.subset_index,
      });
      if (plot.subset_index > 0) {
        group.appendChild(
          svgEl("line", { x1: 0, y1: 0, x2: 0, y2: height, class: "subset-boundary" }),
        );
      }
      for (const d of plot.dots) {
        const node = svgEl("circle", {
          cx: d.x,
          cy: d.y,
          r: d.diameter / 2,
          fill: colorOf(d.color_value),
          class: "dot",
          "data-region": d.region_id,
          "data-scale": scale,
          "data-subset": plot.subset_index,
          "data-x": d.x,
          "data-y": d.y,
        });
        const tip = svgEl("title");
        tip.textContent =
          `region ${d.region_id}\n${metric} ${fmt(d.color_value)}\n` +
          `volume (dot diameter) ${fmt(d.diameter, 2)}`;
        node.appendChild(tip);
        group.appendChild(node);
        this.dotNodes.push({ scale, region: d.region_id, node });
      }
      const capture = { ref, offset };
      group.addEventListener("pointerdown", (ev) =>
        this.onPointerDown(ev, capture.ref, capture.offset, svg, totalW || 1, height),
      );
      svg.appendChild(group);
      offset += plot.W;
    }
    svg.addEventListener("click", (ev) => this.onClick(ev));
    svg.addEventListener("pointermove", (ev) => this.onPointerMove(ev));
    svg.addEventListener("pointerup", (ev) => this.onPointerUp(ev));
    row.appendChild(svg);
    return row;
  }

  private applyHighlight(highlight: ReadonlyMap<Scale, Set<number>>): void {
    for (const { scale, region, node } of this.dotNodes) {
      const on = highlight.get(scale)?.has(region) ?? false;
      node.setAttribute("class", on ? "dot sel" : "dot");
    }
  }

  private onClick(ev: MouseEvent): void {
    if (this.tool !== "point") return;
    const target = ev.target as Element | null;
    const region = target?.getAttribute?.("data-region");
    if (region === null || region === undefined) return;
    const scale = target!.getAttribute("data-scale") as Scale;
    const subset = Number(target!.getAttribute("data-subset"));
    const x = Number(target!.getAttribute("data-x"));
    const y = Number(target!.getAttribute("data-y"));
    this.selectDot({ scale, subset_index: subset }, x, y);
  }

  /** Pointer position in one plot's local coordinates. */
  private dragLocal(ev: PointerEvent, d: DragState): [number, number] | null {
    if (!(d.box.width > 0) || !(d.box.height > 0)) return null;
    const vx = ((ev.clientX - d.box.left) / d.box.width) * d.rowWidth;
    const vy = ((ev.clientY - d.box.top) / d.box.height) * d.rowHeight;
    return [vx - d.offsetX, vy];
  }

  private onPointerDown(
    ev: PointerEvent,
    plot: PlotRef,
    offsetX: number,
    svg: SVGSVGElement,
    rowWidth: number,
    rowHeight: number,
  ): void {
    if (this.tool === "point") return;
    const box = svg.getBoundingClientRect();
    const ghost = svgEl(this.tool === "rect" ? "rect" : "polyline", { class: "rubber-band" });
    svg.appendChild(ghost);
    const d: DragState = {
      tool: this.tool,
      plot,
      offsetX,
      svg,
      box,
      rowWidth,
      rowHeight,
      points: [],
      ghost,
    };
    const at = this.dragLocal(ev, d);
    if (at === null) {
      ghost.remove();
      return;
    }
    d.points.push(at);
    this.drag = d;
  }

  private onPointerMove(ev: PointerEvent): void {
    if (this.drag === null) return;
    const at = this.dragLocal(ev, this.drag);
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
    const d = this.drag;
    this.drag = null;
    const at = this.dragLocal(ev, d);
    d.ghost.remove();
    if (at !== null) d.points.push(at);
    if (d.tool === "rect" && d.points.length >= 2) {
      const last = d.points[d.points.length - 1];
      this.selectRect(d.plot, d.points[0][0], d.points[0][1], last[0], last[1]);
    } else if (d.tool === "lasso" && d.points.length >= 3) {
      this.selectLasso(d.plot, d.points);
    }
  }

  private paintGhost(): void {
    const d = this.drag;
    if (d === null) return;
    if (d.tool === "rect" && d.points.length >= 2) {
      const [x0, y0] = d.points[0];
      const [x1, y1] = d.points[d.points.length - 1];
      d.ghost.setAttribute("x", String(Math.min(x0, x1) + d.offsetX));
      d.ghost.setAttribute("y", String(Math.min(y0, y1)));
      d.ghost.setAttribute("width", String(Math.abs(x1 - x0)));
      d.ghost.setAttribute("height", String(Math.abs(y1 - y0)));
    } else if (d.tool === "lasso") {
      d.ghost.setAttribute(
        "points",
        d.points.map(([x, y]) => `${(x + d.offsetX).toFixed(2)},${y.toFixed(2)}`).join(" "),
      );
    }
  }
}
