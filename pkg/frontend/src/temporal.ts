import { clear, el, fmt, svgEl } from "./dom.js";
import { vsupColor } from "./palette.js";
import type { OverlayState } from "./state.js";
import type { Scale, Shape, TemporalPayload } from "./types.js";

export interface OverlayCallbacks {
  load(shape: Shape, scale: Scale, region: number): Promise<TemporalPayload>;
  onMove(key: string, x: number, y: number): void;
  onClose(key: string): void;
}

interface OverlayBox {
  box: HTMLElement;
  body: HTMLElement;
  filled: boolean;
}

/**
 * Draggable per-region heatmaps floating over the map: one row per test
 * day, one column per half-hour slot, colored with the same value/error
 * table as the map so the two read together.  Several can be open at
 * once; dragging the title bar repositions an overlay so comparisons
 * stay legible.
 */
export class TemporalOverlays {
  private readonly layer: HTMLElement;
  private readonly cb: OverlayCallbacks;
  private readonly boxes = new Map<string, OverlayBox>();

  constructor(layer: HTMLElement, cb: OverlayCallbacks) {
    this.layer = layer;
    this.cb = cb;
  }

  render(overlays: OverlayState[]): void {
    const alive = new Set(overlays.map((o) => o.key));
    for (const [key, entry] of this.boxes) {
      if (!alive.has(key)) {
        entry.box.remove();
        this.boxes.delete(key);
      }
    }
    for (const o of overlays) {
      let entry = this.boxes.get(o.key);
      if (entry === undefined) {
        entry = this.create(o);
        this.boxes.set(o.key, entry);
        this.layer.appendChild(entry.box);
        void this.fill(o, entry);
      }
      entry.box.style.left = `${o.x}px`;
      entry.box.style.top = `${o.y}px`;
    }
  }

  private create(o: OverlayState): OverlayBox {
    const box = el("div", { class: "overlay", "data-overlay-key": o.key });
    const header = el("div", { class: "overlay-header" });
    header.appendChild(el("span", { class: "overlay-title" }, `region ${o.region}`));
    const close = el("button", { class: "overlay-close", type: "button" }, "x");
    close.addEventListener("click", () => this.cb.onClose(o.key));
    header.appendChild(close);
    header.addEventListener("pointerdown", (ev) => this.startDrag(ev, o.key, box));
    box.appendChild(header);
    const body = el("div", { class: "overlay-body" }, "loading");
    box.appendChild(body);
    return { box, body, filled: false };
  }

  private async fill(o: OverlayState, entry: OverlayBox): Promise<void> {
    let payload: TemporalPayload;
    try {
      payload = await this.cb.load(o.shape, o.scale, o.region);
    } catch (err) {
      if (this.boxes.get(o.key) === entry) {
        entry.body.textContent = `failed: ${err instanceof Error ? err.message : String(err)}`;
      }
      return;
    }
    if (this.boxes.get(o.key) !== entry || entry.filled) return;
    entry.filled = true;
    clear(entry.body);
    entry.body.appendChild(heatmapSvg(payload));
  }

  private startDrag(ev: PointerEvent, key: string, box: HTMLElement): void {
    if ((ev.target as Element).tagName === "BUTTON") return;
    ev.preventDefault();
    const startX = ev.clientX;
    const startY = ev.clientY;
    const baseX = parseFloat(box.style.left || "0");
    const baseY = parseFloat(box.style.top || "0");
    const doc = box.ownerDocument;
    const onMove = (mv: PointerEvent) => {
      this.cb.onMove(key, baseX + (mv.clientX - startX), baseY + (mv.clientY - startY));
    };
    const onUp = () => {
      doc.removeEventListener("pointermove", onMove);
      doc.removeEventListener("pointerup", onUp);
    };
    doc.addEventListener("pointermove", onMove);
    doc.addEventListener("pointerup", onUp);
  }
}

export function heatmapSvg(p: TemporalPayload): SVGSVGElement {
  const svg = svgEl("svg", {
    class: "temporal-heatmap",
    viewBox: `0 0 ${p.slots} ${p.days}`,
    width: p.slots * 6,
    height: p.days * 6,
  });
  p.cells.forEach((row, day) => {
    row.forEach((cell, slot) => {
      const rect = svgEl("rect", {
        x: slot,
        y: day,
        width: 1,
        height: 1,
        fill: vsupColor(cell.level, cell.bin),
        "data-day": day,
        "data-slot": slot,
      });
      const tip = svgEl("title");
      tip.textContent =
        `day ${day + 1}, slot ${slot}\n` +
        `volume ${fmt(cell.volume, 1)}\nabs error ${fmt(cell.error, 2)}`;
      rect.appendChild(tip);
      svg.appendChild(rect);
    });
  });
  return svg;
}
