/**
 * Per-view rendering contracts, exercised directly against each view
 * class with fixture payloads: fills come from the shared lookup tables,
 * geometry is a pure function of the payload, and gesture entry points
 * emit the geometry the resolver expects.
 */
import { describe, expect, it, vi } from "vitest";
import { AttributionView } from "../src/attributionview.js";
import { MapView } from "../src/mapview.js";
import { vsupColor } from "../src/palette.js";
import { ScatterView } from "../src/scatterview.js";
import { TemporalOverlays } from "../src/temporal.js";
import type { OverlayState } from "../src/state.js";
import type { Scale, Shape } from "../src/types.js";
import { SCALES } from "../src/types.js";
import { BBOX, makeAttribution, makeAttributionShallow, makeMap, makeScatter, makeTemporal, settle } from "./fixtures.js";

function host(): HTMLElement {
  const node = document.createElement("div");
  document.body.appendChild(node);
  return node;
}

function emptyHighlight(): Map<Scale, Set<number>> {
  return new Map(SCALES.map((s) => [s, new Set<number>()]));
}

describe("map view", () => {
  it("fills each cell from the value/error lookup table", () => {
    const root = host();
    const view = new MapView(root, () => {});
    view.render({ payload: makeMap(), error: null, highlight: new Set(), tool: "point" });

    const fillOf = (region: number) =>
      root.querySelector(`rect[data-region="${region}"]`)!.getAttribute("fill");
    expect(fillOf(0)).toBe(vsupColor(0, 7));
    expect(fillOf(1)).toBe(vsupColor(1, 3));
    expect(fillOf(7)).toBe(vsupColor(3, 0));
    // both level-3 cells collapse into the same merged bin
    expect(fillOf(52)).toBe(fillOf(7));
  });

  it("places cells bottom-up: iy 0 lands on the last svg row", () => {
    const root = host();
    const view = new MapView(root, () => {});
    const p = makeMap();
    view.render({ payload: p, error: null, highlight: new Set(), tool: "point" });

    const cell0 = root.querySelector('rect[data-region="0"]')!;
    expect(cell0.getAttribute("x")).toBe("0");
    expect(cell0.getAttribute("y")).toBe(String(p.h - 1));
    const cell52 = root.querySelector('rect[data-region="52"]')!; // ix 2, iy 1
    expect(cell52.getAttribute("x")).toBe("2");
    expect(cell52.getAttribute("y")).toBe(String(p.h - 2));
  });

  it("shows the error text instead of a map when the fetch failed", () => {
    const root = host();
    const view = new MapView(root, () => {});
    view.render({ payload: null, error: "combo not built", highlight: new Set(), tool: "point" });
    expect(root.querySelector(".error-box")!.textContent).toContain("combo not built");
    expect(root.querySelector("svg")).toBeNull();
  });

  it("emits the clicked cell's lon/lat center under the point tool", () => {
    const root = host();
    const onSelect = vi.fn();
    const view = new MapView(root, onSelect);
    view.render({ payload: makeMap(), error: null, highlight: new Set(), tool: "point" });

    root
      .querySelector('rect[data-region="1"]')!
      .dispatchEvent(new MouseEvent("click", { bubbles: true }));
    expect(onSelect).toHaveBeenCalledTimes(1);
    const [tool, geometry] = onSelect.mock.calls[0];
    expect(tool).toBe("point");
    expect(geometry.x).toBeCloseTo(BBOX.lon_min + (1.5 / 50) * (BBOX.lon_max - BBOX.lon_min), 9);
    expect(geometry.y).toBeCloseTo(BBOX.lat_min + (0.5 / 25) * (BBOX.lat_max - BBOX.lat_min), 9);
  });

  it("keeps the same nodes across highlight-only re-renders", () => {
    const root = host();
    const view = new MapView(root, () => {});
    const p = makeMap();
    view.render({ payload: p, error: null, highlight: new Set(), tool: "point" });
    const before = root.querySelector('rect[data-region="7"]')!;
    view.render({ payload: p, error: null, highlight: new Set([7]), tool: "point" });
    const after = root.querySelector('rect[data-region="7"]')!;
    expect(after).toBe(before);
    expect(after.getAttribute("class")).toBe("cell sel");
  });

  it("captions the legend with the payload's scaling constants", () => {
    const root = host();
    const view = new MapView(root, () => {});
    view.render({ payload: makeMap(), error: null, highlight: new Set(), tool: "point" });
    const caption = root.querySelector(".legend-caption")!.textContent!;
    expect(caption).toContain("1000.0");
    expect(caption).toContain("4.00");
    expect(root.querySelectorAll(".legend-sector")).toHaveLength(15);
  });
});

describe("scatter view", () => {
  it("prints the association stats above the cloud", () => {
    const root = host();
    const view = new ScatterView(root, () => {});
    view.render({ payload: makeScatter(), error: null, highlight: new Set(), tool: "point" });
    const stats = root.querySelector(".scatter-stats")!.textContent!;
    expect(stats).toContain("I = 0.420");
    expect(stats).toContain("r = 0.790");
    expect(stats).toContain("p < 0.001");
    expect(root.querySelector(".regression")).not.toBeNull();
  });

  it("greys out points without a standardized error", () => {
    const root = host();
    const view = new ScatterView(root, () => {});
    view.render({ payload: makeScatter(), error: null, highlight: new Set(), tool: "point" });
    expect(root.querySelector('circle[data-region="52"]')!.getAttribute("fill")).toBe("#b7b7b7");
    expect(root.querySelector('circle[data-region="0"]')!.getAttribute("fill")).not.toBe("#b7b7b7");
  });

  it("falls back to a placeholder when no region has a defined value", () => {
    const root = host();
    const view = new ScatterView(root, () => {});
    const empty = { ...makeScatter(), points: [] };
    view.render({ payload: empty, error: null, highlight: new Set(), tool: "point" });
    expect(root.querySelector(".placeholder")!.textContent).toContain("no regions");
    expect(root.querySelector("circle")).toBeNull();
  });

  it("grows selected points and restores them on deselect", () => {
    const root = host();
    const view = new ScatterView(root, () => {});
    const p = makeScatter();
    view.render({ payload: p, error: null, highlight: new Set([7]), tool: "point" });
    const pt = root.querySelector('circle[data-region="7"]')!;
    expect(pt.getAttribute("class")).toBe("pt sel");
    const grown = Number(pt.getAttribute("r"));
    view.render({ payload: p, error: null, highlight: new Set(), tool: "point" });
    expect(pt.getAttribute("class")).toBe("pt");
    expect(Number(pt.getAttribute("r"))).toBeLessThan(grown);
  });

  it("forwards a point click in z coordinates", () => {
    const root = host();
    const onSelect = vi.fn();
    const view = new ScatterView(root, onSelect);
    view.render({ payload: makeScatter(), error: null, highlight: new Set(), tool: "point" });
    root
      .querySelector('circle[data-region="1"]')!
      .dispatchEvent(new MouseEvent("click", { bubbles: true }));
    expect(onSelect).toHaveBeenCalledWith("point", { x: 1.1, y: 0.9 });
  });
});

describe("attribution view", () => {
  it("renders one row per built scale and notes the missing ones", () => {
    const root = host();
    const view = new AttributionView(root, () => {});
    view.render({
      payload: makeAttributionShallow(),
      error: null,
      highlight: emptyHighlight(),
      tool: "point",
    });
    expect(root.querySelectorAll(".attribution-row")).toHaveLength(1);
    const notice = root.querySelector(".notice-box")!.textContent!;
    expect(notice).toContain("100x50");
    expect(notice).toContain("200x100");
  });

  it("separates sibling subsets with boundary lines", () => {
    const root = host();
    const view = new AttributionView(root, () => {});
    view.render({
      payload: makeAttribution(),
      error: null,
      highlight: emptyHighlight(),
      tool: "point",
    });
    // one line per plot after the first in its row: 3 + 15
    expect(root.querySelectorAll('[data-scale="100x50"] .subset-boundary')).toHaveLength(3);
    expect(root.querySelectorAll('[data-scale="200x100"] .subset-boundary')).toHaveLength(15);
  });

  it("recoloring under a new metric keeps every dot in place", () => {
    const root = host();
    const view = new AttributionView(root, () => {});
    const before = makeAttribution();
    view.render({ payload: before, error: null, highlight: emptyHighlight(), tool: "point" });
    const shape = () =>
      Array.from(root.querySelectorAll("circle"), (c) =>
        ["cx", "cy", "r"].map((a) => c.getAttribute(a)).join(","),
      );
    const fills = () => Array.from(root.querySelectorAll("circle"), (c) => c.getAttribute("fill"));
    const shapeBefore = shape();
    const fillsBefore = fills();

    const after = makeAttribution();
    after.color_metric = "corr";
    for (const plot of after.plots) {
      for (const d of plot.dots) {
        if (d.color_value !== null) d.color_value = 1 - d.color_value;
      }
    }
    view.render({ payload: after, error: null, highlight: emptyHighlight(), tool: "point" });
    expect(shape()).toEqual(shapeBefore);
    expect(fills()).not.toEqual(fillsBefore);
  });

  it("forwards a dot click with its plot address and local coordinates", () => {
    const root = host();
    const onSelect = vi.fn();
    const view = new AttributionView(root, onSelect);
    view.render({
      payload: makeAttribution(),
      error: null,
      highlight: emptyHighlight(),
      tool: "point",
    });
    root
      .querySelector('circle[data-region="52"][data-scale="50x25"]')!
      .dispatchEvent(new MouseEvent("click", { bubbles: true }));
    expect(onSelect).toHaveBeenCalledWith(
      "point",
      { scale: "50x25", subset_index: 0 },
      { x: 10.5, y: 4 },
    );
  });

  it("ignores clicks while a drag tool is armed", () => {
    const root = host();
    const onSelect = vi.fn();
    const view = new AttributionView(root, onSelect);
    view.render({
      payload: makeAttribution(),
      error: null,
      highlight: emptyHighlight(),
      tool: "lasso",
    });
    root
      .querySelector('circle[data-region="52"][data-scale="50x25"]')!
      .dispatchEvent(new MouseEvent("click", { bubbles: true }));
    expect(onSelect).not.toHaveBeenCalled();
  });
});

describe("temporal overlays", () => {
  const Pointer: typeof MouseEvent =
    typeof PointerEvent === "undefined" ? MouseEvent : PointerEvent;

  function overlay(region: number, x = 40, y = 24): OverlayState {
    return { key: `grid|50x25|${region}`, shape: "grid", scale: "50x25", region, x, y };
  }

  function mounted() {
    const layer = host();
    const load = vi.fn((shape: Shape, scale: Scale, region: number) => {
      void shape;
      void scale;
      return Promise.resolve(makeTemporal(region));
    });
    const onMove = vi.fn();
    const onClose = vi.fn();
    const overlays = new TemporalOverlays(layer, { load, onMove, onClose });
    return { layer, load, onMove, onClose, overlays };
  }

  it("titles the box by region and fills it with a day-by-slot heatmap", async () => {
    const { layer, load, overlays } = mounted();
    overlays.render([overlay(9)]);
    expect(layer.querySelector(".overlay-title")!.textContent).toBe("region 9");
    expect(layer.querySelector(".overlay-body")!.textContent).toBe("loading");
    await settle();
    expect(load).toHaveBeenCalledWith("grid", "50x25", 9);
    expect(layer.querySelectorAll(".temporal-heatmap rect")).toHaveLength(7 * 48);
  });

  it("positions boxes from state and moves them with the drag callback", async () => {
    const { layer, onMove, overlays } = mounted();
    overlays.render([overlay(9, 40, 24)]);
    await settle();
    const box = layer.querySelector<HTMLElement>(".overlay")!;
    expect(box.style.left).toBe("40px");

    const header = box.querySelector<HTMLElement>(".overlay-header")!;
    header.dispatchEvent(
      new Pointer("pointerdown", { bubbles: true, cancelable: true, clientX: 100, clientY: 60 }),
    );
    document.dispatchEvent(new Pointer("pointermove", { clientX: 130, clientY: 75 }));
    expect(onMove).toHaveBeenCalledWith("grid|50x25|9", 70, 39);

    document.dispatchEvent(new Pointer("pointerup", {}));
    document.dispatchEvent(new Pointer("pointermove", { clientX: 200, clientY: 200 }));
    expect(onMove).toHaveBeenCalledTimes(1);
  });

  it("reports the close button and drops boxes absent from state", async () => {
    const { layer, onClose, overlays } = mounted();
    overlays.render([overlay(9), overlay(12, 64, 48)]);
    await settle();
    expect(layer.querySelectorAll(".overlay")).toHaveLength(2);

    layer.querySelector<HTMLButtonElement>(".overlay-close")!.click();
    expect(onClose).toHaveBeenCalledWith("grid|50x25|9");

    overlays.render([overlay(12, 64, 48)]);
    expect(layer.querySelectorAll(".overlay")).toHaveLength(1);
    expect(layer.querySelector(".overlay-title")!.textContent).toBe("region 12");
  });
});
