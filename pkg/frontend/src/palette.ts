/**
 * Bivariate value/error colors.  Eight value bins at error level 0; each
 * level up merges neighbouring bins pairwise (bin = leaf >> level) and
 * pulls the merged color toward a light neutral, so the least reliable
 * cells converge on a single muted hue.  The full table is generated once
 * at module load and indexed as VSUP_TABLE[level][bin].
 */

export const VALUE_BINS = 8;
export const ERROR_LEVELS = 4;

export function binsAtLevel(level: number): number {
  if (level < 0 || level >= ERROR_LEVELS) {
    throw new RangeError(`error level ${level} outside [0, ${ERROR_LEVELS})`);
  }
  return VALUE_BINS >> level;
}

type Rgb = [number, number, number];

function hexToRgb(hex: string): Rgb {
  const h = hex.replace("#", "");
  return [
    parseInt(h.slice(0, 2), 16),
    parseInt(h.slice(2, 4), 16),
    parseInt(h.slice(4, 6), 16),
  ];
}

function rgbToHex([r, g, b]: Rgb): string {
  const c = (v: number) => Math.round(Math.min(255, Math.max(0, v))).toString(16).padStart(2, "0");
  return `#${c(r)}${c(g)}${c(b)}`;
}

function mix(a: Rgb, b: Rgb, t: number): Rgb {
  return [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t];
}

function mean(colors: Rgb[]): Rgb {
  const sum: Rgb = [0, 0, 0];
  for (const c of colors) {
    sum[0] += c[0];
    sum[1] += c[1];
    sum[2] += c[2];
  }
  return [sum[0] / colors.length, sum[1] / colors.length, sum[2] / colors.length];
}

/** Piecewise-linear ramp over [0, 1] through the given stops. */
function ramp(stops: Rgb[], t: number): Rgb {
  const x = Math.min(1, Math.max(0, t)) * (stops.length - 1);
  const i = Math.min(stops.length - 2, Math.floor(x));
  return mix(stops[i], stops[i + 1], x - i);
}

const LEAF_STOPS: Rgb[] = [hexToRgb("#f6f0c4"), hexToRgb("#e8863a"), hexToRgb("#5e2a52")];
const SUPPRESSED: Rgb = hexToRgb("#cfc9c0");

function buildTable(): string[][] {
  const leaves: Rgb[] = [];
  for (let b = 0; b < VALUE_BINS; b++) {
    leaves.push(ramp(LEAF_STOPS, b / (VALUE_BINS - 1)));
  }
  const table: string[][] = [];
  for (let level = 0; level < ERROR_LEVELS; level++) {
    const row: string[] = [];
    const span = 1 << level;
    const pull = (level / (ERROR_LEVELS - 1)) * 0.7;
    for (let bin = 0; bin < VALUE_BINS >> level; bin++) {
      const merged = mean(leaves.slice(bin * span, (bin + 1) * span));
      row.push(rgbToHex(mix(merged, SUPPRESSED, pull)));
    }
    table.push(row);
  }
  return table;
}

export const VSUP_TABLE: readonly (readonly string[])[] = buildTable();

export function vsupColor(level: number, bin: number): string {
  const row = VSUP_TABLE[level];
  if (row === undefined) throw new RangeError(`error level ${level} outside [0, ${ERROR_LEVELS})`);
  const color = row[bin];
  if (color === undefined) throw new RangeError(`bin ${bin} outside [0, ${row.length}) at level ${level}`);
  return color;
}

/** Sequential ramp for standardized error and metric coloring. */
export function sequentialColor(t: number): string {
  if (!Number.isFinite(t)) return "#b7b7b7";
  return rgbToHex(ramp(LEAF_STOPS, t));
}

/** Relative luminance in [0, 1]; used to keep ramps perceptually ordered. */
export function luminance(hex: string): number {
  const [r, g, b] = hexToRgb(hex).map((v) => {
    const s = v / 255;
    return s <= 0.03928 ? s / 12.92 : ((s + 0.055) / 1.055) ** 2.4;
  });
  return 0.2126 * r + 0.7152 * g + 0.0722 * b;
}

export interface LegendSector {
  level: number;
  bin: number;
  color: string;
  /** SVG path of the annular sector. */
  d: string;
}

function polar(cx: number, cy: number, r: number, angle: number): [number, number] {
  return [cx + r * Math.cos(angle), cy + r * Math.sin(angle)];
}

function sectorPath(
  cx: number,
  cy: number,
  rIn: number,
  rOut: number,
  a0: number,
  a1: number,
): string {
  const [x0, y0] = polar(cx, cy, rIn, a0);
  const [x1, y1] = polar(cx, cy, rOut, a0);
  const [x2, y2] = polar(cx, cy, rOut, a1);
  const [x3, y3] = polar(cx, cy, rIn, a1);
  const f = (v: number) => v.toFixed(3);
  return (
    `M ${f(x0)} ${f(y0)} L ${f(x1)} ${f(y1)} ` +
    `A ${f(rOut)} ${f(rOut)} 0 0 1 ${f(x2)} ${f(y2)} ` +
    `L ${f(x3)} ${f(y3)} ` +
    `A ${f(rIn)} ${f(rIn)} 0 0 0 ${f(x0)} ${f(y0)} Z`
  );
}

/**
 * Wedge-shaped legend geometry fanning upward from (cx, cy).  The apex
 * band is the top error level with its single merged bin; each band
 * outward doubles the sector count until the outer rim shows all eight
 * value bins.
 */
export function legendSectors(
  cx: number,
  cy: number,
  rApex: number,
  rOuter: number,
  spreadDeg = 100,
): LegendSector[] {
  const sectors: LegendSector[] = [];
  const step = (rOuter - rApex) / ERROR_LEVELS;
  const half = ((spreadDeg / 2) * Math.PI) / 180;
  const a0 = -Math.PI / 2 - half;
  const a1 = -Math.PI / 2 + half;
  for (let level = 0; level < ERROR_LEVELS; level++) {
    const rIn = rApex + (ERROR_LEVELS - 1 - level) * step;
    const rOut = rIn + step;
    const bins = binsAtLevel(level);
    for (let bin = 0; bin < bins; bin++) {
      const s0 = a0 + ((a1 - a0) * bin) / bins;
      const s1 = a0 + ((a1 - a0) * (bin + 1)) / bins;
      sectors.push({
        level,
        bin,
        color: vsupColor(level, bin),
        d: sectorPath(cx, cy, rIn, rOut, s0, s1),
      });
    }
  }
  return sectors;
}
