import { basename } from "node:path";
import { readCsv, numericColumns, Row } from "./csv.js";
import { movingAverage } from "./smooth.js";

export type ChartKind = "chain-rho" | "chain-posterior" | "learnability";

export interface PlotSpec {
  inputs: string[];
  kind: ChartKind;
  window: number; // odd integer >= 1, centered moving average (chain kinds)
  out: string;
  title?: string;
}

export interface Series {
  label: string;
  x: number[];
  y: number[]; // smoothed (chain kinds) or mean (learnability)
  raw?: number[]; // unsmoothed values, drawn as points (chain kinds)
  band?: number[]; // +/- half-height of the shaded band (learnability)
}

const CHAIN_COLUMN: Record<string, string> = {
  "chain-rho": "rho",
  "chain-posterior": "p_high_comp",
};

const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

function seriesLabel(path: string): string {
  return basename(path).replace(/\.csv$/, "");
}

function chainSeries(path: string, rows: Row[], kind: ChartKind, window: number): Series {
  const col = CHAIN_COLUMN[kind];
  const cols = numericColumns(rows, ["generation", col]);
  // degenerate generations have an empty rho cell; drop them from the line
  const keep = cols[col].map((v) => !Number.isNaN(v));
  const x = cols.generation.filter((_, i) => keep[i]);
  const raw = cols[col].filter((_, i) => keep[i]);
  return { label: seriesLabel(path), x, raw, y: movingAverage(raw, window) };
}

function learnabilitySeries(path: string, rows: Row[]): Series {
  const cols = numericColumns(rows, ["iteration", "mean", "std"]);
  return { label: seriesLabel(path), x: cols.iteration, y: cols.mean, band: cols.std };
}

export function extractSeries(spec: PlotSpec): Series[] {
  if (spec.inputs.length === 0) throw new Error("no input CSVs given");
  return spec.inputs.map((path) => {
    const rows = readCsv(path);
    return spec.kind === "learnability"
      ? learnabilitySeries(path, rows)
      : chainSeries(path, rows, spec.kind, spec.window);
  });
}

// --- SVG assembly ---------------------------------------------------------

const W = 720;
const H = 440;
const M = { left: 64, right: 24, top: 36, bottom: 48 };

function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (Number.isNaN(v)) continue;
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (lo === Infinity) throw new Error("no finite data to plot");
  if (lo === hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  return [lo, hi];
}

function ticks(lo: number, hi: number, n = 6): number[] {
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / n)));
  const err = span / n / step;
  const mult = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1;
  const s = step * mult;
  const out: number[] = [];
  for (let t = Math.ceil(lo / s) * s; t <= hi + 1e-12; t += s) out.push(Number(t.toFixed(10)));
  return out;
}

function fmt(v: number): string {
  return Number.isInteger(v) ? String(v) : String(Number(v.toFixed(6)));
}

const Y_LABEL: Record<ChartKind, string> = {
  "chain-rho": "topological similarity",
  "chain-posterior": "high-compositionality posterior",
  learnability: "accuracy",
};

const X_LABEL: Record<ChartKind, string> = {
  "chain-rho": "generation",
  "chain-posterior": "generation",
  learnability: "iteration",
};

export function renderSvg(spec: PlotSpec, series: Series[]): string {
  const xs = series.flatMap((s) => s.x);
  const ys = series.flatMap((s) =>
    s.band ? s.y.flatMap((v, i) => [v - s.band![i], v + s.band![i]]) : (s.raw ?? s.y),
  );
  const [x0, x1] = extent(xs);
  const [y0, y1] = extent(ys.concat(series.flatMap((s) => s.y)));
  const sx = (v: number) => M.left + ((v - x0) / (x1 - x0)) * (W - M.left - M.right);
  const sy = (v: number) => H - M.bottom - ((v - y0) / (y1 - y0)) * (H - M.top - M.bottom);

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" viewBox="0 0 ${W} ${H}">`,
    `<rect width="${W}" height="${H}" fill="white"/>`,
  );
  for (const t of ticks(y0, y1)) {
    const y = sy(t);
    parts.push(
      `<line x1="${M.left}" y1="${y.toFixed(2)}" x2="${W - M.right}" y2="${y.toFixed(2)}" stroke="#ddd"/>`,
      `<text x="${M.left - 8}" y="${(y + 4).toFixed(2)}" text-anchor="end" font-size="12">${fmt(t)}</text>`,
    );
  }
  for (const t of ticks(x0, x1)) {
    const x = sx(t);
    parts.push(
      `<line x1="${x.toFixed(2)}" y1="${H - M.bottom}" x2="${x.toFixed(2)}" y2="${H - M.bottom + 5}" stroke="#333"/>`,
      `<text x="${x.toFixed(2)}" y="${H - M.bottom + 20}" text-anchor="middle" font-size="12">${fmt(t)}</text>`,
    );
  }
  parts.push(
    `<line x1="${M.left}" y1="${H - M.bottom}" x2="${W - M.right}" y2="${H - M.bottom}" stroke="#333"/>`,
    `<line x1="${M.left}" y1="${M.top}" x2="${M.left}" y2="${H - M.bottom}" stroke="#333"/>`,
    `<text x="${(M.left + W - M.right) / 2}" y="${H - 10}" text-anchor="middle" font-size="13">${X_LABEL[spec.kind]}</text>`,
    `<text x="16" y="${(M.top + H - M.bottom) / 2}" text-anchor="middle" font-size="13" transform="rotate(-90 16 ${(M.top + H - M.bottom) / 2})">${Y_LABEL[spec.kind]}</text>`,
  );
  if (spec.title) {
    parts.push(`<text x="${W / 2}" y="22" text-anchor="middle" font-size="15">${spec.title}</text>`);
  }

  series.forEach((s, si) => {
    const color = PALETTE[si % PALETTE.length];
    if (s.band) {
      const upper = s.x.map((v, i) => `${sx(v).toFixed(2)},${sy(s.y[i] + s.band![i]).toFixed(2)}`);
      const lower = s.x
        .map((v, i) => `${sx(v).toFixed(2)},${sy(s.y[i] - s.band![i]).toFixed(2)}`)
        .reverse();
      parts.push(
        `<polygon points="${upper.concat(lower).join(" ")}" fill="${color}" fill-opacity="0.18" class="band"/>`,
      );
    }
    const pts = s.x.map((v, i) => `${sx(v).toFixed(2)},${sy(s.y[i]).toFixed(2)}`);
    parts.push(
      `<polyline points="${pts.join(" ")}" fill="none" stroke="${color}" stroke-width="1.8" class="line"/>`,
    );
    if (s.raw) {
      for (let i = 0; i < s.x.length; i++) {
        parts.push(
          `<circle cx="${sx(s.x[i]).toFixed(2)}" cy="${sy(s.raw[i]).toFixed(2)}" r="2.6" fill="${color}" class="raw"/>`,
        );
      }
    }
    parts.push(
      `<text x="${W - M.right - 6}" y="${M.top + 16 * si + 4}" text-anchor="end" font-size="12" fill="${color}">${s.label}</text>`,
    );
  });
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}

export function render(spec: PlotSpec): string {
  return renderSvg(spec, extractSeries(spec));
}
