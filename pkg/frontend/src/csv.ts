import { readFileSync } from "node:fs";

export type Row = Record<string, string>;

/** Parse a simple comma-separated file with a header row (the experiment
 *  runner never quotes or escapes values). */
export function parseCsv(text: string): Row[] {
  const lines = text.trim().split(/\r?\n/);
  if (lines.length < 1 || lines[0].trim() === "") {
    throw new Error("empty CSV");
  }
  const header = lines[0].split(",").map((h) => h.trim());
  return lines.slice(1).map((line, i) => {
    const cells = line.split(",");
    if (cells.length !== header.length) {
      throw new Error(`row ${i + 2}: expected ${header.length} cells, got ${cells.length}`);
    }
    const row: Row = {};
    header.forEach((h, j) => (row[h] = cells[j].trim()));
    return row;
  });
}

export function readCsv(path: string): Row[] {
  return parseCsv(readFileSync(path, "utf-8"));
}

/** Pull numeric columns out, verifying they exist first.  Empty cells become
 *  NaN so callers can decide how to treat gaps (e.g. degenerate rho). */
export function numericColumns(rows: Row[], names: string[]): Record<string, number[]> {
  if (rows.length === 0) throw new Error("CSV has no data rows");
  const missing = names.filter((n) => !(n in rows[0]));
  if (missing.length > 0) {
    throw new Error(
      `missing CSV columns: ${missing.join(", ")} (have: ${Object.keys(rows[0]).join(", ")})`,
    );
  }
  const out: Record<string, number[]> = {};
  for (const n of names) {
    out[n] = rows.map((r) => (r[n] === "" ? NaN : Number(r[n])));
  }
  return out;
}
