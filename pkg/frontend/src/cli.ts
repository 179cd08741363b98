#!/usr/bin/env node
import { writeFileSync } from "node:fs";
import { render, ChartKind, PlotSpec } from "./chart.js";

const USAGE = `usage: bagselect-plot --kind chain-rho|chain-posterior|learnability \\
                      [--window N] [--title T] --out chart.svg input.csv [...]

Renders experiment CSVs as an SVG chart.
  chain-rho / chain-posterior  expect chain_seed*.csv (generation,rho,...)
  learnability                 expect learnability_*.csv (iteration,mean,std)
  --window                     odd moving-average window for chain kinds (default 3)`;

export function parseArgs(argv: string[]): PlotSpec {
  const inputs: string[] = [];
  let kind: ChartKind | undefined;
  let window = 3;
  let out = "";
  let title: string | undefined;
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i];
    if (a === "--kind") kind = argv[++i] as ChartKind;
    else if (a === "--window") window = Number(argv[++i]);
    else if (a === "--out") out = argv[++i];
    else if (a === "--title") title = argv[++i];
    else if (a === "--help" || a === "-h") throw new Error(USAGE);
    else if (a.startsWith("--")) throw new Error(`unknown flag ${a}\n${USAGE}`);
    else inputs.push(a);
  }
  if (!kind || !["chain-rho", "chain-posterior", "learnability"].includes(kind)) {
    throw new Error(`--kind is required (chain-rho | chain-posterior | learnability)\n${USAGE}`);
  }
  if (!out) throw new Error(`--out is required\n${USAGE}`);
  if (inputs.length === 0) throw new Error(`at least one input CSV is required\n${USAGE}`);
  return { inputs, kind, window, out, title };
}

export function main(argv: string[]): number {
  let spec: PlotSpec;
  try {
    spec = parseArgs(argv);
    writeFileSync(spec.out, render(spec));
  } catch (err) {
    console.error(err instanceof Error ? err.message : String(err));
    return 2;
  }
  console.log(`wrote ${spec.out}`);
  return 0;
}

if (process.argv[1] && /cli\.(ts|js)$/.test(process.argv[1])) {
  process.exit(main(process.argv.slice(2)));
}
