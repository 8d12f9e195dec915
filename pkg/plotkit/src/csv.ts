/** Minimal CSV reading for the experiment artifact schemas. */

import { readFileSync } from "fs";

export interface Table {
  columns: string[];
  rows: Record<string, string>[];
}

export function parseCsv(text: string): Table {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) {
    return { columns: [], rows: [] };
  }
  const columns = lines[0].split(",");
  const rows = lines.slice(1).map((line) => {
    const parts = line.split(",");
    const row: Record<string, string> = {};
    columns.forEach((c, i) => (row[c] = parts[i] ?? ""));
    return row;
  });
  return { columns, rows };
}

/** Read a CSV and verify the schema, naming any missing column. */
export function readTable(path: string, required: string[]): Table {
  let text: string;
  try {
    text = readFileSync(path, "utf-8");
  } catch {
    throw new Error(`missing input file: ${path}`);
  }
  const table = parseCsv(text);
  for (const col of required) {
    if (!table.columns.includes(col)) {
      throw new Error(`schema mismatch in ${path}: missing column '${col}'`);
    }
  }
  return table;
}

export function num(row: Record<string, string>, col: string): number {
  const v = Number(row[col]);
  if (!Number.isFinite(v)) {
    throw new Error(`non-numeric value '${row[col]}' in column '${col}'`);
  }
  return v;
}
