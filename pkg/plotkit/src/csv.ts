/**
 * Telemetry CSV parsing.
 *
 * Expected layout: a header row naming columns (t,mx,my,mz,f,g,e) followed
 * by numeric rows. Extra columns are tolerated; order is free.
 */

export interface Telemetry {
  columns: string[];
  /** column name -> values, all the same length */
  data: Map<string, Float64Array>;
  length: number;
}

export function parseTelemetry(text: string): Telemetry {
  const lines = text.split(/\r?\n/).filter((l) => l.trim().length > 0 && !l.startsWith("#"));
  if (lines.length === 0) {
    throw new Error("telemetry file is empty");
  }
  const columns = lines[0].split(",").map((c) => c.trim());
  if (columns.length < 2 || columns.some((c) => c === "" || /^[-+0-9.]/.test(c))) {
    throw new Error("telemetry file has no header row");
  }
  const rows = lines.slice(1);
  if (rows.length === 0) {
    throw new Error("telemetry file has a header but no data rows");
  }
  const cols = columns.map(() => new Float64Array(rows.length));
  rows.forEach((line, i) => {
    const parts = line.split(",");
    if (parts.length !== columns.length) {
      throw new Error(`row ${i + 2}: expected ${columns.length} fields, got ${parts.length}`);
    }
    for (let c = 0; c < columns.length; c += 1) {
      const v = Number(parts[c]);
      if (!Number.isFinite(v)) {
        throw new Error(`row ${i + 2}, column ${columns[c]}: not a finite number: ${parts[c]}`);
      }
      cols[c][i] = v;
    }
  });
  const data = new Map<string, Float64Array>();
  columns.forEach((name, c) => data.set(name, cols[c]));
  return { columns, data, length: rows.length };
}

export function requireColumns(tel: Telemetry, names: string[]): void {
  const missing = names.filter((n) => !tel.data.has(n));
  if (missing.length > 0) {
    throw new Error(`telemetry is missing required column(s): ${missing.join(", ")}`);
  }
}

export function column(tel: Telemetry, name: string): Float64Array {
  const col = tel.data.get(name);
  if (!col) throw new Error(`telemetry is missing column ${name}`);
  return col;
}
