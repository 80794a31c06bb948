/**
 * Parser for the simulator's sweep CSV format.
 *
 * First line:   # memhop-sweep/1 kind=<kind> coords=<c1[,c2]> [key=value ...]
 * Second line:  <c1>[,<c2>],estimate,stderr[,extras...]
 * Data rows:    numbers, one row per grid point.
 */

export const SWEEP_FORMAT = "memhop-sweep/1";

export interface SweepRow {
  coords: number[];
  estimate: number;
  stderr: number;
  extras: Record<string, number>;
}

export interface SweepTable {
  kind: string;
  coordNames: string[];
  meta: Record<string, string>;
  rows: SweepRow[];
}

export class SchemaError extends Error {}

export function parseSweepCsv(text: string): SweepTable {
  const lines = text.split(/\r?\n/).filter((l) => l.trim().length > 0);
  if (lines.length === 0) {
    throw new SchemaError("empty file");
  }
  const header = lines[0];
  if (!header.startsWith("#")) {
    throw new SchemaError("missing format header line");
  }
  const tokens = header.replace(/^#\s*/, "").split(/\s+/);
  if (tokens[0] !== SWEEP_FORMAT) {
    throw new SchemaError(
      `unsupported format ${JSON.stringify(tokens[0])}; expected ${SWEEP_FORMAT}`,
    );
  }
  const meta: Record<string, string> = {};
  for (const tok of tokens.slice(1)) {
    const eq = tok.indexOf("=");
    if (eq > 0) {
      meta[tok.slice(0, eq)] = tok.slice(eq + 1);
    }
  }
  if (!meta.kind) {
    throw new SchemaError("header is missing kind=");
  }
  if (!meta.coords) {
    throw new SchemaError("header is missing coords=");
  }
  const coordNames = meta.coords.split(",");

  if (lines.length < 2) {
    throw new SchemaError("missing column header row");
  }
  const columns = lines[1].split(",").map((c) => c.trim());
  for (let i = 0; i < coordNames.length; i++) {
    if (columns[i] !== coordNames[i]) {
      throw new SchemaError(
        `column ${i} is ${columns[i]}, expected coordinate ${coordNames[i]}`,
      );
    }
  }
  const estIdx = columns.indexOf("estimate");
  const errIdx = columns.indexOf("stderr");
  if (estIdx < 0 || errIdx < 0) {
    throw new SchemaError("columns estimate and stderr are required");
  }

  const rows: SweepRow[] = [];
  for (const line of lines.slice(2)) {
    const parts = line.split(",").map((p) => Number(p));
    if (parts.length !== columns.length || parts.some((v) => Number.isNaN(v))) {
      throw new SchemaError(`malformed data row: ${line}`);
    }
    const extras: Record<string, number> = {};
    columns.forEach((name, i) => {
      if (i >= coordNames.length && name !== "estimate" && name !== "stderr") {
        extras[name] = parts[i];
      }
    });
    rows.push({
      coords: parts.slice(0, coordNames.length),
      estimate: parts[estIdx],
      stderr: parts[errIdx],
      extras,
    });
  }
  if (rows.length === 0) {
    throw new SchemaError("table has no data rows");
  }
  return { kind: meta.kind, coordNames, meta, rows };
}

export function requireKind(table: SweepTable, kind: string): void {
  if (table.kind !== kind) {
    throw new SchemaError(
      `table kind is ${table.kind}, this figure needs ${kind}`,
    );
  }
}
