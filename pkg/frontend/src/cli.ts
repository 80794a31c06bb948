/**
 * Figure generator for simulator sweep CSVs.
 *
 *   node dist/cli.js <kind> <input.csv> -o <output.svg>
 *
 * Kinds: convergence | recurrence | cat | equivariance | confinement.
 * The input is validated against the sweep schema; on a mismatch nothing
 * is written and the exit code is 2.
 */

import { readFileSync, writeFileSync } from "fs";
import { SchemaError, parseSweepCsv } from "./csv";
import { RENDERERS } from "./plots";

export function main(argv: string[]): number {
  const args = argv.slice(2);
  if (args.length < 2) {
    process.stderr.write(
      "usage: cli.js <kind> <input.csv> [-o output.svg]\n" +
      `kinds: ${Object.keys(RENDERERS).join(" | ")}\n`);
    return 2;
  }
  const [kind, input] = args;
  let output = input.replace(/\.csv$/i, "") + ".svg";
  const oIdx = args.indexOf("-o");
  if (oIdx >= 0) {
    if (oIdx + 1 >= args.length) {
      process.stderr.write("-o needs a path\n");
      return 2;
    }
    output = args[oIdx + 1];
  }
  const renderer = RENDERERS[kind];
  if (!renderer) {
    process.stderr.write(
      `unknown figure kind ${kind}; have ${Object.keys(RENDERERS).join(", ")}\n`);
    return 2;
  }
  let svg: string;
  try {
    svg = renderer(parseSweepCsv(readFileSync(input, "utf-8")));
  } catch (err) {
    if (err instanceof SchemaError) {
      process.stderr.write(`schema error: ${err.message}\n`);
      return 2;
    }
    process.stderr.write(`error: ${(err as Error).message}\n`);
    return 1;
  }
  writeFileSync(output, svg);
  process.stdout.write(`${output}\n`);
  return 0;
}

if (require.main === module) {
  process.exit(main(process.argv));
}
