/** One renderer per figure kind. Figures never recompute physics beyond
 * refitting the displayed power law from the table itself. */

import { SweepTable, requireKind } from "./csv";
import { olsLine, powerLawSlope } from "./fit";
import { Figure, HEIGHT, MARGIN, SERIES_COLORS, WIDTH, makeScale } from "./svg";

const L = MARGIN.left;
const R = WIDTH - MARGIN.right;
const T = MARGIN.top;
const B = HEIGHT - MARGIN.bottom;

function positive(values: number[], floor: number): number[] {
  return values.map((v) => (v > floor ? v : floor));
}

export function plotConvergence(table: SweepTable): string {
  requireKind(table, "hbar2-convergence");
  const xs = table.rows.map((r) => r.coords[0]);
  const ys = table.rows.map((r) => r.estimate);
  const errs = table.rows.map((r) => r.stderr);
  const fig = new Figure("Trajectory potential error vs hbar2");
  const x = makeScale(xs, L, R, true);
  const yFloor = Math.min(...ys) * 0.3;
  const y = makeScale(positive(ys.concat(ys.map((v, i) => v + errs[i])),
                               yFloor), B, T, true);
  fig.axes(x, y, "hbar2 / hbar", "max relative error of A(0-&gt;1)");
  fig.polyline(xs, ys, x, y, SERIES_COLORS[0]);
  fig.pointsWithErrors(xs, ys, errs, x, y, SERIES_COLORS[0], yFloor);
  const slope = powerLawSlope(table.rows);
  fig.annotate(`fitted slope ${slope.toFixed(2)}`, L + 14, T + 18);
  return fig.render();
}

export function plotRecurrence(table: SweepTable): string {
  requireKind(table, "recurrence-scaling");
  if (table.coordNames.length !== 2) {
    throw new Error("recurrence table needs coords n_nodes,hbar2");
  }
  const fig = new Figure("Recurrence time scaling");
  const sizes = table.rows.map((r) => r.coords[0]);
  const ys = table.rows.map((r) => r.estimate);
  const x = makeScale(sizes, L, R, true);
  const y = makeScale(ys, B, T, true);
  fig.axes(x, y, "graph size |N|", "t_rec");
  const groups = [...new Set(table.rows.map((r) => r.coords[1]))].sort(
    (a, b) => a - b);
  const legend: [string, string][] = [];
  groups.forEach((h2, gi) => {
    const rows = table.rows.filter((r) => r.coords[1] === h2)
      .sort((a, b) => a.coords[0] - b.coords[0]);
    const color = SERIES_COLORS[gi % SERIES_COLORS.length];
    fig.polyline(rows.map((r) => r.coords[0]), rows.map((r) => r.estimate),
                 x, y, color);
    fig.pointsWithErrors(rows.map((r) => r.coords[0]),
                         rows.map((r) => r.estimate),
                         rows.map((r) => r.stderr), x, y, color,
                         Math.min(...ys) * 0.3);
    legend.push([`hbar2=${h2}`, color]);
  });
  fig.legend(legend);
  // refit the size exponent from the table (mean per-hbar2 slope)
  const gamma = powerLawSlope(table.rows, 0, 1);
  const beta = powerLawSlope(table.rows, 1, 0);
  fig.annotate(`fitted size exponent ${gamma.toFixed(2)}`, R - 230, T + 18);
  fig.annotate(`fitted hbar2 exponent ${beta.toFixed(2)}`, R - 230, T + 36);
  return fig.render();
}

export function plotCatState(table: SweepTable): string {
  requireKind(table, "cat-state");
  const nq = Number(table.meta.n_qubits ?? "0");
  if (!nq) {
    throw new Error("cat-state table needs n_qubits= in its header");
  }
  const rows = [...table.rows].sort((a, b) => a.coords[0] - b.coords[0]);
  const xs = rows.map((r) => r.coords[0]);
  const ys = rows.map((r) => r.estimate);
  const errs = rows.map((r) => r.stderr);
  const fig = new Figure(`Cat-state total spin vs hbar2 (n_qubits=${nq})`);
  const x = makeScale(xs, L, R, true);
  const y = makeScale([-0.5, nq + 0.5], B, T, false);
  fig.axes(x, y, "hbar2 / hbar", "total spin M");
  fig.polyline(xs, ys, x, y, SERIES_COLORS[0]);
  fig.pointsWithErrors(xs, ys, errs, x, y, SERIES_COLORS[0]);
  const half = nq / 2;
  fig.polyline([xs[0], xs[xs.length - 1]], [half, half], x, y, "#888888",
               "6 4");
  fig.annotate(`M = ${half}`, R - 70, y(half) - 6, "#555555");
  // crossover marker: log-linear interpolation where M crosses nq/2
  for (let i = 0; i + 1 < rows.length; i++) {
    const [a, b] = [rows[i], rows[i + 1]];
    if ((a.estimate - half) * (b.estimate - half) <= 0 &&
        a.estimate !== b.estimate) {
      const f = (half - a.estimate) / (b.estimate - a.estimate);
      const hx = Math.exp(Math.log(a.coords[0]) +
                          f * (Math.log(b.coords[0]) - Math.log(a.coords[0])));
      const px = x(hx);
      fig.add(`<line x1="${px.toFixed(2)}" y1="${T}" x2="${px.toFixed(2)}" ` +
              `y2="${B}" stroke="#c2452d" stroke-dasharray="4 3"/>`);
      fig.annotate(`crossover hbar2 = ${hx.toExponential(2)}`, px + 6, T + 18,
                   "#c2452d");
      break;
    }
  }
  return fig.render();
}

export function plotEquivariance(table: SweepTable): string {
  requireKind(table, "equivariance");
  const xs = table.rows.map((r) => r.coords[0]);
  const ys = table.rows.map((r) => r.estimate);
  const errs = table.rows.map((r) => r.stderr);
  const thr = table.rows.map((r) => r.extras["threshold"] ?? NaN);
  const fig = new Figure("Equivariance: TV distance vs time");
  const x = makeScale(xs, L, R, false);
  const yVals = ys.concat(thr.filter((v) => Number.isFinite(v)));
  const y = makeScale(yVals.concat([0]), B, T, false);
  fig.axes(x, y, "time", "TV(occupancy, exact density)");
  if (thr.every((v) => Number.isFinite(v))) {
    fig.polyline(xs, thr, x, y, "#888888", "6 4");
    fig.annotate("3-sigma sampling floor", L + 14, T + 18, "#555555");
  }
  fig.polyline(xs, ys, x, y, SERIES_COLORS[0]);
  fig.pointsWithErrors(xs, ys, errs, x, y, SERIES_COLORS[0], 0);
  return fig.render();
}

export function plotConfinement(table: SweepTable): string {
  requireKind(table, "measurement-confinement");
  const xs = table.rows.map((r) => r.coords[0]);
  const ys = table.rows.map((r) => r.estimate);
  const errs = table.rows.map((r) => r.stderr);
  const fig = new Figure("Branch-switch rate vs environment depth");
  const x = makeScale(xs, L, R, false);
  const floor = Math.max(Math.min(...ys.filter((v) => v > 0)) * 0.3, 1e-9);
  const y = makeScale(positive(ys, floor), B, T, true);
  fig.axes(x, y, "environment qubits d_env", "switch rate per unit time");
  fig.polyline(xs, positive(ys, floor), x, y, SERIES_COLORS[0]);
  fig.pointsWithErrors(xs, positive(ys, floor), errs, x, y,
                       SERIES_COLORS[0], floor);
  const logRows = table.rows.filter((r) => r.estimate > 0)
    .map((r) => ({ coords: [Math.E ** r.coords[0]], estimate: r.estimate }));
  if (logRows.length >= 2) {
    const fit = olsLine(table.rows.filter((r) => r.estimate > 0)
                          .map((r) => r.coords[0]),
                        table.rows.filter((r) => r.estimate > 0)
                          .map((r) => Math.log(r.estimate)));
    fig.annotate(`suppression ${Math.exp(fit.slope).toFixed(2)}x per qubit`,
                 R - 250, T + 18);
  }
  return fig.render();
}

export const RENDERERS: Record<string, (t: SweepTable) => string> = {
  "convergence": plotConvergence,
  "recurrence": plotRecurrence,
  "cat": plotCatState,
  "equivariance": plotEquivariance,
  "confinement": plotConfinement,
};
