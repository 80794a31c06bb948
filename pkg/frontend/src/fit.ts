/** Ordinary least squares y = a + b*x, used for log-log power-law slopes. */

export interface LineFit {
  intercept: number;
  slope: number;
}

export function olsLine(xs: number[], ys: number[]): LineFit {
  const n = xs.length;
  if (n < 2 || ys.length !== n) {
    throw new Error("need at least two points");
  }
  let sx = 0;
  let sy = 0;
  for (let i = 0; i < n; i++) {
    sx += xs[i];
    sy += ys[i];
  }
  const mx = sx / n;
  const my = sy / n;
  let sxx = 0;
  let sxy = 0;
  for (let i = 0; i < n; i++) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx === 0) {
    throw new Error("degenerate x values");
  }
  const slope = sxy / sxx;
  return { intercept: my - slope * mx, slope };
}

/**
 * Mean log-log slope of estimate vs the first coordinate, grouped by the
 * second coordinate (one fit per group, averaged). With a single
 * coordinate the plain slope is returned.
 */
export function powerLawSlope(
  rows: { coords: number[]; estimate: number }[],
  axis = 0,
  groupBy: number | null = null,
): number {
  const groups = new Map<string, { x: number[]; y: number[] }>();
  for (const row of rows) {
    const key = groupBy === null ? "all" : String(row.coords[groupBy]);
    if (!groups.has(key)) {
      groups.set(key, { x: [], y: [] });
    }
    const g = groups.get(key)!;
    g.x.push(Math.log(row.coords[axis]));
    g.y.push(Math.log(row.estimate));
  }
  let total = 0;
  let count = 0;
  for (const g of groups.values()) {
    if (g.x.length >= 2) {
      total += olsLine(g.x, g.y).slope;
      count += 1;
    }
  }
  if (count === 0) {
    throw new Error("no group had enough points to fit");
  }
  return total / count;
}
