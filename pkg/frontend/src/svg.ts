/**
 * Deterministic SVG plotting primitives. No timestamps, no randomness,
 * fixed number formatting: identical inputs give byte-identical files.
 */

export const WIDTH = 640;
export const HEIGHT = 440;
export const MARGIN = { left: 72, right: 24, top: 44, bottom: 56 };

export const SERIES_COLORS = ["#1f6fb2", "#c2452d", "#3a8c5c", "#8256a8",
                              "#b28419", "#508396"];

export function fmt(v: number): string {
  if (!Number.isFinite(v)) {
    return "0";
  }
  const s = v.toPrecision(6);
  return String(Number(s));
}

export interface Scale {
  (v: number): number;
  ticks: number[];
  log: boolean;
}

function niceLinearTicks(lo: number, hi: number, n = 5): number[] {
  if (lo === hi) {
    lo -= 1;
    hi += 1;
  }
  const span = hi - lo;
  const step0 = Math.pow(10, Math.floor(Math.log10(span / n)));
  let step = step0;
  for (const m of [1, 2, 5, 10]) {
    if (span / (step0 * m) <= n) {
      step = step0 * m;
      break;
    }
  }
  const ticks: number[] = [];
  let t = Math.ceil(lo / step) * step;
  for (; t <= hi + 1e-12 * span; t += step) {
    ticks.push(Number(t.toPrecision(10)));
  }
  return ticks;
}

function logTicks(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  for (let e = Math.ceil(Math.log10(lo) - 1e-9);
       e <= Math.floor(Math.log10(hi) + 1e-9); e++) {
    ticks.push(Math.pow(10, e));
  }
  if (ticks.length < 2) {
    return [lo, hi];
  }
  return ticks;
}

export function makeScale(values: number[], pixLo: number, pixHi: number,
                          log: boolean, padFrac = 0.08): Scale {
  let lo = Math.min(...values);
  let hi = Math.max(...values);
  if (log) {
    if (lo <= 0) {
      throw new Error("log scale needs positive values");
    }
    const llo = Math.log10(lo);
    const lhi = Math.log10(hi);
    const pad = Math.max((lhi - llo) * padFrac, 0.05);
    const a = llo - pad;
    const b = lhi + pad;
    const scale = ((v: number) =>
      pixLo + ((Math.log10(v) - a) / (b - a)) * (pixHi - pixLo)) as Scale;
    scale.ticks = logTicks(lo, hi);
    scale.log = true;
    return scale;
  }
  const pad = Math.max((hi - lo) * padFrac, hi === lo ? 1 : 0);
  const a = lo - pad;
  const b = hi + pad;
  const scale = ((v: number) =>
    pixLo + ((v - a) / (b - a)) * (pixHi - pixLo)) as Scale;
  scale.ticks = niceLinearTicks(a, b);
  scale.log = false;
  return scale;
}

export function tickLabel(v: number, log: boolean): string {
  if (log) {
    const e = Math.round(Math.log10(v));
    return `1e${e}`;
  }
  return fmt(v);
}

export class Figure {
  private parts: string[] = [];

  constructor(public title: string) {}

  add(part: string): void {
    this.parts.push(part);
  }

  axes(x: Scale, y: Scale, xlabel: string, ylabel: string): void {
    const L = MARGIN.left;
    const R = WIDTH - MARGIN.right;
    const T = MARGIN.top;
    const B = HEIGHT - MARGIN.bottom;
    this.add(`<rect x="${L}" y="${T}" width="${R - L}" height="${B - T}" ` +
             `fill="none" stroke="#444444" stroke-width="1"/>`);
    for (const t of x.ticks) {
      const px = fmt(x(t));
      this.add(`<line x1="${px}" y1="${B}" x2="${px}" y2="${B + 5}" ` +
               `stroke="#444444"/>`);
      this.add(`<text x="${px}" y="${B + 20}" font-size="12" ` +
               `text-anchor="middle" fill="#222222">` +
               `${tickLabel(t, x.log)}</text>`);
      this.add(`<line x1="${px}" y1="${T}" x2="${px}" y2="${B}" ` +
               `stroke="#dddddd" stroke-width="0.5"/>`);
    }
    for (const t of y.ticks) {
      const py = fmt(y(t));
      this.add(`<line x1="${L - 5}" y1="${py}" x2="${L}" y2="${py}" ` +
               `stroke="#444444"/>`);
      this.add(`<text x="${L - 8}" y="${py}" font-size="12" dy="4" ` +
               `text-anchor="end" fill="#222222">` +
               `${tickLabel(t, y.log)}</text>`);
      this.add(`<line x1="${L}" y1="${py}" x2="${R}" y2="${py}" ` +
               `stroke="#dddddd" stroke-width="0.5"/>`);
    }
    this.add(`<text x="${(L + R) / 2}" y="${HEIGHT - 14}" font-size="14" ` +
             `text-anchor="middle" fill="#111111">${xlabel}</text>`);
    this.add(`<text x="20" y="${(T + B) / 2}" font-size="14" ` +
             `text-anchor="middle" fill="#111111" ` +
             `transform="rotate(-90 20 ${(T + B) / 2})">${ylabel}</text>`);
  }

  pointsWithErrors(xs: number[], ys: number[], errs: number[],
                   x: Scale, y: Scale, color: string,
                   clampLo: number | null = null): void {
    for (let i = 0; i < xs.length; i++) {
      const px = fmt(x(xs[i]));
      if (errs[i] > 0) {
        let lo = ys[i] - errs[i];
        const hi = ys[i] + errs[i];
        if (clampLo !== null && lo < clampLo) {
          lo = clampLo;
        }
        this.add(`<line x1="${px}" y1="${fmt(y(lo))}" x2="${px}" ` +
                 `y2="${fmt(y(hi))}" stroke="${color}" stroke-width="1.2"/>`);
      }
      this.add(`<circle cx="${px}" cy="${fmt(y(ys[i]))}" r="3.4" ` +
               `fill="${color}"/>`);
    }
  }

  polyline(xs: number[], ys: number[], x: Scale, y: Scale, color: string,
           dash = ""): void {
    const pts = xs.map((v, i) => `${fmt(x(v))},${fmt(y(ys[i]))}`).join(" ");
    const dashAttr = dash ? ` stroke-dasharray="${dash}"` : "";
    this.add(`<polyline points="${pts}" fill="none" stroke="${color}" ` +
             `stroke-width="1.6"${dashAttr}/>`);
  }

  annotate(text: string, xPix: number, yPix: number, color = "#111111"): void {
    this.add(`<text x="${fmt(xPix)}" y="${fmt(yPix)}" font-size="13" ` +
             `fill="${color}">${text}</text>`);
  }

  legend(entries: [string, string][]): void {
    const x0 = MARGIN.left + 12;
    let y0 = MARGIN.top + 16;
    for (const [label, color] of entries) {
      this.add(`<line x1="${x0}" y1="${y0 - 4}" x2="${x0 + 22}" ` +
               `y2="${y0 - 4}" stroke="${color}" stroke-width="2"/>`);
      this.add(`<text x="${x0 + 28}" y="${y0}" font-size="12" ` +
               `fill="#222222">${label}</text>`);
      y0 += 16;
    }
  }

  render(): string {
    const head =
      `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" ` +
      `height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}">\n` +
      `<rect width="${WIDTH}" height="${HEIGHT}" fill="#ffffff"/>\n` +
      `<text x="${WIDTH / 2}" y="26" font-size="16" text-anchor="middle" ` +
      `fill="#000000">${this.title}</text>\n`;
    return head + this.parts.join("\n") + "\n</svg>\n";
  }
}
