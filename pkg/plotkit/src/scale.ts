/** Linear axis scaling with round tick values. */

export interface Scale {
  domain: [number, number];
  range: [number, number];
  map(v: number): number;
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  let [d0, d1] = domain;
  if (d0 === d1) {
    d0 -= 1;
    d1 += 1;
  }
  const k = (range[1] - range[0]) / (d1 - d0);
  return {
    domain: [d0, d1],
    range,
    map: (v: number) => range[0] + (v - d0) * k,
  };
}

export function niceTicks(min: number, max: number, count = 6): number[] {
  if (min === max) {
    return [min];
  }
  const rough = (max - min) / count;
  const mag = Math.pow(10, Math.floor(Math.log10(rough)));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => s >= rough) ?? rough;
  const start = Math.ceil(min / step) * step;
  const ticks: number[] = [];
  for (let v = start; v <= max + step * 1e-9; v += step) {
    ticks.push(Math.abs(v) < step * 1e-9 ? 0 : v);
  }
  return ticks;
}

export function fmtTick(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e5 || a < 1e-3) return v.toExponential(1).replace("e+", "e");
  return String(Number(v.toPrecision(6)));
}

export function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (!Number.isFinite(lo)) return [0, 1];
  return [lo, hi];
}

export function padded(e: [number, number], frac = 0.05): [number, number] {
  const span = e[1] - e[0] || 1;
  return [e[0] - span * frac, e[1] + span * frac];
}
