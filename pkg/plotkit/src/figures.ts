/** The five figure builders. Each consumes documented CSV schemas by column
 * name and returns a backend-neutral scene. */

import { join } from "path";

import { num, readTable, Table } from "./csv.js";
import { extent, fmtTick, linearScale, niceTicks, padded, Scale } from "./scale.js";
import { Scene, seriesColor, Shape } from "./scene.js";

export const FIGURE_IDS = [
  "orbits3d", "telescope_fov", "reward_curve", "covariance_grid", "final_episode",
] as const;
export type FigureId = (typeof FIGURE_IDS)[number];

export interface SeriesStats {
  x: number[];
  mean: number[];
  std: number[];
}

/** Mean and population std across runs of `value`, keyed by `x`, for rows
 * matching `filter`. */
export function runStats(table: Table, xCol: string, valueCol: string,
                         filter: (row: Record<string, string>) => boolean): SeriesStats {
  const groups = new Map<number, number[]>();
  for (const row of table.rows) {
    if (!filter(row)) continue;
    const x = num(row, xCol);
    if (!groups.has(x)) groups.set(x, []);
    groups.get(x)!.push(num(row, valueCol));
  }
  const xs = [...groups.keys()].sort((a, b) => a - b);
  const mean = xs.map((x) => {
    const vals = groups.get(x)!;
    return vals.reduce((a, b) => a + b, 0) / vals.length;
  });
  const std = xs.map((x, i) => {
    const vals = groups.get(x)!;
    const m = mean[i];
    return Math.sqrt(vals.reduce((a, b) => a + (b - m) ** 2, 0) / vals.length);
  });
  return { x: xs, mean, std };
}

// -- chart scaffolding ---------------------------------------------------------

interface Frame {
  xs: Scale;
  ys: Scale;
  shapes: Shape[];
}

function frame(x0: number, y0: number, w: number, h: number,
               xDomain: [number, number], yDomain: [number, number],
               title: string, xLabel: string, yLabel: string): Frame {
  const xs = linearScale(xDomain, [x0, x0 + w]);
  const ys = linearScale(yDomain, [y0 + h, y0]);
  const shapes: Shape[] = [];
  shapes.push({ kind: "rect", x: x0, y: y0, w, h, stroke: "#444" });
  for (const t of niceTicks(xs.domain[0], xs.domain[1])) {
    const px = xs.map(t);
    shapes.push({ kind: "line", x1: px, y1: y0, x2: px, y2: y0 + h, color: "#e0e0e0" });
    shapes.push({ kind: "line", x1: px, y1: y0 + h, x2: px, y2: y0 + h + 4, color: "#444" });
    shapes.push({ kind: "text", x: px, y: y0 + h + 16, text: fmtTick(t), size: 10, anchor: "middle" });
  }
  for (const t of niceTicks(ys.domain[0], ys.domain[1])) {
    const py = ys.map(t);
    shapes.push({ kind: "line", x1: x0, y1: py, x2: x0 + w, y2: py, color: "#e0e0e0" });
    shapes.push({ kind: "line", x1: x0 - 4, y1: py, x2: x0, y2: py, color: "#444" });
    shapes.push({ kind: "text", x: x0 - 7, y: py + 4, text: fmtTick(t), size: 10, anchor: "end" });
  }
  shapes.push({ kind: "text", x: x0 + w / 2, y: y0 - 8, text: title, size: 13, anchor: "middle" });
  shapes.push({ kind: "text", x: x0 + w / 2, y: y0 + h + 32, text: xLabel, size: 11, anchor: "middle" });
  shapes.push({ kind: "text", x: x0 - 42, y: y0 - 10, text: yLabel, size: 11, anchor: "start" });
  return { xs, ys, shapes };
}

function meanBand(f: Frame, s: SeriesStats, color: string, dash = false): Shape[] {
  const line: [number, number][] = s.x.map((x, i) => [f.xs.map(x), f.ys.map(s.mean[i])]);
  const upper: [number, number][] = s.x.map((x, i) => [f.xs.map(x), f.ys.map(s.mean[i] + s.std[i])]);
  const lower: [number, number][] = s.x.map((x, i) => [f.xs.map(x), f.ys.map(s.mean[i] - s.std[i])]);
  const shapes: Shape[] = [];
  if (s.x.length > 1) {
    shapes.push({ kind: "band", upper, lower, color, opacity: 0.18 });
    shapes.push({ kind: "polyline", pts: line, color, width: 2, dash });
  } else if (s.x.length === 1) {
    shapes.push({ kind: "circle", cx: line[0][0], cy: line[0][1], r: 3, fill: color });
  }
  return shapes;
}

// -- reward curve ---------------------------------------------------------------

export const REWARD_COLUMNS = ["run_id", "iteration", "policy", "average_return"];
export const AGGREGATE_COLUMNS = ["iteration", "policy", "mean_return", "std_return"];

/** Recomputed mean/std must match aggregate.csv within 1e-9. */
export function checkAggregateConsistency(reward: Table, aggregate: Table): void {
  for (const row of aggregate.rows) {
    const policy = row["policy"];
    const iteration = num(row, "iteration");
    const stats = runStats(reward, "iteration", "average_return",
                           (r) => r["policy"] === policy);
    const i = stats.x.indexOf(iteration);
    if (i < 0) {
      throw new Error(`aggregate.csv has iteration ${iteration} missing from reward_curve.csv`);
    }
    if (Math.abs(stats.mean[i] - num(row, "mean_return")) > 1e-9 ||
        Math.abs(stats.std[i] - num(row, "std_return")) > 1e-9) {
      throw new Error(`aggregate.csv disagrees with recomputation at iteration ${iteration} (${policy})`);
    }
  }
}

/** Trained must beat random at the final evaluation point. */
export function checkTrainedBeatsRandom(reward: Table): void {
  const trained = runStats(reward, "iteration", "average_return", (r) => r["policy"] === "trained");
  const random = runStats(reward, "iteration", "average_return", (r) => r["policy"] === "random");
  if (trained.x.length === 0 || random.x.length === 0) {
    return;   // nothing to compare on empty or single-policy data
  }
  const last = Math.max(...trained.x);
  const i = trained.x.indexOf(last);
  const j = random.x.indexOf(last);
  if (j < 0) return;
  if (!(trained.mean[i] > random.mean[j])) {
    throw new Error(
      `trained curve does not beat random at the final evaluation point ` +
      `(iteration ${last}: trained ${trained.mean[i]}, random ${random.mean[j]})`);
  }
}

export function buildRewardCurve(inDir: string): Scene {
  const reward = readTable(join(inDir, "reward_curve.csv"), REWARD_COLUMNS);
  let aggregatePath = join(inDir, "aggregate.csv");
  try {
    const aggregate = readTable(aggregatePath, AGGREGATE_COLUMNS);
    checkAggregateConsistency(reward, aggregate);
  } catch (e) {
    if (!(e instanceof Error) || !e.message.startsWith("missing input file")) throw e;
  }
  checkTrainedBeatsRandom(reward);

  const scene: Scene = { width: 640, height: 420, shapes: [] };
  const policies = ["trained", "random"];
  const stats = policies.map((p) =>
    runStats(reward, "iteration", "average_return", (r) => r["policy"] === p));
  const allX = stats.flatMap((s) => s.x);
  const allY = stats.flatMap((s) => s.mean.map((m, i) => m + s.std[i]))
    .concat(stats.flatMap((s) => s.mean.map((m, i) => m - s.std[i])));
  const f = frame(70, 50, 520, 300,
                  allX.length ? extent(allX) : [0, 1],
                  allY.length ? padded(extent(allY.concat([0]))) : [0, 1],
                  "AVERAGE EVALUATION RETURN", "TRAINING ITERATION", "MEAN RETURN");
  scene.shapes.push(...f.shapes);
  const colors: Record<string, string> = { trained: "#1f77b4", random: "#d62728" };
  policies.forEach((p, k) => {
    scene.shapes.push(...meanBand(f, stats[k], colors[p]));
    scene.shapes.push({ kind: "line", x1: 420, y1: 66 + 16 * k, x2: 450, y2: 66 + 16 * k, color: colors[p], width: 2 });
    scene.shapes.push({ kind: "text", x: 456, y: 70 + 16 * k, text: p.toUpperCase(), size: 10 });
  });
  return scene;
}

// -- covariance grid --------------------------------------------------------------

export const COVARIANCE_COLUMNS = ["run_id", "iteration", "satellite_id", "final_log_trace"];

export function buildCovarianceGrid(inDir: string): Scene {
  const scene: Scene = { width: 980, height: 430, shapes: [] };
  const panels: [string, string][] = [
    ["covariance_trained.csv", "TRAINED POLICY"],
    ["covariance_random.csv", "RANDOM POLICY"],
  ];
  panels.forEach(([file, title], p) => {
    const table = readTable(join(inDir, file), COVARIANCE_COLUMNS);
    const sats = [...new Set(table.rows.map((r) => num(r, "satellite_id")))].sort((a, b) => a - b);
    const stats = sats.map((sat) =>
      runStats(table, "iteration", "final_log_trace", (r) => num(r, "satellite_id") === sat));
    const allX = stats.flatMap((s) => s.x);
    const allY = stats.flatMap((s) => s.mean.map((m, i) => m + s.std[i]))
      .concat(stats.flatMap((s) => s.mean.map((m, i) => m - s.std[i])));
    const f = frame(70 + p * 470, 50, 380, 300,
                    allX.length ? extent(allX) : [0, 1],
                    allY.length ? padded(extent(allY)) : [0, 1],
                    title, "TRAINING ITERATION", p === 0 ? "FINAL LOG-TRACE" : "");
    scene.shapes.push(...f.shapes);
    stats.forEach((s, k) => scene.shapes.push(...meanBand(f, s, seriesColor(k))));
  });
  return scene;
}

// -- final episode ------------------------------------------------------------------

export const TRACES_COLUMNS = ["run_id", "policy", "satellite_id", "step", "log_trace"];

export function buildFinalEpisode(inDir: string): Scene {
  const table = readTable(join(inDir, "final_episode_traces.csv"), TRACES_COLUMNS);
  const scene: Scene = { width: 980, height: 430, shapes: [] };
  const sats = [...new Set(table.rows.map((r) => num(r, "satellite_id")))].sort((a, b) => a - b);
  const panels = ["trained", "random"];
  panels.forEach((policy, p) => {
    const stats = sats.map((sat) =>
      runStats(table, "step", "log_trace",
               (r) => r["policy"] === policy && num(r, "satellite_id") === sat));
    const predict = sats.map((sat) =>
      runStats(table, "step", "log_trace",
               (r) => r["policy"] === "predict_only" && num(r, "satellite_id") === sat));
    const allY = stats.concat(predict).flatMap((s) => s.mean.map((m, i) => m + s.std[i]))
      .concat(stats.flatMap((s) => s.mean.map((m, i) => m - s.std[i])));
    const allX = stats.flatMap((s) => s.x);
    const f = frame(70 + p * 470, 50, 380, 300,
                    allX.length ? extent(allX) : [0, 1],
                    allY.length ? padded(extent(allY)) : [0, 1],
                    `FINAL EPISODE: ${policy.toUpperCase()}`,
                    "EPISODE STEP", p === 0 ? "LOG-TRACE" : "");
    scene.shapes.push(...f.shapes);
    predict.forEach((s) => {
      if (s.x.length > 1) {
        scene.shapes.push({
          kind: "polyline",
          pts: s.x.map((x, i) => [f.xs.map(x), f.ys.map(s.mean[i])] as [number, number]),
          color: "#999999", width: 1, dash: true, opacity: 0.8,
        });
      }
    });
    stats.forEach((s, k) => scene.shapes.push(...meanBand(f, s, seriesColor(k))));
  });
  return scene;
}

// -- truth geometry figures ------------------------------------------------------------

export const TRUTH_COLUMNS = ["satellite_id", "step", "x", "y", "z", "az", "el", "range", "in_fov"];

function truthPaths(table: Table): Map<number, Record<string, string>[]> {
  const bySat = new Map<number, Record<string, string>[]>();
  for (const row of table.rows) {
    const sat = num(row, "satellite_id");
    if (!bySat.has(sat)) bySat.set(sat, []);
    bySat.get(sat)!.push(row);
  }
  for (const rows of bySat.values()) {
    rows.sort((a, b) => num(a, "step") - num(b, "step"));
  }
  return bySat;
}

export function buildOrbits3d(inDir: string): Scene {
  const table = readTable(join(inDir, "sim_truth.csv"), TRUTH_COLUMNS);
  const scene: Scene = { width: 640, height: 640, shapes: [] };
  // orthographic projection after fixed tilt/turn
  const azim = Math.PI / 6;
  const elev = Math.PI / 9;
  const project = (x: number, y: number, z: number): [number, number] => {
    const x1 = x * Math.cos(azim) + y * Math.sin(azim);
    const y1 = -x * Math.sin(azim) + y * Math.cos(azim);
    const z1 = z;
    const y2 = y1 * Math.cos(elev) + z1 * Math.sin(elev);
    return [x1, -y2];
  };
  const radius = 7.2e6;
  const scale = 280 / radius;
  const cx = 320;
  const cy = 330;
  const toPx = (p: [number, number]): [number, number] => [cx + p[0] * scale, cy + p[1] * scale];

  scene.shapes.push({ kind: "text", x: 320, y: 28, text: "CONSTELLATION PATHS (ECI)", size: 13, anchor: "middle" });
  // Earth silhouette: orthographic projection of a sphere is a disc
  const earth: [number, number][] = [];
  for (let a = 0; a <= 64; a++) {
    const t = (a / 64) * 2 * Math.PI;
    earth.push([cx + 6.371e6 * scale * Math.cos(t), cy + 6.371e6 * scale * Math.sin(t)]);
  }
  scene.shapes.push({ kind: "band", upper: earth.slice(0, 33), lower: earth.slice(32), color: "#b8d4e8", opacity: 0.6 });
  scene.shapes.push({ kind: "polyline", pts: earth, color: "#5588aa", width: 1 });

  const bySat = truthPaths(table);
  [...bySat.keys()].sort((a, b) => a - b).forEach((sat, k) => {
    const rows = bySat.get(sat)!;
    const pts = rows.map((r) => toPx(project(num(r, "x"), num(r, "y"), num(r, "z"))));
    scene.shapes.push({ kind: "polyline", pts, color: seriesColor(k), width: 2, opacity: 0.9 });
    scene.shapes.push({ kind: "circle", cx: pts[0][0], cy: pts[0][1], r: 2.5, fill: seriesColor(k) });
  });
  return scene;
}

export function buildTelescopeFov(inDir: string): Scene {
  const table = readTable(join(inDir, "sim_truth.csv"), TRUTH_COLUMNS);
  const scene: Scene = { width: 640, height: 420, shapes: [] };
  const f = frame(70, 50, 520, 300, [-180, 180], [0, 90],
                  "SKY PATHS AND FIELD OF VIEW", "AZIMUTH (DEG)", "ELEVATION (DEG)");
  scene.shapes.push(...f.shapes);

  // field of view square around the parked boresight (az 0, el 45, 15 deg half-angle)
  const box: [number, number][] = [[-15, 30], [15, 30], [15, 60], [-15, 60], [-15, 30]];
  scene.shapes.push({
    kind: "polyline",
    pts: box.map(([a, e]) => [f.xs.map(a), f.ys.map(e)] as [number, number]),
    color: "#222222", width: 2, dash: true,
  });

  const bySat = truthPaths(table);
  [...bySat.keys()].sort((a, b) => a - b).forEach((sat, k) => {
    const rows = bySat.get(sat)!;
    let segment: [number, number][] = [];
    let prevAz: number | null = null;
    const flush = () => {
      if (segment.length > 1) {
        scene.shapes.push({ kind: "polyline", pts: segment, color: seriesColor(k), width: 2, opacity: 0.9 });
      }
      segment = [];
    };
    for (const r of rows) {
      const el = (num(r, "el") * 180) / Math.PI;
      let az = (num(r, "az") * 180) / Math.PI;
      az = ((az + 180) % 360 + 360) % 360 - 180;
      if (el <= 0 || (prevAz !== null && Math.abs(az - prevAz) > 180)) {
        flush();
      }
      if (el > 0) {
        segment.push([f.xs.map(az), f.ys.map(el)]);
      }
      prevAz = az;
    }
    flush();
  });
  return scene;
}

export function buildFigure(id: FigureId, inDir: string): Scene {
  switch (id) {
    case "reward_curve": return buildRewardCurve(inDir);
    case "covariance_grid": return buildCovarianceGrid(inDir);
    case "final_episode": return buildFinalEpisode(inDir);
    case "orbits3d": return buildOrbits3d(inDir);
    case "telescope_fov": return buildTelescopeFov(inDir);
  }
}

/** Input files each figure reads; used for the read-only checksum guard. */
export function figureInputs(id: FigureId): string[] {
  switch (id) {
    case "reward_curve": return ["reward_curve.csv", "aggregate.csv"];
    case "covariance_grid": return ["covariance_trained.csv", "covariance_random.csv"];
    case "final_episode": return ["final_episode_traces.csv"];
    case "orbits3d":
    case "telescope_fov": return ["sim_truth.csv"];
  }
}
