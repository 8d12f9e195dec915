"""Experiment orchestration: INI config parsing, seed derivation, the
multi-run train-vs-random protocol, EKF evaluation of logged measurements,
and CSV artifact emission."""

from __future__ import annotations

import configparser
import csv
import json
import platform
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__, astro, ddqn, tracking
from .astro import EarthModel, SensorSite
from .ddqn import QNetwork, TrainConfig, greedy_action, random_policy, subseed
from .env import INITIAL_POINTING, EnvConfig, Environment
from .sensor import SensorConfig, angular_offsets
from .tracking import EkfConfig, run_tracking_episode

CSV_SCHEMA_VERSION = 1

# additional seed-derivation tags (0-5 belong to the training loop)
TAG_RANDOM_EVAL = 6
TAG_RANDOM_MEAS = 7
TAG_RUN = 1000

SEED_SCHEME = ("numpy SeedSequence keyed by ordered integer tuples: "
               "run r uses SeedSequence([master, 1000, r]); within a run, "
               "episode seeds are SeedSequence([run_seed, tag, ...]) with tags "
               "0-7 for init/behaviour/sampler/train/eval/measurement/"
               "random-eval/random-measurement streams")


def subseed_int(*keys: int) -> int:
    """64-bit integer form of subseed, for configs and manifests."""
    hi, lo = subseed(*keys).generate_state(2, np.uint32)
    return (int(hi) << 32) | int(lo)


@dataclass(frozen=True)
class ExperimentConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    ekf: EkfConfig = field(default_factory=EkfConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    runs: int = 5
    output_dir: str = "artifacts"
    workers: int = 0   # processes for the runs; 0 = min(runs, cpu count)

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        if self.workers < 0:
            raise ValueError("workers must be non-negative")


def _section(parser: configparser.ConfigParser, name: str) -> dict:
    return dict(parser[name]) if parser.has_section(name) else {}


def _build(cls, raw: dict, casts: dict, context: str):
    kwargs = {}
    for key, value in raw.items():
        if key not in casts:
            raise ValueError(f"unknown config key '{key}' in section [{context}]")
        try:
            kwargs[key] = casts[key](value)
        except ValueError as exc:
            raise ValueError(f"bad value for '{key}' in [{context}]: {exc}") from exc
    return cls(**kwargs)


def _hidden_sizes(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.replace(" ", "").split(",") if part)


def load_config(source=None) -> ExperimentConfig:
    """Read an INI experiment config; None or "default" gives paper defaults.

    All keys are optional; values use the same units as the dataclasses
    (radians, metres, seconds).
    """
    if source is None or source == "default":
        return ExperimentConfig()
    path = Path(source)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    parser.read(path)

    site = _build(SensorSite, _section(parser, "site"),
                  {"latitude": float, "longitude": float}, "site")
    sensor = _build(lambda **kw: SensorConfig(site=site, **kw), _section(parser, "sensor"),
                    {"fov_half_angle": float, "slew_rate": float, "sigma_theta": float,
                     "sigma_r": float, "dt": float}, "sensor")
    env_cfg = _build(lambda **kw: EnvConfig(sensor=sensor, **kw), _section(parser, "env"),
                     {"n_satellites": int, "episode_steps": int,
                      "orbit_radius": float, "seed": int}, "env")
    ekf = _build(EkfConfig, _section(parser, "ekf"),
                 {"process_noise_accel": float, "initial_pos_sigma": float,
                  "initial_vel_sigma": float}, "ekf")
    train = _build(TrainConfig, _section(parser, "train"),
                   {"iterations": int, "episodes_per_iteration": int, "eval_interval": int,
                    "eval_episodes": int, "alpha": float, "gamma": float,
                    "epsilon_start": float, "epsilon_end": float, "epsilon_decay_steps": int,
                    "batch_size": int, "buffer_capacity": int, "learning_starts": int,
                    "target_sync_period": int, "rng_seed": int,
                    "hidden_sizes": _hidden_sizes, "dtype": str}, "train")
    return _build(lambda **kw: ExperimentConfig(env=env_cfg, ekf=ekf, train=train, **kw),
                  _section(parser, "experiment"),
                  {"runs": int, "output_dir": str, "workers": int}, "experiment")


def apply_overrides(cfg: ExperimentConfig, seed=None, iterations=None,
                    output_dir=None, runs=None) -> ExperimentConfig:
    """CLI-style overrides on top of a loaded config."""
    train = cfg.train
    if seed is not None:
        train = replace(train, rng_seed=seed)
    if iterations is not None:
        train = replace(train, iterations=iterations)
    out = cfg.output_dir if output_dir is None else str(output_dir)
    n_runs = cfg.runs if runs is None else runs
    return replace(cfg, train=train, runs=n_runs, output_dir=out)


# -- policy evaluation -------------------------------------------------------


def evaluate_policy(policy, env: Environment, episode_seeds,
                    action_rng: np.random.Generator | None = None) -> float:
    """Mean episode return of a greedy network or the random baseline.

    policy is a QNetwork (greedy, epsilon = 0) or the string "random", in
    which case action_rng supplies the choices.
    """
    if policy == "random" and action_rng is None:
        raise ValueError("random policy needs an action_rng")
    total = 0.0
    for seed in episode_seeds:
        obs = env.reset(seed)
        while True:
            if policy == "random":
                action = random_policy(action_rng)
            else:
                action = greedy_action(policy, obs)
            res = env.step(action)
            total += res.reward
            obs = res.observation
            if res.done:
                break
    return total / len(episode_seeds)


def random_rollout(env: Environment, episode_seed, action_rng):
    """One random-policy episode; returns (return, per-step measurement lists)."""
    env.reset(episode_seed)
    total = 0.0
    log = []
    while True:
        res = env.step(random_policy(action_rng))
        total += res.reward
        log.append(res.measurements)
        if res.done:
            return total, log


# -- truth dump (orbit/FoV figure inputs) -------------------------------------


def simulate_truth(env_cfg: EnvConfig, earth: EarthModel = EarthModel()):
    """Rows of truth geometry for steps 0..episode_steps with the telescope
    parked at its initial pointing: one row per satellite per step."""
    env = Environment(env_cfg, earth)
    env.reset(0)
    rows = []
    for step in range(env_cfg.episode_steps + 1):
        t = step * env_cfg.sensor.dt
        pos, _ = env._truth_at(t)
        az, el, rng = env._aer_arrays(pos, t)
        for sat in range(env_cfg.n_satellites):
            aer = astro.AerVector(float(az[sat]), float(el[sat]), float(rng[sat]))
            d_phi, d_theta = angular_offsets(aer, INITIAL_POINTING)
            visible = (el[sat] > 0 and d_phi <= env_cfg.sensor.fov_half_angle
                       and d_theta <= env_cfg.sensor.fov_half_angle)
            rows.append({
                "satellite_id": sat,
                "step": step,
                "x": float(pos[sat, 0]),
                "y": float(pos[sat, 1]),
                "z": float(pos[sat, 2]),
                "az": float(az[sat]),
                "el": float(el[sat]),
                "range": float(rng[sat]),
                "in_fov": int(visible),
            })
    return rows


# -- CSV helpers ---------------------------------------------------------------


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, header: list[str], rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(row[col]) for col in header])


MEASUREMENT_HEADER = ["run_id", "step", "satellite_id", "time", "az", "el", "range",
                      "x", "y", "z",
                      "r00", "r01", "r02", "r10", "r11", "r12", "r20", "r21", "r22"]


def measurement_rows(run_id: int, measurement_log):
    rows = []
    for j, step_measurements in enumerate(measurement_log):
        for m in step_measurements:
            row = {
                "run_id": run_id, "step": j + 1, "satellite_id": m.satellite_id,
                "time": m.time, "az": m.aer.azimuth, "el": m.aer.elevation,
                "range": m.aer.range,
                "x": m.eci_position[0], "y": m.eci_position[1], "z": m.eci_position[2],
            }
            for a in range(3):
                for b in range(3):
                    row[f"r{a}{b}"] = m.noise_eci[a, b]
            rows.append(row)
    return rows


def load_measurement_log(path, n_steps: int | None = None, run_id: int | None = None):
    """Inverse of measurement_rows: rebuild per-step measurement lists.

    Multi-run files are filtered to run_id; None picks the lowest run present.
    """
    from .astro import AerVector
    from .sensor import Measurement

    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in MEASUREMENT_HEADER if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"measurement CSV missing columns: {missing}")
        raw = list(reader)
    if raw:
        if run_id is None:
            run_id = min(int(r["run_id"]) for r in raw)
        raw = [r for r in raw if int(r["run_id"]) == run_id]
    max_step = max((int(r["step"]) for r in raw), default=0)
    log = [[] for _ in range(n_steps if n_steps is not None else max_step)]
    for r in raw:
        noise = np.array([[float(r[f"r{a}{b}"]) for b in range(3)] for a in range(3)])
        m = Measurement(
            satellite_id=int(r["satellite_id"]),
            aer=AerVector(float(r["az"]), float(r["el"]), float(r["range"])),
            eci_position=np.array([float(r["x"]), float(r["y"]), float(r["z"])]),
            noise_eci=noise,
            time=float(r["time"]),
        )
        log[int(r["step"]) - 1].append(m)
    return log


# -- the experiment ------------------------------------------------------------


def _execute_run(cfg: ExperimentConfig, earth: EarthModel, run: int, out: Path) -> dict:
    """Train one run, score the paired random baseline at every eval point,
    run the EKF over both measurement episodes. Returns the CSV rows."""
    from threadpoolctl import threadpool_limits

    master = cfg.train.rng_seed
    dt = cfg.env.sensor.dt
    n_steps = cfg.env.episode_steps
    run_seed = subseed_int(master, TAG_RUN, run)
    rows = {"reward": [], "cov_trained": [], "cov_random": [], "final": [],
            "meas_trained": [], "meas_random": [], "run_seed": run_seed}

    with threadpool_limits(limits=1):
        env = Environment(cfg.env, earth)
        tcfg = replace(cfg.train, rng_seed=run_seed)
        net, records = ddqn.train(env, tcfg)
        net.save(out / f"checkpoint_run{run}.npz")

        for rec in records:
            it = rec.iteration
            rows["reward"].append({"run_id": run, "iteration": it, "policy": "trained",
                                   "average_return": rec.average_return})
            eval_seeds = [subseed(run_seed, ddqn.TAG_EVAL_EP, it, e)
                          for e in range(tcfg.eval_episodes)]
            rnd_avg = evaluate_policy(
                "random", env, eval_seeds,
                action_rng=np.random.default_rng(subseed(run_seed, TAG_RANDOM_EVAL, it)))
            rows["reward"].append({"run_id": run, "iteration": it, "policy": "random",
                                   "average_return": rnd_avg})

            _, rnd_log = random_rollout(
                env, subseed(run_seed, ddqn.TAG_MEAS_EP, it),
                np.random.default_rng(subseed(run_seed, TAG_RANDOM_MEAS, it)))
            series = {
                "trained": run_tracking_episode(env.elements, rec.measurement_log,
                                                cfg.ekf, dt, earth),
                "random": run_tracking_episode(env.elements, rnd_log, cfg.ekf, dt, earth),
            }
            for policy, traces in series.items():
                for sat in range(cfg.env.n_satellites):
                    rows[f"cov_{policy}"].append({
                        "run_id": run, "iteration": it, "satellite_id": sat,
                        "final_log_trace": traces[sat, -1],
                    })

            if rec is records[-1]:
                empty_log = [[] for _ in range(n_steps)]
                series["predict_only"] = run_tracking_episode(env.elements, empty_log,
                                                              cfg.ekf, dt, earth)
                for policy, traces in series.items():
                    for sat in range(cfg.env.n_satellites):
                        for step in range(n_steps):
                            rows["final"].append({
                                "run_id": run, "policy": policy, "satellite_id": sat,
                                "step": step + 1, "log_trace": traces[sat, step],
                            })
                rows["meas_trained"] += measurement_rows(run, rec.measurement_log)
                rows["meas_random"] += measurement_rows(run, rnd_log)
    return rows


def _execute_run_star(args):
    return _execute_run(*args)


def run_experiment(cfg: ExperimentConfig, earth: EarthModel = EarthModel()) -> Path:
    """The full protocol over cfg.runs independent training runs (executed in
    parallel processes when workers allows). Writes the CSV artifact set plus
    a manifest and returns the output directory."""
    import multiprocessing as mp
    import os

    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    started_iso = time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime(started))

    workers = cfg.workers or min(cfg.runs, os.cpu_count() or 1)
    workers = min(workers, cfg.runs)
    jobs = [(cfg, earth, run, out) for run in range(1, cfg.runs + 1)]
    if workers <= 1:
        results = [_execute_run(*job) for job in jobs]
    else:
        with mp.get_context("fork").Pool(workers) as pool:
            results = pool.map(_execute_run_star, jobs, chunksize=1)

    reward_rows = [r for res in results for r in res["reward"]]
    cov_rows = {p: [r for res in results for r in res[f"cov_{p}"]]
                for p in ("trained", "random")}
    final_rows = [r for res in results for r in res["final"]]
    meas_rows = {p: [r for res in results for r in res[f"meas_{p}"]]
                 for p in ("trained", "random")}
    run_seeds = [res["run_seed"] for res in results]

    write_csv(out / "reward_curve.csv",
              ["run_id", "iteration", "policy", "average_return"], reward_rows)
    for policy in ("trained", "random"):
        write_csv(out / f"covariance_{policy}.csv",
                  ["run_id", "iteration", "satellite_id", "final_log_trace"],
                  cov_rows[policy])
        write_csv(out / f"measurements_{policy}.csv", MEASUREMENT_HEADER, meas_rows[policy])
    write_csv(out / "final_episode_traces.csv",
              ["run_id", "policy", "satellite_id", "step", "log_trace"], final_rows)
    write_csv(out / "aggregate.csv",
              ["iteration", "policy", "mean_return", "std_return"],
              aggregate_rows(reward_rows))
    write_csv(out / "sim_truth.csv",
              ["satellite_id", "step", "x", "y", "z", "az", "el", "range", "in_fov"],
              simulate_truth(cfg.env, earth))

    manifest = {
        "schema_version": CSV_SCHEMA_VERSION,
        "package_version": __version__,
        "numpy_version": np.__version__,
        "python_version": platform.python_version(),
        "master_seed": cfg.train.rng_seed,
        "run_seeds": run_seeds,
        "seed_scheme": SEED_SCHEME,
        "config": asdict(cfg),
        "started_at": started_iso,
        "wall_seconds": round(time.time() - started, 3),
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, default=str)
    return out


def evaluate_checkpoint(checkpoint_path, cfg: ExperimentConfig, episodes: int,
                        seed: int, earth: EarthModel = EarthModel()) -> float:
    """Greedy average return of a saved network over freshly seeded episodes."""
    net = QNetwork.load(checkpoint_path)
    env = Environment(cfg.env, earth)
    if net.sizes[0] != env.observation_size:
        raise ValueError(f"checkpoint expects observations of length {net.sizes[0]}, "
                         f"environment produces {env.observation_size}")
    return evaluate_policy(net, env, [subseed(seed, e) for e in range(episodes)])


def evaluate_baseline(cfg: ExperimentConfig, episodes: int, seed: int,
                      earth: EarthModel = EarthModel()) -> float:
    """Random-policy average return on the same episode-seed scheme."""
    env = Environment(cfg.env, earth)
    action_rng = np.random.default_rng(subseed(seed, TAG_RANDOM_EVAL))
    return evaluate_policy("random", env, [subseed(seed, e) for e in range(episodes)],
                           action_rng=action_rng)


def track_measurements(cfg: ExperimentConfig, measurements_path, out_path=None,
                       run_id: int | None = None,
                       earth: EarthModel = EarthModel()) -> np.ndarray:
    """EKF over a saved measurement CSV against the configured constellation.

    Multi-run files are filtered to run_id (defaults to the lowest present).
    Optionally writes the per-step log-trace series as CSV.
    """
    log = load_measurement_log(measurements_path, n_steps=cfg.env.episode_steps,
                               run_id=run_id)
    env = Environment(cfg.env, earth)
    series = run_tracking_episode(env.elements, log, cfg.ekf, cfg.env.sensor.dt, earth)
    if out_path is not None:
        rows = [{"satellite_id": sat, "step": step + 1, "log_trace": series[sat, step]}
                for sat in range(series.shape[0]) for step in range(series.shape[1])]
        write_csv(Path(out_path), ["satellite_id", "step", "log_trace"], rows)
    return series


def write_sim_truth(cfg: ExperimentConfig, out_dir,
                    earth: EarthModel = EarthModel()) -> tuple[Path, int]:
    """Write the truth-geometry dump; returns (path, row count)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = simulate_truth(cfg.env, earth)
    path = out / "sim_truth.csv"
    write_csv(path, ["satellite_id", "step", "x", "y", "z", "az", "el", "range", "in_fov"],
              rows)
    return path, len(rows)


def read_aggregate(path) -> list[dict]:
    """Rows of aggregate.csv with numeric types restored."""
    with open(path, newline="") as fh:
        return [{"iteration": int(r["iteration"]), "policy": r["policy"],
                 "mean_return": float(r["mean_return"]),
                 "std_return": float(r["std_return"])}
                for r in csv.DictReader(fh)]


def aggregate_rows(reward_rows):
    """Per (iteration, policy) mean and population std of returns across runs."""
    grouped = {}
    for row in reward_rows:
        grouped.setdefault((row["iteration"], row["policy"]), []).append(row["average_return"])
    out = []
    for (iteration, policy) in sorted(grouped, key=lambda k: (k[0], k[1])):
        vals = np.array(grouped[(iteration, policy)])
        out.append({"iteration": iteration, "policy": policy,
                    "mean_return": float(vals.mean()), "std_return": float(vals.std())})
    return out
