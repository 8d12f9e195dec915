"""FastAPI wrapper around the workbench: experiments, evaluation, the random
baseline, EKF tracking of saved measurement logs, and truth-geometry dumps.

The CLI is a thin client of this app (in-process by default, remote with
--server); anything it can do goes through these endpoints."""

from __future__ import annotations

import os
from dataclasses import replace
from pathlib import Path

from fastapi import FastAPI, HTTPException

from .. import __version__, harness
from ..env import Environment
from .schemas import (
    BaselineRequest,
    BaselineResponse,
    EvaluateRequest,
    EvaluateResponse,
    HealthResponse,
    PolicyMean,
    SimulateRequest,
    SimulateResponse,
    TrackRequest,
    TrackResponse,
    TrainRequest,
    TrainResponse,
)


def _load(config: str, **overrides) -> harness.ExperimentConfig:
    try:
        cfg = harness.load_config(config)
        return harness.apply_overrides(cfg, **overrides)
    except (ValueError, FileNotFoundError) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc


def create_app() -> FastAPI:
    app = FastAPI(title="skytask", version=__version__)

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", version=__version__)

    @app.post("/train", response_model=TrainResponse)
    def train(req: TrainRequest):
        cfg = _load(req.config, seed=req.seed, iterations=req.iterations,
                    output_dir=req.out, runs=req.runs)
        out = harness.run_experiment(cfg)
        rows = harness.read_aggregate(out / "aggregate.csv")
        final_it = max((r["iteration"] for r in rows), default=None)
        finals = [PolicyMean(policy=r["policy"], mean_return=r["mean_return"])
                  for r in rows if r["iteration"] == final_it]
        return TrainResponse(
            artifact_dir=str(out),
            runs=cfg.runs,
            iterations=cfg.train.iterations,
            final_iteration_means=finals,
            files=sorted(p.name for p in out.iterdir() if p.is_file()),
        )

    @app.post("/evaluate", response_model=EvaluateResponse)
    def evaluate(req: EvaluateRequest):
        cfg = _load(req.config)
        if not Path(req.checkpoint).exists():
            raise HTTPException(status_code=400,
                                detail=f"checkpoint not found: {req.checkpoint}")
        try:
            avg = harness.evaluate_checkpoint(req.checkpoint, cfg, req.episodes, req.seed)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return EvaluateResponse(average_return=avg, episodes=req.episodes)

    @app.post("/baseline", response_model=BaselineResponse)
    def baseline(req: BaselineRequest):
        cfg = _load(req.config)
        avg = harness.evaluate_baseline(cfg, req.episodes, req.seed)
        return BaselineResponse(average_return=avg, episodes=req.episodes)

    @app.post("/track", response_model=TrackResponse)
    def track(req: TrackRequest):
        cfg = _load(req.config)
        if not Path(req.measurements).exists():
            raise HTTPException(status_code=400,
                                detail=f"measurement file not found: {req.measurements}")
        out_file = None
        if req.out is not None:
            os.makedirs(req.out, exist_ok=True)
            out_file = str(Path(req.out) / "track_traces.csv")
        try:
            series = harness.track_measurements(cfg, req.measurements,
                                                out_path=out_file, run_id=req.run_id)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return TrackResponse(
            satellites=series.shape[0],
            steps=series.shape[1],
            final_log_traces={sat: float(series[sat, -1]) for sat in range(series.shape[0])},
            out_file=out_file,
        )

    @app.post("/simulate", response_model=SimulateResponse)
    def simulate(req: SimulateRequest):
        cfg = _load(req.config)
        if req.seed is not None:
            cfg = replace(cfg, env=replace(cfg.env, seed=req.seed))
        path, rows = harness.write_sim_truth(cfg, req.out)
        return SimulateResponse(path=str(path), rows=rows)

    return app
