"""Request/response models for the workbench service.

Config values arrive as a path to an INI file (resolved on the server) or the
literal "default" for the built-in paper-scale defaults."""

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class TrainRequest(BaseModel):
    config: str = "default"
    out: str
    seed: int | None = None
    iterations: int | None = None
    runs: int | None = None


class PolicyMean(BaseModel):
    policy: str
    mean_return: float


class TrainResponse(BaseModel):
    artifact_dir: str
    runs: int
    iterations: int
    final_iteration_means: list[PolicyMean]
    files: list[str]


class EvaluateRequest(BaseModel):
    checkpoint: str
    config: str = "default"
    episodes: int = Field(default=10, ge=1)
    seed: int = 0


class EvaluateResponse(BaseModel):
    average_return: float
    episodes: int


class BaselineRequest(BaseModel):
    config: str = "default"
    episodes: int = Field(default=10, ge=1)
    seed: int = 0


class BaselineResponse(BaseModel):
    average_return: float
    episodes: int


class TrackRequest(BaseModel):
    measurements: str
    config: str = "default"
    out: str | None = None
    run_id: int | None = None


class TrackResponse(BaseModel):
    satellites: int
    steps: int
    final_log_traces: dict[int, float]
    out_file: str | None


class SimulateRequest(BaseModel):
    config: str = "default"
    seed: int | None = None
    out: str


class SimulateResponse(BaseModel):
    path: str
    rows: int
