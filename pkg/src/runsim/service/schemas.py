"""Request and response bodies for the HTTP service."""

from typing import Any

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class RunSummary(BaseModel):
    run_id: str
    role: str
    num_steps: int
    tracked_test_ids: list[int]


class RunListResponse(BaseModel):
    n: int
    runs: list[RunSummary]
    example_names: dict[int, str]
    test_example_names: dict[int, str]


class TrajectoryModel(BaseModel):
    test_example_id: int
    initial_loss: float
    losses: dict[int, float]


class RunDetailResponse(BaseModel):
    run_id: str
    role: str
    n: int
    steps: list[list[int]]
    trajectories: list[TrajectoryModel]


class SimulateRequest(BaseModel):
    run_id: str
    test_example_ids: list[int] | None = None


class SimulatedTrajectoryModel(BaseModel):
    test_example_id: int
    initial_loss: float
    losses: list[float | None]
    final_loss: float | None
    diverged_at: int | None


class SimulateResponse(BaseModel):
    run_id: str
    params_ref: str
    trajectories: list[SimulatedTrajectoryModel]


class WhatIfRequest(BaseModel):
    run_id: str
    # each edit is an {"op": ...} object; field-level checks happen in
    # the core so the error text matches the CLI's
    edits: list[dict[str, Any]]
    test_example_ids: list[int] | None = None


class WhatIfResult(BaseModel):
    test_example_id: int
    baseline: SimulatedTrajectoryModel
    edited: SimulatedTrajectoryModel
    delta_final: float | None
    actual_final: float | None


class WhatIfResponse(BaseModel):
    run_id: str
    params_ref: str
    edits: list[dict[str, Any]]
    baseline_steps: int
    edited_steps: int
    results: list[WhatIfResult]


class FitRequest(BaseModel):
    variant: str = "linear"
    lam: float | None = Field(default=None, description="ridge strength; null selects on validation runs")
    val_runs: int = 2
    test_example_ids: list[int] | None = None


class FitJobStatus(BaseModel):
    job_id: str
    status: str  # queued | running | done | failed
    variant: str
    params_ref: str | None = None
    lam: float | None = None
    skipped_test_ids: list[int] | None = None
    error: str | None = None


class ParamsResponse(BaseModel):
    ref: str
    params: dict[str, Any]
