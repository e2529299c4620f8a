"""FastAPI application over a data directory.

Read endpoints expose the run log; simulate and what-if replay fitted
weights synchronously; fitting runs as a background job polled by id.
Malformed bodies come back 400, unknown resources 404, requests that
parse but cannot be satisfied 422, and anything unexpected an opaque
500.
"""

import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from fastapi import FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .. import __version__
from ..errors import RunSimError, ValidationError
from ..pipeline import fit_collection, what_if_report
from ..rollout import edit_from_doc, simulate
from ..runs import DataKeyError, Run
from ..simparams import SimulatorVariant
from .schemas import (
    FitJobStatus,
    FitRequest,
    HealthResponse,
    ParamsResponse,
    RunDetailResponse,
    RunListResponse,
    RunSummary,
    SimulateRequest,
    SimulateResponse,
    SimulatedTrajectoryModel,
    TrajectoryModel,
    WhatIfRequest,
    WhatIfResponse,
)
from .store import DataStore

__all__ = ["create_app"]


class UnknownResourceError(RunSimError):
    """Requested run, ref, or job does not exist."""


@dataclass
class _Job:
    job_id: str
    variant: str
    status: str = "queued"  # queued | running | done | failed
    params_ref: str | None = None
    lam: float | None = None
    skipped: list[int] = field(default_factory=list)
    error: str | None = None


class _JobRegistry:
    # one worker: fits are CPU-bound and share nothing worth contending for
    def __init__(self):
        self._jobs: dict[str, _Job] = {}
        self._lock = threading.Lock()
        self._pool = ThreadPoolExecutor(max_workers=1)

    def submit(self, variant: str, work) -> _Job:
        job = _Job(job_id=uuid.uuid4().hex[:12], variant=variant)
        with self._lock:
            self._jobs[job.job_id] = job

        def run():
            with self._lock:
                job.status = "running"
            try:
                ref, lam, skipped = work()
            except Exception as exc:  # noqa: BLE001  - job errors surface via polling
                with self._lock:
                    job.status = "failed"
                    job.error = str(exc)
                return
            with self._lock:
                job.status = "done"
                job.params_ref = ref
                job.lam = lam
                job.skipped = skipped

        self._pool.submit(run)
        return job

    def get(self, job_id: str) -> _Job | None:
        with self._lock:
            return self._jobs.get(job_id)

    def snapshot(self, job: _Job) -> FitJobStatus:
        with self._lock:
            return FitJobStatus(
                job_id=job.job_id,
                status=job.status,
                variant=job.variant,
                params_ref=job.params_ref,
                lam=job.lam,
                skipped_test_ids=job.skipped or None,
                error=job.error,
            )


def _sim_model(doc: dict, tid: int) -> SimulatedTrajectoryModel:
    return SimulatedTrajectoryModel(test_example_id=tid, **doc)


def _resolve_ref(store: DataStore, ref: str | None) -> str:
    if ref is not None:
        return ref
    current = store.current_ref()
    if current is None:
        raise UnknownResourceError(
            "no fitted weights stored yet; POST /fit first or pass ?ref="
        )
    return current


def create_app(data_dir, ui_dir=None) -> FastAPI:
    store = DataStore(data_dir)
    jobs = _JobRegistry()
    app = FastAPI(title="training-run simulator service", version=__version__)

    # -- error contract -----------------------------------------------------

    @app.exception_handler(RequestValidationError)
    async def malformed(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    @app.exception_handler(UnknownResourceError)
    async def unknown(request: Request, exc: UnknownResourceError):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.exception_handler(DataKeyError)
    async def unknown_key(request: Request, exc: DataKeyError):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.exception_handler(RunSimError)
    async def unsatisfiable(request: Request, exc: RunSimError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(Exception)
    async def internal(request: Request, exc: Exception):
        return JSONResponse(status_code=500, content={"detail": "internal error"})

    # -- read endpoints -----------------------------------------------------

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", version=__version__)

    @app.get("/runs", response_model=RunListResponse)
    def list_runs():
        rs = store.run_set
        return RunListResponse(
            n=rs.n,
            runs=[
                RunSummary(
                    run_id=r.run_id,
                    role=r.role,
                    num_steps=r.curriculum.num_steps,
                    tracked_test_ids=list(r.tracked_ids),
                )
                for r in rs.runs
            ],
            example_names=dict(rs.example_names),
            test_example_names=dict(rs.test_example_names),
        )

    @app.get("/runs/{run_id}", response_model=RunDetailResponse)
    def run_detail(run_id: str):
        run: Run = store.run_set.run(run_id)
        return RunDetailResponse(
            run_id=run.run_id,
            role=run.role,
            n=run.curriculum.n,
            steps=[list(b) for b in run.curriculum.steps],
            trajectories=[
                TrajectoryModel(
                    test_example_id=t.test_example_id,
                    initial_loss=t.initial_loss,
                    losses=dict(t.losses),
                )
                for t in run.trajectories
            ],
        )

    @app.get("/params", response_model=ParamsResponse)
    def get_params(ref: str | None = Query(default=None)):
        use = _resolve_ref(store, ref)
        doc = store.params_doc_by_ref(use)
        if doc is None:
            raise UnknownResourceError(f"no weights stored under ref {use!r}")
        return ParamsResponse(ref=use, params=doc)

    # -- simulation ---------------------------------------------------------

    def _fits_for(ref: str | None):
        use = _resolve_ref(store, ref)
        fits = store.load_fits(use)
        if fits is None:
            raise UnknownResourceError(f"no weights stored under ref {use!r}")
        return use, fits

    @app.post("/simulate", response_model=SimulateResponse)
    def post_simulate(body: SimulateRequest, ref: str | None = Query(default=None)):
        use, fits = _fits_for(ref)
        run = store.run_set.run(body.run_id)
        if body.test_example_ids:
            ids = sorted(set(body.test_example_ids))
        else:
            ids = sorted(set(fits) & set(run.tracked_ids))
            if not ids:
                raise ValidationError(
                    f"run {run.run_id} tracks no test example present in the weights"
                )
        out = []
        for tid in ids:
            if tid not in fits:
                raise ValidationError(f"no fitted weights for test example {tid}")
            traj = run.trajectory_for(tid)
            if traj is None:
                raise ValidationError(
                    f"run {run.run_id} does not track test example {tid}"
                )
            sim = simulate(fits[tid], run.curriculum, traj.initial_loss)
            out.append(
                SimulatedTrajectoryModel(
                    test_example_id=tid,
                    initial_loss=sim.initial_loss,
                    losses=[None if v != v else v for v in sim.losses],
                    final_loss=None if sim.final_loss != sim.final_loss else sim.final_loss,
                    diverged_at=sim.diverged_at,
                )
            )
        return SimulateResponse(run_id=run.run_id, params_ref=use, trajectories=out)

    @app.post("/whatif", response_model=WhatIfResponse)
    def post_whatif(body: WhatIfRequest, ref: str | None = Query(default=None)):
        use, fits = _fits_for(ref)
        run = store.run_set.run(body.run_id)
        edits = [edit_from_doc(e) for e in body.edits]
        report = what_if_report(fits, run, edits, body.test_example_ids or None)
        return WhatIfResponse(
            run_id=report["run_id"],
            params_ref=use,
            edits=report["edits"],
            baseline_steps=report["baseline_steps"],
            edited_steps=report["edited_steps"],
            results=[
                {
                    "test_example_id": r["test_example_id"],
                    "baseline": _sim_model(r["baseline"], r["test_example_id"]),
                    "edited": _sim_model(r["edited"], r["test_example_id"]),
                    "delta_final": r["delta_final"],
                    "actual_final": r["actual_final"],
                }
                for r in report["results"]
            ],
        )

    # -- fitting jobs -------------------------------------------------------

    @app.post("/fit", response_model=FitJobStatus, status_code=202)
    def post_fit(body: FitRequest):
        try:
            variant = SimulatorVariant(body.variant)
        except ValueError:
            raise ValidationError(
                f"unknown variant {body.variant!r}; expected one of "
                f"{', '.join(v.value for v in SimulatorVariant)}"
            ) from None
        if body.val_runs < 0:
            raise ValidationError("val_runs must be >= 0")

        def work():
            result = fit_collection(
                store.run_set,
                variant,
                lam=body.lam,
                val_runs=body.val_runs,
                test_ids=body.test_example_ids or None,
            )
            ref = store.store_params(result.fits)
            return ref, result.lam, sorted(result.skipped)

        job = jobs.submit(variant.value, work)
        return jobs.snapshot(job)

    @app.get("/fit/jobs/{job_id}", response_model=FitJobStatus)
    def job_status(job_id: str):
        job = jobs.get(job_id)
        if job is None:
            raise UnknownResourceError(f"no fit job {job_id!r}")
        return jobs.snapshot(job)

    # -- static front end ---------------------------------------------------

    if ui_dir is not None:
        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
