"""Fitting and comparison workflows shared by the CLI and the service.

Everything here composes the lower-level modules: split a run log,
pick a regularizer on validation runs, fit per-test-example weights,
wrap fitted weights and checkpoint scores as comparable methods, and
run the head-to-head evaluation on held-out future runs.
"""

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

import math

from .analysis import EvalReport, MethodSpec, compare_methods
from .baselines import (
    CheckpointTrace,
    InfluenceScores,
    ScoreMethod,
    optimal_rescale,
    select_checkpoints,
    tracin_cp,
)
from .errors import DataError, NoDataError, ValidationError
from .fitting import DEFAULT_LAMBDA_GRID, fit_simulator, select_lambda
from .rollout import CurriculumEdit, SimulatedTrajectory, apply_edits, edit_to_doc, simulate
from .runs import Run, RunSet
from .simparams import SimulatorParams, SimulatorVariant

__all__ = [
    "split_runs",
    "tracked_test_ids",
    "FitResult",
    "fit_collection",
    "simulator_method",
    "weights_method",
    "averaged_tracin_weights",
    "pooled_rescale",
    "rescaled_method",
    "DeskOutcome",
    "desk_comparison",
    "what_if_report",
]

DEFAULT_CHECKPOINT_BUDGET = 10


def split_runs(
    run_set: RunSet, val_runs: int
) -> tuple[tuple[Run, ...], tuple[Run, ...], tuple[Run, ...]]:
    """(fit, validation, future); the last `val_runs` past runs validate."""
    past = run_set.past_runs()
    if not past:
        raise NoDataError("split_runs: log has no past runs")
    if not 0 <= val_runs < len(past):
        raise ValidationError(
            f"split_runs: val_runs={val_runs} outside [0, {len(past) - 1}]"
        )
    cut = len(past) - val_runs
    return past[:cut], past[cut:], run_set.future_runs()


def tracked_test_ids(runs: Sequence[Run]) -> tuple[int, ...]:
    """Union of test examples tracked anywhere in `runs`, ascending."""
    ids: set[int] = set()
    for run in runs:
        ids.update(run.tracked_ids)
    return tuple(sorted(ids))


@dataclass(frozen=True)
class FitResult:
    variant: SimulatorVariant
    lam: float
    lam_selected: bool
    fits: dict[int, SimulatorParams]
    skipped: dict[int, str]  # test ids with no usable rows
    fit_run_ids: tuple[str, ...]
    val_run_ids: tuple[str, ...]


def fit_collection(
    run_set: RunSet,
    variant: SimulatorVariant,
    lam: float | None = None,
    val_runs: int = 2,
    test_ids: Sequence[int] | None = None,
    grid: Sequence[float] = DEFAULT_LAMBDA_GRID,
) -> FitResult:
    """Fit one weight set per tracked test example on the past runs.

    With lam=None the regularizer is chosen by validation mean squared
    error over `grid` (needs val_runs >= 1); a given lam is used as is.
    Fitting always uses the past runs minus the validation tail, so an
    explicit lam with val_runs=0 consumes every past run.  Test examples
    without a single usable step pair are reported in `skipped`.
    """
    fit_runs, validation, _ = split_runs(run_set, val_runs)
    ids = tuple(test_ids) if test_ids is not None else tracked_test_ids(fit_runs)
    if not ids:
        raise NoDataError("fit_collection: no tracked test examples in the fit runs")
    selected = lam is None
    if selected:
        if not validation:
            raise ValidationError(
                "fit_collection: lambda selection needs val_runs >= 1"
            )
        lam = select_lambda(fit_runs, validation, ids, variant, grid)
    fits: dict[int, SimulatorParams] = {}
    skipped: dict[int, str] = {}
    for tid in ids:
        try:
            fits[tid] = fit_simulator(fit_runs, tid, variant, lam)
        except NoDataError as exc:
            skipped[tid] = str(exc)
    if not fits:
        raise NoDataError(
            f"fit_collection: no test example had usable data ({len(skipped)} skipped)"
        )
    return FitResult(
        variant=variant,
        lam=float(lam),
        lam_selected=selected,
        fits=fits,
        skipped=skipped,
        fit_run_ids=tuple(r.run_id for r in fit_runs),
        val_run_ids=tuple(r.run_id for r in validation),
    )


# ---------------------------------------------------------------------------
# methods for head-to-head comparison


def simulator_method(name: str, fits: Mapping[int, SimulatorParams]) -> MethodSpec:
    """Roll fitted weights forward from each run's own starting loss."""

    def run_sims(run: Run) -> dict[int, SimulatedTrajectory]:
        out: dict[int, SimulatedTrajectory] = {}
        for traj in run.trajectories:
            params = fits.get(traj.test_example_id)
            if params is None:
                continue
            out[traj.test_example_id] = simulate(
                params, run.curriculum, traj.initial_loss
            )
        return out

    return MethodSpec(name, run_sims)


def weights_method(
    name: str, weights_by_tid: Mapping[int, np.ndarray], n: int
) -> MethodSpec:
    """Treat per-example additive weights as a simulator."""
    fits = {
        tid: SimulatorParams(
            test_example_id=tid,
            variant=SimulatorVariant.ADDITIVE,
            n=n,
            a=None,
            b=np.asarray(b, dtype=float),
        )
        for tid, b in weights_by_tid.items()
    }
    return simulator_method(name, fits)


def averaged_tracin_weights(
    traces: Mapping[str, CheckpointTrace],
    fit_run_ids: Sequence[str],
    test_example_id: int,
    checkpoint_budget: int = DEFAULT_CHECKPOINT_BUDGET,
) -> InfluenceScores:
    """Checkpoint scores averaged across runs at a fixed checkpoint budget.

    Every training example is scored at each selected checkpoint of
    each run, whether or not the run consumed it; the per-run score
    vectors are averaged and the normalizer is the mean checkpoint
    count, so the implied additive weight is -mean score / budget.
    """
    if not fit_run_ids:
        raise ValidationError("averaged_tracin_weights: no fit runs")
    total = None
    norm_total = None
    for rid in fit_run_ids:
        trace = traces.get(rid)
        if trace is None:
            raise DataError(f"averaged_tracin_weights: no trace for run {rid}")
        sub = select_checkpoints(trace, checkpoint_budget)
        per_run = tracin_cp(sub, range(1, sub.n_train + 1), test_example_id)
        if total is None:
            total = per_run.scores.copy()
            norm_total = per_run.normalizers.copy()
        else:
            total += per_run.scores
            norm_total += per_run.normalizers
    count = float(len(fit_run_ids))
    return InfluenceScores(
        test_example_id,
        ScoreMethod.TRACIN_CP,
        total / count,
        norm_total / count,
    )


def pooled_rescale(spec: MethodSpec, runs: Sequence[Run]) -> float:
    """Least-squares scale for a method's predictions, pooled over runs.

    Pools every (predicted, actual) pair over all recorded steps of all
    tracked examples in `runs` and returns the factor minimizing the
    squared error of scale * predicted.
    """
    preds: list[float] = []
    acts: list[float] = []
    for run in runs:
        sims = spec.simulate(run)
        for traj in run.trajectories:
            sim = sims.get(traj.test_example_id)
            if sim is None:
                continue
            for t in traj.recorded_steps:
                p = sim.loss_at(t)
                if not np.isfinite(p):
                    continue
                preds.append(p)
                acts.append(traj.loss_at(t))
    if not preds:
        raise NoDataError("pooled_rescale: no finite predictions to scale")
    sigma, _ = optimal_rescale(preds, acts)
    return sigma


def rescaled_method(spec: MethodSpec, sigma: float) -> MethodSpec:
    """Same method with every predicted loss multiplied by `sigma`."""

    def run_sims(run: Run) -> dict[int, SimulatedTrajectory]:
        out = {}
        for tid, sim in spec.simulate(run).items():
            out[tid] = SimulatedTrajectory(
                test_example_id=sim.test_example_id,
                initial_loss=sigma * sim.initial_loss,
                losses=tuple(sigma * v for v in sim.losses),
                diverged_at=sim.diverged_at,
            )
        return out

    return MethodSpec(f"{spec.name}*{sigma:.3g}", run_sims)


# ---------------------------------------------------------------------------
# fitted weights vs checkpoint scores on one instrumented collection


@dataclass(frozen=True)
class DeskOutcome:
    report: EvalReport
    fit: FitResult
    sigma: float | None
    linear_name: str
    tracin_name: str


def desk_comparison(
    run_set: RunSet,
    traces: Mapping[str, CheckpointTrace],
    val_runs: int,
    lam: float | None = None,
    checkpoint_budget: int = DEFAULT_CHECKPOINT_BUDGET,
    rescale: bool = True,
) -> DeskOutcome:
    """Fitted full weights vs averaged checkpoint scores, future runs held out.

    The checkpoint method gets the better end of the stick: the same
    fit runs, a least-squares rescale chosen on the validation runs
    (when `rescale`), and its stated checkpoint budget per run.
    """
    fit = fit_collection(run_set, SimulatorVariant.LINEAR, lam=lam, val_runs=val_runs)
    linear_spec = simulator_method("fitted_linear", fit.fits)

    n = run_set.n
    weights = {}
    for tid in sorted(fit.fits):
        scores = averaged_tracin_weights(
            traces, fit.fit_run_ids, tid, checkpoint_budget
        )
        weights[tid] = scores.additive_weights()
    tracin_spec = weights_method(
        f"tracin_cp@{checkpoint_budget}", weights, n
    )
    sigma = None
    if rescale:
        _, validation, _ = split_runs(run_set, val_runs)
        scale_runs = validation if validation else run_set.past_runs()
        sigma = pooled_rescale(tracin_spec, scale_runs)
        tracin_spec = rescaled_method(tracin_spec, sigma)

    _, _, future = split_runs(run_set, val_runs)
    if not future:
        raise NoDataError("desk_comparison: log has no future runs to evaluate on")
    report = compare_methods([linear_spec, tracin_spec], future)
    return DeskOutcome(
        report=report,
        fit=fit,
        sigma=sigma,
        linear_name=linear_spec.name,
        tracin_name=tracin_spec.name,
    )


# ---------------------------------------------------------------------------
# counterfactual reports


def _none_if_nan(x: float) -> float | None:
    return None if not math.isfinite(x) else float(x)


def _sim_doc(sim: SimulatedTrajectory) -> dict:
    return {
        "initial_loss": sim.initial_loss,
        "losses": [_none_if_nan(v) for v in sim.losses],
        "final_loss": _none_if_nan(sim.final_loss),
        "diverged_at": sim.diverged_at,
    }


def what_if_report(
    fits: Mapping[int, SimulatorParams],
    run: Run,
    edits: Sequence[CurriculumEdit],
    test_ids: Sequence[int] | None = None,
) -> dict:
    """Baseline vs edited rollouts for one run, as a plain document.

    Both rollouts start from the run's recorded initial losses; the
    baseline replays the recorded curriculum, the other the edited one.
    Requested test ids must be both fitted and tracked by the run.
    """
    if test_ids is None:
        ids = sorted(set(fits) & set(run.tracked_ids))
        if not ids:
            raise NoDataError(
                f"what_if_report: run {run.run_id} tracks no fitted test example"
            )
    else:
        ids = sorted(set(test_ids))
        for tid in ids:
            if tid not in fits:
                raise ValidationError(f"what_if_report: no fitted weights for test example {tid}")
            if run.trajectory_for(tid) is None:
                raise ValidationError(
                    f"what_if_report: run {run.run_id} does not track test example {tid}"
                )
    edited = apply_edits(run.curriculum, list(edits))
    results = []
    for tid in ids:
        traj = run.trajectory_for(tid)
        base_sim = simulate(fits[tid], run.curriculum, traj.initial_loss)
        edit_sim = simulate(fits[tid], edited, traj.initial_loss)
        delta = edit_sim.final_loss - base_sim.final_loss
        last = traj.last_recorded_step
        results.append(
            {
                "test_example_id": tid,
                "baseline": _sim_doc(base_sim),
                "edited": _sim_doc(edit_sim),
                "delta_final": _none_if_nan(delta),
                "actual_final": traj.loss_at(last) if last > 0 else None,
            }
        )
    return {
        "run_id": run.run_id,
        "edits": [edit_to_doc(e) for e in edits],
        "baseline_steps": run.curriculum.num_steps,
        "edited_steps": edited.num_steps,
        "results": results,
    }
