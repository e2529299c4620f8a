"""Evaluation of simulated trajectories against held-out recorded runs.

Two headline numbers per (method, run) pair: mean squared error over
every recorded step of every tracked example, and the Spearman rank
correlation between predicted and actual final losses across examples.
Rank correlation is undefined when either side has zero rank variance;
those cells are carried as NaN and excluded from aggregate means.
"""

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import math

import numpy as np
from scipy.stats import rankdata

from .errors import NoDataError, RunSimError, UndefinedStatisticError, ValidationError
from .rollout import SimulatedTrajectory
from .runs import Run

__all__ = [
    "all_steps_mse",
    "final_step_spearman",
    "final_loss_vectors",
    "MethodSpec",
    "MethodRunResult",
    "MethodEvaluation",
    "EvalReport",
    "compare_methods",
    "CostReport",
    "cost_model",
    "trajectory_rows",
]


def all_steps_mse(simulated: Mapping[int, SimulatedTrajectory], run: Run) -> float:
    """Mean over examples of the per-example mean squared error.

    Per example the mean runs over the run's recorded steps; examples
    absent from `simulated` are skipped.  A diverged simulation
    contributes NaN, which propagates to the result.
    """
    per_example: list[float] = []
    for traj in run.trajectories:
        sim = simulated.get(traj.test_example_id)
        if sim is None:
            continue
        steps = traj.recorded_steps
        if not steps:
            continue
        errs = [(sim.loss_at(t) - traj.loss_at(t)) ** 2 for t in steps]
        per_example.append(sum(errs) / len(errs))
    if not per_example:
        raise NoDataError(
            f"all_steps_mse: run {run.run_id} shares no tracked examples with the simulations"
        )
    return float(sum(per_example) / len(per_example))


def final_step_spearman(predicted: Sequence[float], actual: Sequence[float]) -> float:
    """Spearman rank correlation, ties averaged.

    Computed as the Pearson correlation of fractional ranks.  Raises
    UndefinedStatisticError when fewer than two pairs exist, when any
    value is non-finite, or when either side's ranks have zero variance.
    """
    p = np.asarray(predicted, dtype=float)
    a = np.asarray(actual, dtype=float)
    if p.shape != a.shape or p.ndim != 1:
        raise ValidationError(
            f"final_step_spearman: shapes {p.shape} and {a.shape} must match and be 1-d"
        )
    if len(p) < 2:
        raise UndefinedStatisticError(
            f"final_step_spearman: needs >= 2 pairs, got {len(p)}"
        )
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(a))):
        raise UndefinedStatisticError("final_step_spearman: non-finite values")
    rp = rankdata(p, method="average")
    ra = rankdata(a, method="average")
    sp = rp.std()
    sa = ra.std()
    if sp == 0.0 or sa == 0.0:
        raise UndefinedStatisticError(
            "final_step_spearman: constant ranks on one side"
        )
    cov = float(((rp - rp.mean()) * (ra - ra.mean())).mean())
    return cov / (sp * sa)


def final_loss_vectors(
    simulated: Mapping[int, SimulatedTrajectory], run: Run
) -> tuple[list[float], list[float], list[int]]:
    """Aligned (predicted, actual, ids) at each trajectory's last recorded step."""
    pred: list[float] = []
    act: list[float] = []
    ids: list[int] = []
    for traj in run.trajectories:
        sim = simulated.get(traj.test_example_id)
        if sim is None:
            continue
        t = traj.last_recorded_step
        if t == 0:  # only the starting loss is known
            continue
        pred.append(sim.loss_at(t))
        act.append(traj.loss_at(t))
        ids.append(traj.test_example_id)
    return pred, act, ids


@dataclass(frozen=True)
class MethodSpec:
    """A named way of producing simulated trajectories for a recorded run."""

    name: str
    simulate: Callable[[Run], Mapping[int, SimulatedTrajectory]]


@dataclass(frozen=True)
class MethodRunResult:
    run_id: str
    mse: float  # NaN when the method failed on this run
    spearman: float  # NaN when undefined
    error: str | None = None


def _defined(values: Sequence[float]) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    return arr[np.isfinite(arr)]


@dataclass(frozen=True)
class MethodEvaluation:
    name: str
    per_run: tuple[MethodRunResult, ...]

    def _stats(self, attr: str) -> tuple[float, float, int]:
        vals = _defined([getattr(r, attr) for r in self.per_run])
        if len(vals) == 0:
            return math.nan, math.nan, 0
        return float(vals.mean()), float(vals.std()), len(vals)  # population std

    @property
    def mse_stats(self) -> tuple[float, float, int]:
        return self._stats("mse")

    @property
    def spearman_stats(self) -> tuple[float, float, int]:
        return self._stats("spearman")


def _nan_to_none(x: float) -> float | None:
    return None if not math.isfinite(x) else float(x)


@dataclass(frozen=True)
class EvalReport:
    methods: tuple[MethodEvaluation, ...]
    run_ids: tuple[str, ...]

    def method(self, name: str) -> MethodEvaluation:
        for m in self.methods:
            if m.name == name:
                return m
        raise KeyError(name)

    def to_doc(self) -> dict:
        out = {"run_ids": list(self.run_ids), "methods": []}
        for m in self.methods:
            mse_mean, mse_std, mse_n = m.mse_stats
            sp_mean, sp_std, sp_n = m.spearman_stats
            out["methods"].append(
                {
                    "name": m.name,
                    "mean_all_steps_mse": _nan_to_none(mse_mean),
                    "std_all_steps_mse": _nan_to_none(mse_std),
                    "mse_defined": mse_n,
                    "mean_final_spearman": _nan_to_none(sp_mean),
                    "std_final_spearman": _nan_to_none(sp_std),
                    "spearman_defined": sp_n,
                    "per_run": [
                        {
                            "run_id": r.run_id,
                            "all_steps_mse": _nan_to_none(r.mse),
                            "final_spearman": _nan_to_none(r.spearman),
                            "error": r.error,
                        }
                        for r in m.per_run
                    ],
                }
            )
        return out

    def to_table(self) -> str:
        """Fixed-width text summary, one method per row."""
        header = (
            f"{'method':<24} {'mse mean':>12} {'mse std':>12} {'n':>5} "
            f"{'rho mean':>9} {'rho std':>9} {'n':>5}"
        )
        rows = [header, "-" * len(header)]
        total = len(self.run_ids)

        def fmt(x: float, width: int) -> str:
            return f"{'-':>{width}}" if not math.isfinite(x) else f"{x:>{width}.6g}"

        for m in self.methods:
            mse_mean, mse_std, mse_n = m.mse_stats
            sp_mean, sp_std, sp_n = m.spearman_stats
            rows.append(
                f"{m.name:<24} {fmt(mse_mean, 12)} {fmt(mse_std, 12)} "
                f"{mse_n:>3}/{total} {fmt(sp_mean, 9)} {fmt(sp_std, 9)} {sp_n:>3}/{total}"
            )
        return "\n".join(rows)


def compare_methods(
    methods: Sequence[MethodSpec], future_runs: Sequence[Run]
) -> EvalReport:
    """Evaluate every method on every run, one row per pair.

    A method failure on a run (any package error) becomes a NaN cell
    with the message preserved; it never aborts the other cells.
    """
    if not methods:
        raise ValidationError("compare_methods: no methods")
    if not future_runs:
        raise ValidationError("compare_methods: no runs to evaluate on")
    evaluations = []
    for spec in methods:
        results = []
        for run in future_runs:
            try:
                sims = spec.simulate(run)
                mse = all_steps_mse(sims, run)
            except RunSimError as exc:
                results.append(
                    MethodRunResult(run.run_id, math.nan, math.nan, str(exc))
                )
                continue
            pred, act, _ = final_loss_vectors(sims, run)
            try:
                rho = final_step_spearman(pred, act)
            except UndefinedStatisticError:
                rho = math.nan
            results.append(MethodRunResult(run.run_id, mse, rho, None))
        evaluations.append(MethodEvaluation(spec.name, tuple(results)))
    return EvalReport(tuple(evaluations), tuple(r.run_id for r in future_runs))


def trajectory_rows(
    simulated: Mapping[int, SimulatedTrajectory], run: Run
) -> list[dict]:
    """Flat per-step rows (run, example, step, predicted, actual) for dumps."""
    rows = []
    for traj in run.trajectories:
        sim = simulated.get(traj.test_example_id)
        if sim is None:
            continue
        for t in traj.recorded_steps:
            predicted = sim.loss_at(t)
            rows.append(
                {
                    "run_id": run.run_id,
                    "test_example_id": traj.test_example_id,
                    "step": t,
                    "predicted": _nan_to_none(predicted),
                    "actual": traj.loss_at(t),
                }
            )
    return rows


# ---------------------------------------------------------------------------
# projected evaluation cost


@dataclass(frozen=True)
class CostReport:
    """Projected work to score n train against m test examples.

    Loss-table fitting needs two passes over the n x m loss grid (one
    with, one without each candidate); gradient methods need one
    gradient per train and per test example at each of K checkpoints.
    """

    n_train: int
    m_test: int
    checkpoints: int
    loss_eval_cost: float
    grad_eval_cost: float

    @property
    def additive_fit_cost(self) -> float:
        return 2.0 * self.n_train * self.m_test * self.loss_eval_cost

    @property
    def linear_fit_cost(self) -> float:
        return 2.0 * self.additive_fit_cost

    @property
    def gradient_method_cost(self) -> float:
        return (self.n_train + self.m_test) * self.checkpoints * self.grad_eval_cost

    @property
    def crossover_checkpoints(self) -> float:
        """Checkpoint count where gradient scoring overtakes additive fitting
        when a gradient costs twice a loss evaluation."""
        return self.n_train * self.m_test / (self.n_train + self.m_test)

    def to_doc(self) -> dict:
        return {
            "n_train": self.n_train,
            "m_test": self.m_test,
            "checkpoints": self.checkpoints,
            "loss_eval_cost": self.loss_eval_cost,
            "grad_eval_cost": self.grad_eval_cost,
            "additive_fit_cost": self.additive_fit_cost,
            "linear_fit_cost": self.linear_fit_cost,
            "gradient_method_cost": self.gradient_method_cost,
            "crossover_checkpoints": self.crossover_checkpoints,
        }

    def to_table(self) -> str:
        doc = self.to_doc()
        width = max(len(k) for k in doc)
        return "\n".join(f"{k:<{width}}  {doc[k]:g}" for k in doc)


def cost_model(
    n_train: int,
    m_test: int,
    checkpoints: int,
    loss_eval_cost: float = 1.0,
    grad_eval_cost: float = 2.0,
) -> CostReport:
    if n_train < 1 or m_test < 1 or checkpoints < 1:
        raise ValidationError("cost_model: n_train, m_test, checkpoints must be >= 1")
    if loss_eval_cost <= 0 or grad_eval_cost <= 0:
        raise ValidationError("cost_model: per-evaluation costs must be > 0")
    return CostReport(n_train, m_test, checkpoints, loss_eval_cost, grad_eval_cost)
