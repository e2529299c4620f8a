"""Fitting loss-update weights from recorded runs by ridge regression.

Each observed step t of a past run with both L_{t-1} and L_t recorded
contributes one row.  For the LINEAR variant the row is
[multiplicity_i * L_{t-1} | multiplicity_i] over two n-wide blocks
(multiplicative then additive) with target L_t; ADDITIVE keeps only the
additive block and regresses the per-step delta; MULTIPLICATIVE keeps
only the multiplicative block.  The ridge solution is
(X^T X + lam I)^-1 X^T y for lam > 0, and the minimum-norm
least-squares solution (rank-revealing) at lam = 0.
"""

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import math

import numpy as np
import scipy.linalg

from .errors import (
    FittingError,
    NoDataError,
    NumericError,
    UnderdeterminedError,
    UnsupportedSettingError,
    ValidationError,
)
from .runs import Run
from .simparams import SimulatorParams, SimulatorVariant

__all__ = [
    "DesignProblem",
    "RidgeSolution",
    "IdentifiabilityReport",
    "ClosedFormAdditive",
    "build_design",
    "solve_ridge",
    "numerical_rank",
    "fit_simulator",
    "fit_univariate_bs1",
    "closed_form_additive",
    "select_lambda",
    "check_identifiability",
    "DEFAULT_LAMBDA_GRID",
]

# 0 plus a log-spaced sweep; ties on validation MSE resolve toward larger values.
DEFAULT_LAMBDA_GRID: tuple[float, ...] = (0.0,) + tuple(10.0 ** e for e in range(-6, 2))


@dataclass(frozen=True)
class DesignProblem:
    """Assembled regression problem for one (test example, variant) pair.

    `row_index` locates each row as (run_id, step); `row_batches` keeps
    the consumed batch per row and `prev_losses` the L_{t-1} value, both
    needed by the identifiability checks.
    """

    variant: SimulatorVariant
    test_example_id: int
    n: int
    x: np.ndarray
    y: np.ndarray
    row_index: tuple[tuple[str, int], ...]
    row_batches: tuple[tuple[int, ...], ...] = field(repr=False, default=())
    prev_losses: np.ndarray = field(repr=False, default=None)

    @property
    def num_rows(self) -> int:
        return self.x.shape[0]

    @property
    def num_params(self) -> int:
        return self.x.shape[1]

    def occurrence_counts(self) -> np.ndarray:
        """Per example, the number of rows whose batch contains it."""
        counts = np.zeros(self.n, dtype=int)
        for batch in self.row_batches:
            for i in sorted(set(batch)):
                counts[i - 1] += 1
        return counts


def _usable_rows(run: Run, test_example_id: int):
    """Yield (step, batch, prev_loss, cur_loss) for consecutive recorded pairs."""
    traj = run.trajectory_for(test_example_id)
    if traj is None:
        return
    for t in range(1, run.num_steps + 1):
        prev = traj.loss_at(t - 1)
        cur = traj.loss_at(t)
        if prev is None or cur is None:
            continue
        yield t, run.curriculum.batch(t), prev, cur


def build_design(
    runs: Sequence[Run], test_example_id: int, variant: SimulatorVariant
) -> DesignProblem:
    """Assemble X, y over every usable step of `runs` for one test example.

    Runs are scanned in the given order, steps ascending; a run that does
    not track the test example contributes nothing.  Raises NoDataError
    when no usable row exists.
    """
    variant = SimulatorVariant(variant)
    if not runs:
        raise NoDataError("build_design: no runs given")
    n = runs[0].curriculum.n
    for run in runs:
        if run.curriculum.n != n:
            raise ValidationError(
                f"build_design: run {run.run_id} has n={run.curriculum.n}, expected {n}"
            )
    rows: list[tuple[str, int]] = []
    batches: list[tuple[int, ...]] = []
    prev_list: list[float] = []
    cur_list: list[float] = []
    for run in runs:
        for t, batch, prev, cur in _usable_rows(run, test_example_id):
            rows.append((run.run_id, t))
            batches.append(batch)
            prev_list.append(prev)
            cur_list.append(cur)
    if not rows:
        raise NoDataError(
            f"build_design: no usable (L_t-1, L_t) pairs for test example {test_example_id}"
        )
    s = len(rows)
    prev_arr = np.array(prev_list)
    cur_arr = np.array(cur_list)
    if variant == SimulatorVariant.LINEAR:
        x = np.zeros((s, 2 * n))
        y = cur_arr.copy()
    elif variant == SimulatorVariant.ADDITIVE:
        x = np.zeros((s, n))
        y = cur_arr - prev_arr  # delta targets: alpha pinned to 1
    else:
        x = np.zeros((s, n))
        y = cur_arr.copy()
    for r, batch in enumerate(batches):
        for i in batch:  # one pass per occurrence: multiplicity accumulates
            col = i - 1
            if variant == SimulatorVariant.LINEAR:
                x[r, col] += prev_arr[r]
                x[r, n + col] += 1.0
            elif variant == SimulatorVariant.ADDITIVE:
                x[r, col] += 1.0
            else:
                x[r, col] += prev_arr[r]
    x.setflags(write=False)
    y.setflags(write=False)
    prev_arr.setflags(write=False)
    return DesignProblem(
        variant=variant,
        test_example_id=test_example_id,
        n=n,
        x=x,
        y=y,
        row_index=tuple(rows),
        row_batches=tuple(batches),
        prev_losses=prev_arr,
    )


@dataclass(frozen=True)
class RidgeSolution:
    """Weights plus, for lam = 0, the rank reported by the least-squares solve."""

    w: np.ndarray
    rank: int | None
    rank_deficient: bool | None


def _solve_least_squares(x: np.ndarray, y: np.ndarray, lam: float) -> RidgeSolution:
    s, p = x.shape
    if s == 0:
        # pure-penalty minimizer; rank 0 trivially deficient when lam = 0
        return RidgeSolution(np.zeros(p), 0 if lam == 0 else None, True if lam == 0 else None)
    if lam > 0:
        gram = x.T @ x + lam * np.eye(p)
        w = scipy.linalg.solve(gram, x.T @ y, assume_a="pos")
        return RidgeSolution(w, None, None)
    w, _, rank, _ = np.linalg.lstsq(x, y, rcond=None)
    return RidgeSolution(w, int(rank), bool(rank < p))


def solve_ridge(problem: DesignProblem, lam: float) -> RidgeSolution:
    """Ridge weights for a design problem.

    lam > 0 solves the SPD normal equations; lam = 0 returns the
    minimum-norm least-squares solution with rank deficiency flagged.
    """
    if not (isinstance(lam, (int, float)) and math.isfinite(lam)) or lam < 0:
        raise ValidationError(f"solve_ridge: lambda must be finite and >= 0, got {lam!r}")
    if problem.num_rows and not (
        np.all(np.isfinite(problem.x)) and np.all(np.isfinite(problem.y))
    ):
        raise NumericError("solve_ridge: design contains non-finite entries")
    return _solve_least_squares(problem.x, problem.y, float(lam))


def numerical_rank(x: np.ndarray) -> tuple[int, float, float]:
    """(rank, largest singular value, tolerance used).

    Tolerance is max(S, p) * eps * sigma_max, matching the least-squares
    solver's default cutoff.
    """
    if x.size == 0:
        return 0, 0.0, 0.0
    svals = np.linalg.svd(x, compute_uv=False)
    sigma_max = float(svals[0])
    tol = max(x.shape) * np.finfo(float).eps * sigma_max
    return int(np.sum(svals > tol)), sigma_max, tol


def _unpack(problem: DesignProblem, w: np.ndarray) -> tuple[np.ndarray | None, np.ndarray | None]:
    if problem.variant == SimulatorVariant.LINEAR:
        return w[: problem.n], w[problem.n :]
    if problem.variant == SimulatorVariant.ADDITIVE:
        return None, w
    return w, None


def fit_simulator(
    runs: Sequence[Run],
    test_example_id: int,
    variant: SimulatorVariant,
    lam: float = 0.0,
) -> SimulatorParams:
    """Build the design over `runs` and solve it for one test example."""
    problem = build_design(runs, test_example_id, variant)
    solution = solve_ridge(problem, lam)
    a, b = _unpack(problem, solution.w)
    residual = problem.y - problem.x @ solution.w
    rank, _, _ = numerical_rank(problem.x)
    return SimulatorParams(
        test_example_id=test_example_id,
        variant=SimulatorVariant(variant),
        n=problem.n,
        a=a,
        b=b,
        lam=float(lam),
        rss=float(residual @ residual),
        rank=rank,
        rows=problem.num_rows,
    )


def fit_univariate_bs1(
    runs: Sequence[Run], test_example_id: int, train_example_id: int, lam: float = 0.0
) -> tuple[float, float]:
    """Closed-form (A_i, B_i) when example i only ever appears alone.

    Minimizes sum over its occurrences of (L_t - A_i L_{t-1} - B_i)^2
    plus lam (A_i^2 + B_i^2).  Needs two occurrences with distinct
    L_{t-1} values when lam = 0.
    """
    xs: list[float] = []
    ys: list[float] = []
    for run in runs:
        for t, batch, prev, cur in _usable_rows(run, test_example_id):
            if train_example_id not in batch:
                continue
            if len(batch) != 1:
                raise UnsupportedSettingError(
                    f"fit_univariate_bs1: run {run.run_id} step {t} has batch size "
                    f"{len(batch)}, defined only for batch size 1"
                )
            xs.append(prev)
            ys.append(cur)
    if not xs:
        raise NoDataError(
            f"fit_univariate_bs1: example {train_example_id} has no usable occurrences"
        )
    m = np.column_stack([np.array(xs), np.ones(len(xs))])
    solution = _solve_least_squares(m, np.array(ys), float(lam))
    if lam == 0 and solution.rank is not None and solution.rank < 2:
        raise UnderdeterminedError(
            f"fit_univariate_bs1: example {train_example_id} needs two occurrences with "
            "distinct previous losses when lambda = 0"
        )
    return float(solution.w[0]), float(solution.w[1])


@dataclass(frozen=True)
class ClosedFormAdditive:
    """Per-example additive weights; NaN where the example never occurs."""

    values: np.ndarray
    occurrences: np.ndarray

    def present(self) -> np.ndarray:
        return self.occurrences > 0


def closed_form_additive(runs: Sequence[Run], test_example_id: int) -> ClosedFormAdditive:
    """B_i = -(mean loss drop over example i's occurrences), batch size 1 only."""
    if not runs:
        raise NoDataError("closed_form_additive: no runs given")
    n = runs[0].curriculum.n
    drops = np.zeros(n)
    counts = np.zeros(n, dtype=int)
    saw_any = False
    for run in runs:
        for t, batch, prev, cur in _usable_rows(run, test_example_id):
            saw_any = True
            if len(batch) != 1:
                raise UnsupportedSettingError(
                    f"closed_form_additive: run {run.run_id} step {t} has batch size "
                    f"{len(batch)}, defined only for batch size 1"
                )
            i = batch[0] - 1
            drops[i] += prev - cur
            counts[i] += 1
    if not saw_any:
        raise NoDataError(
            f"closed_form_additive: no usable steps for test example {test_example_id}"
        )
    values = np.full(n, np.nan)
    nz = counts > 0
    values[nz] = -(drops[nz] / counts[nz])
    return ClosedFormAdditive(values=values, occurrences=counts)


def select_lambda(
    fit_runs: Sequence[Run],
    validation_runs: Sequence[Run],
    test_ids: Iterable[int],
    variant: SimulatorVariant,
    grid: Sequence[float] = DEFAULT_LAMBDA_GRID,
) -> float:
    """Pick the grid value with the lowest mean validation MSE.

    Fits every test id on `fit_runs` at each candidate, simulates the
    validation runs from their recorded L0, and scores with the
    all-steps MSE.  Candidates whose fit or evaluation fails are
    skipped; ties resolve toward the larger lambda.
    """
    from .analysis import all_steps_mse
    from .rollout import simulate

    test_ids = sorted(set(test_ids))
    if not test_ids:
        raise ValidationError("select_lambda: no test ids given")
    if not validation_runs:
        raise ValidationError("select_lambda: no validation runs given")
    fit_ids = {r.run_id for r in fit_runs}
    overlap = fit_ids & {r.run_id for r in validation_runs}
    if overlap:
        raise ValidationError(f"select_lambda: runs in both splits: {sorted(overlap)}")
    candidates = sorted(set(float(g) for g in grid))
    if not candidates:
        raise ValidationError("select_lambda: empty grid")
    # designs do not depend on lambda; assemble once per test id
    problems = {tid: build_design(fit_runs, tid, variant) for tid in test_ids}
    best_lam: float | None = None
    best_mse = math.inf
    failures: list[str] = []
    for lam in candidates:
        try:
            fitted: dict[int, SimulatorParams] = {}
            for tid, problem in problems.items():
                a, b = _unpack(problem, solve_ridge(problem, lam).w)
                fitted[tid] = SimulatorParams(
                    test_example_id=tid, variant=SimulatorVariant(variant),
                    n=problem.n, a=a, b=b, lam=lam,
                )
            run_scores = []
            for run in validation_runs:
                predicted = {}
                for tid in test_ids:
                    traj = run.trajectory_for(tid)
                    if traj is None:
                        continue
                    predicted[tid] = simulate(fitted[tid], run.curriculum, traj.initial_loss)
                if predicted:
                    run_scores.append(all_steps_mse(predicted, run))
            if not run_scores:
                raise NoDataError("no validation run tracks any requested test id")
            mse = float(np.mean(run_scores))
            if not math.isfinite(mse):
                raise NumericError(f"validation MSE not finite at lambda={lam}")
        except Exception as exc:  # noqa: BLE001  - any candidate failure just skips it
            failures.append(f"lambda={lam:g}: {exc}")
            continue
        if mse <= best_mse:  # <= so exact ties move toward larger lambda
            best_mse = mse
            best_lam = lam
    if best_lam is None:
        raise FittingError(
            "select_lambda: every candidate failed: " + "; ".join(failures)
        )
    return best_lam


@dataclass(frozen=True)
class IdentifiabilityReport:
    """Rank diagnostics plus the three uniqueness conditions.

    A LINEAR design has a unique lam = 0 solution iff X has independent
    columns; the three checks flag the known ways that fails: too few
    rows, an example observed fewer than twice, and constant previous
    losses making an example's two columns parallel.
    """

    variant: SimulatorVariant
    rows: int
    num_params: int
    rank: int
    sigma_max: float
    tolerance: float
    insufficient_rows: bool
    underobserved_examples: tuple[int, ...]
    constant_loss_examples: tuple[int, ...]

    @property
    def full_rank(self) -> bool:
        return self.rank == self.num_params

    @property
    def unique_solution(self) -> bool:
        return self.full_rank

    def to_doc(self) -> dict:
        return {
            "variant": self.variant.value,
            "rows": self.rows,
            "num_params": self.num_params,
            "rank": self.rank,
            "full_rank": self.full_rank,
            "unique_solution": self.unique_solution,
            "sigma_max": self.sigma_max,
            "tolerance": self.tolerance,
            "insufficient_rows": self.insufficient_rows,
            "underobserved_examples": list(self.underobserved_examples),
            "constant_loss_examples": list(self.constant_loss_examples),
        }


def check_identifiability(problem: DesignProblem) -> IdentifiabilityReport:
    """Numerical rank of X plus which uniqueness conditions fail."""
    rank, sigma_max, tol = numerical_rank(problem.x)
    counts = problem.occurrence_counts()
    underobserved = tuple(int(i + 1) for i in np.flatnonzero(counts < 2))
    constant: list[int] = []
    if problem.variant == SimulatorVariant.LINEAR:
        per_example: dict[int, list[float]] = {}
        for batch, prev in zip(problem.row_batches, problem.prev_losses):
            for i in set(batch):
                per_example.setdefault(i, []).append(float(prev))
        for i in sorted(per_example):
            vals = per_example[i]
            spread = max(vals) - min(vals)
            if spread <= 1e-12 * max(1.0, max(abs(v) for v in vals)):
                constant.append(i)
    return IdentifiabilityReport(
        variant=problem.variant,
        rows=problem.num_rows,
        num_params=problem.num_params,
        rank=rank,
        sigma_max=sigma_max,
        tolerance=tol,
        insufficient_rows=problem.num_rows < problem.num_params,
        underobserved_examples=underobserved,
        constant_loss_examples=tuple(constant),
    )
