"""Gradient-based attribution scores and their reading as simulators.

Scores come in two families: loss-delta scores summed over a run's
recorded steps (ideal variant, batch size 1 only), and checkpoint
scores summed over eta_t <grad_train, grad_test> inner products.
Dividing a score by its normalizer and negating gives an additive
per-step weight, so every score doubles as a simulator.

A CheckpointTrace bundles saved parameter vectors with closures that
evaluate per-example losses and gradients at those parameters; the
closures come from whatever trained the model (see the toy lab).
"""

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Mapping, Sequence

import math

import numpy as np
import scipy.linalg

from . import docio
from .errors import (
    ConditioningError,
    DataError,
    NoDataError,
    UndefinedStatisticError,
    UnsupportedSettingError,
    ValidationError,
)
from .runs import Curriculum, Run
from .simparams import SimulatorParams, SimulatorVariant
from .rollout import SimulatedTrajectory, simulate

__all__ = [
    "ScoreMethod",
    "InfluenceScores",
    "CheckpointTrace",
    "select_checkpoints",
    "tracin_ideal",
    "expected_tracin_ideal",
    "hypothetical_loss_reduction",
    "tracin_cp",
    "hypothetical_additive_fit",
    "hypothetical_linear_fit",
    "influence_function_score",
    "second_order_additive_fit",
    "simulate_from_scores",
    "optimal_rescale",
    "scores_doc",
    "scores_from_doc",
]

SCORES_DOC_VERSION = 1


class ScoreMethod(str, Enum):
    TRACIN_IDEAL = "tracin_ideal"
    EXPECTED_TRACIN_IDEAL = "expected_tracin_ideal"
    TRACIN_CP = "tracin_cp"
    INFLUENCE_FUNCTION = "influence_function"


@dataclass(frozen=True)
class InfluenceScores:
    """Per-training-example scores for one test example.

    `normalizers[i]` is the count the score is averaged over when read
    as a simulator weight: occurrence count for loss-delta scores,
    checkpoint count for checkpoint scores.  Zero marks an example the
    score says nothing about (its score entry is 0).
    """

    test_example_id: int
    method: ScoreMethod
    scores: np.ndarray
    normalizers: np.ndarray

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=float)
        norms = np.asarray(self.normalizers, dtype=float)
        if scores.ndim != 1 or scores.shape != norms.shape:
            raise ValidationError("scores and normalizers must be 1-d and congruent")
        if not np.all(np.isfinite(scores)) or not np.all(np.isfinite(norms)):
            raise ValidationError("scores/normalizers must be finite")
        if np.any(norms < 0):
            raise ValidationError("normalizers must be >= 0")
        scores.setflags(write=False)
        norms.setflags(write=False)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "normalizers", norms)
        object.__setattr__(self, "method", ScoreMethod(self.method))

    @property
    def n(self) -> int:
        return len(self.scores)

    def additive_weights(self) -> np.ndarray:
        """B_i = -score_i / normalizer_i; 0 where the score is silent."""
        b = np.zeros(self.n)
        nz = self.normalizers > 0
        b[nz] = -self.scores[nz] / self.normalizers[nz]
        return b


@dataclass(frozen=True)
class CheckpointTrace:
    """Saved parameter vectors plus evaluation closures for one run.

    `steps[k]` is the step index theta_k was taken after (0 = init);
    `etas[k]` is the learning rate of the step following theta_k.  The
    gradient/loss callables take (theta, example id); `train_gradients`
    is the vectorized form over an id array.  `training_hessian`, when
    present, returns the Hessian of the run's training objective.
    """

    steps: tuple[int, ...]
    etas: tuple[float, ...]
    thetas: tuple[np.ndarray, ...]
    n_train: int
    train_gradient: Callable[[np.ndarray, int], np.ndarray]
    test_gradient: Callable[[np.ndarray, int], np.ndarray]
    test_loss: Callable[[np.ndarray, int], float]
    train_gradients: Callable[[np.ndarray, Sequence[int]], np.ndarray] | None = None
    training_hessian: Callable[[np.ndarray], np.ndarray] | None = None
    hessian_train_ids: tuple[int, ...] = ()  # ids the Hessian averages over, for serialization
    run_id: str = ""

    def __post_init__(self):
        if not self.steps:
            raise ValidationError("trace: needs at least one checkpoint")
        if not (len(self.steps) == len(self.etas) == len(self.thetas)):
            raise ValidationError("trace: steps/etas/thetas lengths differ")
        if any(b <= a for a, b in zip(self.steps, self.steps[1:])):
            raise ValidationError("trace: checkpoint steps must be strictly increasing")
        if any(e < 0 or not math.isfinite(e) for e in self.etas):
            raise ValidationError("trace: learning rates must be finite and >= 0")

    @property
    def num_checkpoints(self) -> int:
        return len(self.steps)

    def _guard(self, vec: np.ndarray, k: int, example_id: int, kind: str) -> np.ndarray:
        if not np.all(np.isfinite(vec)):
            raise DataError(
                f"trace {self.run_id or '?'}: non-finite {kind} gradient at checkpoint "
                f"step {self.steps[k]} for example {example_id}"
            )
        return vec

    def train_grad(self, k: int, example_id: int) -> np.ndarray:
        if not 1 <= example_id <= self.n_train:
            raise DataError(
                f"trace {self.run_id or '?'}: no gradient for train example {example_id} "
                f"at checkpoint step {self.steps[k]}"
            )
        return self._guard(self.train_gradient(self.thetas[k], example_id), k, example_id, "train")

    def train_grad_matrix(self, k: int, ids: Sequence[int]) -> np.ndarray:
        for i in ids:
            if not 1 <= i <= self.n_train:
                raise DataError(
                    f"trace {self.run_id or '?'}: no gradient for train example {i} "
                    f"at checkpoint step {self.steps[k]}"
                )
        if self.train_gradients is not None:
            mat = np.asarray(self.train_gradients(self.thetas[k], ids))
        else:
            mat = np.stack([self.train_gradient(self.thetas[k], i) for i in ids])
        if not np.all(np.isfinite(mat)):
            raise DataError(
                f"trace {self.run_id or '?'}: non-finite train gradients at checkpoint "
                f"step {self.steps[k]}"
            )
        return mat

    def test_grad(self, k: int, test_example_id: int) -> np.ndarray:
        try:
            vec = self.test_gradient(self.thetas[k], test_example_id)
        except (KeyError, IndexError):
            raise DataError(
                f"trace {self.run_id or '?'}: no gradient for test example "
                f"{test_example_id} at checkpoint step {self.steps[k]}"
            ) from None
        return self._guard(np.asarray(vec), k, test_example_id, "test")

    def test_loss_at(self, k: int, test_example_id: int) -> float:
        try:
            value = float(self.test_loss(self.thetas[k], test_example_id))
        except (KeyError, IndexError):
            raise DataError(
                f"trace {self.run_id or '?'}: no loss for test example {test_example_id} "
                f"at checkpoint step {self.steps[k]}"
            ) from None
        if not math.isfinite(value):
            raise DataError(
                f"trace {self.run_id or '?'}: non-finite loss for test example "
                f"{test_example_id} at checkpoint step {self.steps[k]}"
            )
        return value


def select_checkpoints(trace: CheckpointTrace, count: int) -> CheckpointTrace:
    """Evenly spaced subset of `count` checkpoints (endpoints included)."""
    if count < 1:
        raise ValidationError(f"select_checkpoints: count must be >= 1, got {count}")
    k = trace.num_checkpoints
    if count >= k:
        return trace
    picks = sorted(set(int(round(i)) for i in np.linspace(0, k - 1, count)))
    return CheckpointTrace(
        steps=tuple(trace.steps[i] for i in picks),
        etas=tuple(trace.etas[i] for i in picks),
        thetas=tuple(trace.thetas[i] for i in picks),
        n_train=trace.n_train,
        train_gradient=trace.train_gradient,
        test_gradient=trace.test_gradient,
        test_loss=trace.test_loss,
        train_gradients=trace.train_gradients,
        training_hessian=trace.training_hessian,
        hessian_train_ids=trace.hessian_train_ids,
        run_id=trace.run_id,
    )


# ---------------------------------------------------------------------------
# loss-delta scores


def tracin_ideal(run: Run, test_example_id: int) -> InfluenceScores:
    """Sum of recorded loss drops over each example's occurrences.

    Defined for batch-size-1 runs with losses recorded at every
    occurrence boundary.
    """
    traj = run.trajectory_for(test_example_id)
    if traj is None:
        raise DataError(
            f"tracin_ideal: run {run.run_id} does not track test example {test_example_id}"
        )
    n = run.curriculum.n
    scores = np.zeros(n)
    counts = np.zeros(n)
    for t, batch in enumerate(run.curriculum.steps, start=1):
        if len(batch) != 1:
            raise UnsupportedSettingError(
                f"tracin_ideal: run {run.run_id} step {t} has batch size {len(batch)}, "
                "defined only for batch size 1"
            )
        prev = traj.loss_at(t - 1)
        cur = traj.loss_at(t)
        if prev is None or cur is None:
            raise DataError(
                f"tracin_ideal: run {run.run_id} step {t} lacks a recorded loss pair"
            )
        i = batch[0] - 1
        scores[i] += prev - cur
        counts[i] += 1.0
    return InfluenceScores(test_example_id, ScoreMethod.TRACIN_IDEAL, scores, counts)


def expected_tracin_ideal(runs: Sequence[Run], test_example_id: int) -> InfluenceScores:
    """Mean per-run score over the runs that consumed each example.

    The normalizer is the mean occurrence count over those same runs,
    which keeps -score/normalizer equal to the pooled additive closed
    form.  Examples in zero runs get score 0 with normalizer 0.
    """
    if not runs:
        raise NoDataError("expected_tracin_ideal: no runs given")
    n = runs[0].curriculum.n
    total_scores = np.zeros(n)
    total_counts = np.zeros(n)
    run_hits = np.zeros(n)
    for run in runs:
        per_run = tracin_ideal(run, test_example_id)
        hit = per_run.normalizers > 0
        total_scores[hit] += per_run.scores[hit]
        total_counts[hit] += per_run.normalizers[hit]
        run_hits[hit] += 1.0
    scores = np.zeros(n)
    norms = np.zeros(n)
    nz = run_hits > 0
    scores[nz] = total_scores[nz] / run_hits[nz]
    norms[nz] = total_counts[nz] / run_hits[nz]
    return InfluenceScores(test_example_id, ScoreMethod.EXPECTED_TRACIN_IDEAL, scores, norms)


# ---------------------------------------------------------------------------
# checkpoint scores


def hypothetical_loss_reduction(
    train_grad: np.ndarray, test_grad: np.ndarray, eta: float
) -> float:
    """First-order predicted test-loss drop from one step on one example."""
    g_i = np.asarray(train_grad, dtype=float)
    g_z = np.asarray(test_grad, dtype=float)
    if g_i.shape != g_z.shape or g_i.ndim != 1:
        raise ValidationError(
            f"hypothetical_loss_reduction: gradient shapes differ: {g_i.shape} vs {g_z.shape}"
        )
    if not (math.isfinite(eta) and eta >= 0):
        raise ValidationError(f"hypothetical_loss_reduction: eta must be finite >= 0, got {eta!r}")
    return float(eta * (g_i @ g_z))


def tracin_cp(
    trace: CheckpointTrace, train_ids: Sequence[int], test_example_id: int
) -> InfluenceScores:
    """Checkpoint scores sum_k eta_k <grad(z_i), grad(z)> at theta_k."""
    ids = sorted(set(train_ids))
    if not ids:
        raise ValidationError("tracin_cp: no train ids given")
    scores = np.zeros(trace.n_train)
    norms = np.zeros(trace.n_train)
    cols = np.array(ids) - 1
    for k in range(trace.num_checkpoints):
        g_z = trace.test_grad(k, test_example_id)
        g_mat = trace.train_grad_matrix(k, ids)
        scores[cols] += trace.etas[k] * (g_mat @ g_z)
    norms[cols] = trace.num_checkpoints
    return InfluenceScores(test_example_id, ScoreMethod.TRACIN_CP, scores, norms)


def hypothetical_additive_fit(
    trace: CheckpointTrace, train_ids: Sequence[int], test_example_id: int
) -> np.ndarray:
    """Additive weights from hypothetical one-example steps at each checkpoint.

    Computes the hypothetical next-step loss at every checkpoint, takes
    the loss deltas those imply, and returns their negative mean, one
    entry per requested example (0 elsewhere).
    """
    ids = sorted(set(train_ids))
    if not ids:
        raise ValidationError("hypothetical_additive_fit: no train ids given")
    cols = np.array(ids) - 1
    deltas = np.zeros(trace.n_train)
    for k in range(trace.num_checkpoints):
        loss_k = trace.test_loss_at(k, test_example_id)
        g_z = trace.test_grad(k, test_example_id)
        g_mat = trace.train_grad_matrix(k, ids)
        hypothetical = loss_k - trace.etas[k] * (g_mat @ g_z)
        deltas[cols] += loss_k - hypothetical
    b = np.zeros(trace.n_train)
    b[cols] = -deltas[cols] / trace.num_checkpoints
    return b


def hypothetical_linear_fit(
    trace: CheckpointTrace,
    train_ids: Sequence[int],
    test_example_id: int,
    lam: float = 0.0,
    targets: str = "hypothetical",
    run: Run | None = None,
) -> SimulatorParams:
    """LINEAR fit over hypothetical single-example rows.

    One row per (checkpoint, requested example): previous loss is the
    actual checkpoint loss, the target the hypothetical next-step loss.
    targets="actual" is a consistency mode: rows follow `run`'s real
    batches and recorded next-step losses at matching checkpoints, which
    reproduces the plain LINEAR fit when every step has a checkpoint.
    """
    from .fitting import DesignProblem, numerical_rank, solve_ridge

    n = trace.n_train
    rows: list[tuple[str, int]] = []
    batches: list[tuple[int, ...]] = []
    prevs: list[float] = []
    ys: list[float] = []
    if targets == "hypothetical":
        ids = sorted(set(train_ids))
        if not ids:
            raise ValidationError("hypothetical_linear_fit: no train ids given")
        for k in range(trace.num_checkpoints):
            loss_k = trace.test_loss_at(k, test_example_id)
            g_z = trace.test_grad(k, test_example_id)
            g_mat = trace.train_grad_matrix(k, ids)
            hypo = loss_k - trace.etas[k] * (g_mat @ g_z)
            for j, i in enumerate(ids):
                rows.append(("hypothetical", trace.steps[k]))
                batches.append((i,))
                prevs.append(loss_k)
                ys.append(float(hypo[j]))
    elif targets == "actual":
        if run is None:
            raise ValidationError("hypothetical_linear_fit: targets='actual' needs a run")
        traj = run.trajectory_for(test_example_id)
        if traj is None:
            raise DataError(
                f"hypothetical_linear_fit: run {run.run_id} does not track test example "
                f"{test_example_id}"
            )
        step_index = {s: k for k, s in enumerate(trace.steps)}
        for t in range(1, run.num_steps + 1):
            k = step_index.get(t - 1)
            cur = traj.loss_at(t)
            if k is None or cur is None:
                continue
            rows.append((run.run_id, t))
            batches.append(run.curriculum.batch(t))
            prevs.append(trace.test_loss_at(k, test_example_id))
            ys.append(cur)
        if not rows:
            raise NoDataError("hypothetical_linear_fit: no checkpoint-aligned steps")
    else:
        raise ValidationError(f"hypothetical_linear_fit: unknown targets mode {targets!r}")
    s = len(rows)
    x = np.zeros((s, 2 * n))
    prev_arr = np.array(prevs)
    for r, batch in enumerate(batches):
        for i in batch:
            x[r, i - 1] += prev_arr[r]
            x[r, n + i - 1] += 1.0
    problem = DesignProblem(
        variant=SimulatorVariant.LINEAR,
        test_example_id=test_example_id,
        n=n,
        x=x,
        y=np.array(ys),
        row_index=tuple(rows),
        row_batches=tuple(batches),
        prev_losses=prev_arr,
    )
    solution = solve_ridge(problem, lam)
    residual = problem.y - problem.x @ solution.w
    rank, _, _ = numerical_rank(problem.x)
    return SimulatorParams(
        test_example_id=test_example_id,
        variant=SimulatorVariant.LINEAR,
        n=n,
        a=solution.w[:n],
        b=solution.w[n:],
        lam=float(lam),
        rss=float(residual @ residual),
        rank=rank,
        rows=s,
    )


# ---------------------------------------------------------------------------
# second-order scores


def _cholesky(hessian: np.ndarray):
    h = np.asarray(hessian, dtype=float)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValidationError(f"hessian must be square, got shape {h.shape}")
    if not np.all(np.isfinite(h)):
        raise ConditioningError("hessian contains non-finite entries")
    scale = float(np.max(np.abs(h))) or 1.0
    if float(np.max(np.abs(h - h.T))) > 1e-10 * scale:
        raise ConditioningError("hessian is not symmetric")
    try:
        return scipy.linalg.cho_factor(h)
    except scipy.linalg.LinAlgError as exc:
        raise ConditioningError(f"hessian is not positive definite: {exc}") from None


def influence_function_score(
    train_grad: np.ndarray, test_grad: np.ndarray, hessian: np.ndarray
) -> float:
    """<grad(z_i), H^-1 grad(z)> via a Cholesky solve (H is never inverted)."""
    g_i = np.asarray(train_grad, dtype=float)
    g_z = np.asarray(test_grad, dtype=float)
    if g_i.shape != g_z.shape or g_i.ndim != 1:
        raise ValidationError(
            f"influence_function_score: gradient shapes differ: {g_i.shape} vs {g_z.shape}"
        )
    if np.asarray(hessian).shape[0] != g_i.shape[0]:
        raise ValidationError("influence_function_score: hessian/gradient dims differ")
    factor = _cholesky(hessian)
    return float(g_i @ scipy.linalg.cho_solve(factor, g_z))


def second_order_additive_fit(
    trace: CheckpointTrace, train_ids: Sequence[int], test_example_id: int
) -> np.ndarray:
    """Additive weights from one hypothetical Newton step at the final params.

    For each requested example the hypothetical post-step loss is
    L_T - <g_i, H^-1 g_z>; the weight is the negative implied delta,
    i.e. B_i = -<g_i, H^-1 g_z>.
    """
    if trace.training_hessian is None:
        raise ConditioningError("second_order_additive_fit: trace has no Hessian provider")
    ids = sorted(set(train_ids))
    if not ids:
        raise ValidationError("second_order_additive_fit: no train ids given")
    last = trace.num_checkpoints - 1
    theta = trace.thetas[last]
    factor = _cholesky(trace.training_hessian(theta))
    loss_t = trace.test_loss_at(last, test_example_id)
    g_z = trace.test_grad(last, test_example_id)
    u = scipy.linalg.cho_solve(factor, g_z)
    b = np.zeros(trace.n_train)
    for i in ids:
        g_i = trace.train_grad(last, i)
        hypothetical = loss_t - float(g_i @ u)
        b[i - 1] = -(loss_t - hypothetical)
    return b


# ---------------------------------------------------------------------------
# scores as simulators


def simulate_from_scores(
    scores: InfluenceScores, curriculum: Curriculum, initial_loss: float
) -> SimulatedTrajectory:
    """Additive rollout of the weights the scores imply."""
    params = SimulatorParams(
        test_example_id=scores.test_example_id,
        variant=SimulatorVariant.ADDITIVE,
        n=scores.n,
        a=None,
        b=scores.additive_weights(),
    )
    return simulate(params, curriculum, initial_loss)


def optimal_rescale(predicted, actual) -> tuple[float, np.ndarray]:
    """Scale factor minimizing sum (sigma * pred - actual)^2, and sigma * pred."""
    p = np.asarray(predicted, dtype=float)
    a = np.asarray(actual, dtype=float)
    if p.shape != a.shape or p.ndim != 1 or p.size == 0:
        raise ValidationError(
            f"optimal_rescale: need congruent non-empty vectors, got {p.shape} vs {a.shape}"
        )
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(a))):
        raise ValidationError("optimal_rescale: inputs must be finite")
    denom = float(p @ p)
    if denom == 0.0:
        raise UndefinedStatisticError("optimal_rescale: predicted trajectory is all zero")
    sigma = float(p @ a) / denom
    return sigma, sigma * p


# ---------------------------------------------------------------------------
# document form


def scores_doc(scores: InfluenceScores) -> dict:
    return {
        "version": SCORES_DOC_VERSION,
        "method": scores.method.value,
        "n": scores.n,
        "test_example_id": scores.test_example_id,
        "scores": [float(v) for v in scores.scores],
        "normalizers": [float(v) for v in scores.normalizers],
    }


def scores_from_doc(doc: Mapping) -> InfluenceScores:
    if not isinstance(doc, Mapping):
        raise ValidationError("scores document: expected an object")
    for key in ("method", "n", "test_example_id", "scores", "normalizers"):
        if key not in doc:
            raise ValidationError(f"scores document: missing {key!r}")
    try:
        method = ScoreMethod(doc["method"])
    except ValueError:
        raise ValidationError(f"scores document: unknown method {doc['method']!r}") from None
    scores = InfluenceScores(
        test_example_id=int(doc["test_example_id"]),
        method=method,
        scores=np.asarray(doc["scores"], dtype=float),
        normalizers=np.asarray(doc["normalizers"], dtype=float),
    )
    if scores.n != doc["n"]:
        raise ValidationError("scores document: n does not match vector length")
    return scores
