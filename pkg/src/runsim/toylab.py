"""Small, fully instrumented training setups for exercising the fitters.

Two sources of runs live here: a synthetic generator that rolls known
per-example weights forward (ground truth available), and a softmax
regression trained by vanilla SGD on a Gaussian-mixture dataset with
every per-step test loss recorded (realistic dynamics, still cheap).

All randomness flows through counter-based Philox generators keyed by
explicit seeds, so identical configs reproduce byte-identical logs.
"""

from dataclasses import dataclass, fields as dataclass_fields
from typing import Callable, Mapping, Sequence

import math

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

from . import docio
from .baselines import CheckpointTrace
from .errors import (
    ConditioningError,
    ConfigError,
    DivergenceError,
    NumericError,
    ValidationError,
)
from .fitting import numerical_rank
from .runs import Curriculum, LossTrajectory, Run, RunSet
from .simparams import SimulatorParams, SimulatorVariant

__all__ = [
    "DatasetConfig",
    "ToyDataset",
    "generate_dataset",
    "ToyModel",
    "BatchingMatrix",
    "build_batching_matrix",
    "curriculum_from_Q",
    "shuffled_epoch_source",
    "random_linear_params",
    "generate_synthetic_runs",
    "train_toy",
    "CollectionConfig",
    "default_desk_config",
    "make_run_collection",
    "generate_from_doc",
    "save_traces",
    "load_traces",
]

TRACES_DOC_VERSION = 1


# ---------------------------------------------------------------------------
# dataset


@dataclass(frozen=True)
class DatasetConfig:
    seed: int
    n_train: int
    n_test: int
    dim: int = 5
    classes: int = 3
    class_spread: float = 2.0
    noise: float = 1.0

    def __post_init__(self):
        if self.n_train < 1 or self.n_test < 1:
            raise ConfigError("dataset: n_train and n_test must be >= 1")
        if self.dim < 1 or self.classes < 2:
            raise ConfigError("dataset: need dim >= 1 and classes >= 2")
        if self.class_spread <= 0 or self.noise < 0:
            raise ConfigError("dataset: class_spread must be > 0 and noise >= 0")

    def to_doc(self) -> dict:
        return {
            "seed": self.seed,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "dim": self.dim,
            "classes": self.classes,
            "class_spread": self.class_spread,
            "noise": self.noise,
        }

    @classmethod
    def from_doc(cls, doc: Mapping) -> "DatasetConfig":
        return cls(**{f.name: doc[f.name] for f in dataclass_fields(cls) if f.name in doc})


@dataclass(frozen=True)
class ToyDataset:
    """Gaussian-mixture classification data; ids are 1-based into each pool."""

    config: DatasetConfig
    train_x: np.ndarray
    train_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray

    @property
    def n_train(self) -> int:
        return len(self.train_y)

    @property
    def n_test(self) -> int:
        return len(self.test_y)


def generate_dataset(config: DatasetConfig) -> ToyDataset:
    rng = Generator(Philox(config.seed))
    means = rng.normal(0.0, config.class_spread, size=(config.classes, config.dim))
    train_y = rng.integers(0, config.classes, size=config.n_train)
    train_x = means[train_y] + rng.normal(0.0, config.noise, size=(config.n_train, config.dim))
    test_y = rng.integers(0, config.classes, size=config.n_test)
    test_x = means[test_y] + rng.normal(0.0, config.noise, size=(config.n_test, config.dim))
    for arr in (train_x, train_y, test_x, test_y):
        arr.setflags(write=False)
    return ToyDataset(config, train_x, train_y, test_x, test_y)


# ---------------------------------------------------------------------------
# model: multinomial softmax regression with an L2 term


@dataclass(frozen=True)
class ToyModel:
    """Softmax regression; every per-example loss includes 0.5*l2*|theta|^2.

    Keeping the penalty inside the per-example loss means SGD steps,
    per-example gradients, and the training Hessian all derive from the
    same scalar, which the first- and second-order identities rely on.
    Parameters are the (dim, classes) weight matrix flattened row-major.
    """

    dim: int
    classes: int
    l2: float = 1e-3

    def __post_init__(self):
        if self.l2 < 0:
            raise ConfigError(f"model: l2 must be >= 0, got {self.l2}")

    @property
    def num_params(self) -> int:
        return self.dim * self.classes

    def init_params(self) -> np.ndarray:
        return np.zeros(self.num_params)

    def _log_probs(self, theta: np.ndarray, x: np.ndarray) -> np.ndarray:
        logits = x @ theta.reshape(self.dim, self.classes)
        logits = logits - logits.max(axis=1, keepdims=True)
        return logits - np.log(np.exp(logits).sum(axis=1, keepdims=True))

    def losses(self, theta: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Per-example losses for rows of x."""
        x = np.atleast_2d(x)
        y = np.atleast_1d(y)
        logp = self._log_probs(theta, x)
        ce = -logp[np.arange(len(y)), y]
        return ce + 0.5 * self.l2 * float(theta @ theta)

    def loss(self, theta: np.ndarray, x: np.ndarray, y: int) -> float:
        return float(self.losses(theta, x[None, :], np.array([y]))[0])

    def gradients(self, theta: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Per-example loss gradients, one row per example."""
        x = np.atleast_2d(x)
        y = np.atleast_1d(y)
        p = np.exp(self._log_probs(theta, x))
        p[np.arange(len(y)), y] -= 1.0
        g = np.einsum("ni,nc->nic", x, p).reshape(len(y), self.num_params)
        return g + self.l2 * theta

    def gradient(self, theta: np.ndarray, x: np.ndarray, y: int) -> np.ndarray:
        return self.gradients(theta, x[None, :], np.array([y]))[0]

    def batch_gradient(self, theta: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self.gradients(theta, x, y).mean(axis=0)

    def hessian(self, theta: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Mean per-example Hessian over rows of x, plus the l2 ridge."""
        x = np.atleast_2d(x)
        p = np.exp(self._log_probs(theta, x))
        h = np.zeros((self.num_params, self.num_params))
        for xi, pi in zip(x, p):
            h += np.kron(np.outer(xi, xi), np.diag(pi) - np.outer(pi, pi))
        h /= len(x)
        return h + self.l2 * np.eye(self.num_params)


# ---------------------------------------------------------------------------
# curricula


@dataclass(frozen=True)
class BatchingMatrix:
    """Block-diagonal 0/1 matrix whose rows are the batches of one cycle.

    Blocks are (k+1) x (k+1) all-ones-minus-identity, so every row sums
    to k and the matrix is invertible; n must be divisible by k+1.
    """

    q: np.ndarray
    k: int

    @property
    def n(self) -> int:
        return self.q.shape[0]


def build_batching_matrix(n: int, k: int) -> BatchingMatrix:
    if k < 1:
        raise ValidationError(f"batching matrix: k must be >= 1, got {k}")
    if n % (k + 1) != 0:
        raise ValidationError(f"batching matrix: n={n} not divisible by k+1={k + 1}")
    block = np.ones((k + 1, k + 1), dtype=int) - np.eye(k + 1, dtype=int)
    q = np.zeros((n, n), dtype=int)
    for b in range(n // (k + 1)):
        lo = b * (k + 1)
        q[lo : lo + k + 1, lo : lo + k + 1] = block
    rank, _, _ = numerical_rank(q.astype(float))
    if rank != n:
        raise ConditioningError(f"batching matrix: rank {rank} != n {n}")
    q.setflags(write=False)
    return BatchingMatrix(q, k)


def curriculum_from_Q(qm: BatchingMatrix, repeats: int = 1) -> Curriculum:
    """Curriculum whose step t consumes the ids set in row ((t-1) mod n) of Q."""
    if repeats < 1:
        raise ValidationError(f"curriculum_from_Q: repeats must be >= 1, got {repeats}")
    rows = [tuple(int(j + 1) for j in np.flatnonzero(qm.q[r])) for r in range(qm.n)]
    return Curriculum(qm.n, tuple(rows * repeats))


def shuffled_epoch_source(
    n: int, epochs: int, batch_size: int, subset_size: int | None = None
) -> Callable[[Generator], Curriculum]:
    """Source of per-epoch-shuffled curricula over (a subset of) 1..n."""
    size = n if subset_size is None else subset_size
    if size < 1 or size > n:
        raise ValidationError(f"shuffled_epoch_source: subset size {size} outside [1, {n}]")
    if size % batch_size != 0:
        raise ValidationError(
            f"shuffled_epoch_source: subset size {size} not divisible by batch size {batch_size}"
        )
    if epochs < 1:
        raise ValidationError(f"shuffled_epoch_source: epochs must be >= 1, got {epochs}")

    def source(rng: Generator) -> Curriculum:
        ids = np.arange(1, n + 1)
        if size < n:
            ids = np.sort(rng.choice(ids, size=size, replace=False))
        steps: list[tuple[int, ...]] = []
        for _ in range(epochs):
            order = rng.permutation(ids)
            for lo in range(0, size, batch_size):
                steps.append(tuple(int(i) for i in order[lo : lo + batch_size]))
        return Curriculum(n, tuple(steps))

    return source


# ---------------------------------------------------------------------------
# synthetic runs from known weights


def random_linear_params(
    n: int,
    k: int,
    seed: int,
    alpha_band: tuple[float, float] = (0.9, 1.1),
    b_range: tuple[float, float] = (-0.08, -0.01),
    test_example_id: int = 1,
) -> SimulatorParams:
    """Ground-truth LINEAR weights whose size-k batches keep alpha near 1.

    A entries are drawn uniformly from alpha_band / k; B entries from
    b_range (kept away from 0 so relative recovery errors are defined).
    """
    rng = Generator(Philox(seed))
    a = rng.uniform(alpha_band[0] / k, alpha_band[1] / k, size=n)
    b = rng.uniform(b_range[0], b_range[1], size=n)
    return SimulatorParams(
        test_example_id=test_example_id,
        variant=SimulatorVariant.LINEAR,
        n=n,
        a=a,
        b=b,
    )


def generate_synthetic_runs(
    true_params: SimulatorParams,
    run_count: int,
    curriculum_source,
    l0_range: tuple[float, float] = (5.0, 10.0),
    noise_sigma: float = 0.0,
    seed: int = 0,
    future_count: int = 0,
) -> RunSet:
    """Roll the true per-step update forward, optionally with Gaussian noise.

    `curriculum_source` is either a fixed Curriculum or a callable
    rng -> Curriculum.  The last `future_count` runs are tagged future.
    With noise_sigma=0 the recorded losses match a noise-free rollout of
    the same params bit for bit (both sides share the step update).
    """
    if run_count < 1 or not 0 <= future_count <= run_count:
        raise ValidationError(
            f"generate_synthetic_runs: bad run_count={run_count}, future_count={future_count}"
        )
    if noise_sigma < 0:
        raise ValidationError(f"generate_synthetic_runs: noise_sigma {noise_sigma} < 0")
    rng = Generator(Philox(seed))
    runs = []
    for r in range(run_count):
        cur = curriculum_source(rng) if callable(curriculum_source) else curriculum_source
        if cur.n != true_params.n:
            raise ValidationError(
                f"generate_synthetic_runs: curriculum n={cur.n} != params n={true_params.n}"
            )
        value = float(rng.uniform(l0_range[0], l0_range[1]))
        l0 = value
        losses: dict[int, float] = {}
        for t, batch in enumerate(cur.steps, start=1):
            alpha, beta = true_params.step_gains(batch)
            value = alpha * value + beta
            if noise_sigma > 0:
                value += noise_sigma * rng.standard_normal()
            if not math.isfinite(value):
                raise NumericError(
                    f"generate_synthetic_runs: run {r} diverged at step {t}"
                )
            losses[t] = value
        role = "future" if r >= run_count - future_count else "past"
        runs.append(
            Run(
                run_id=f"s{r:03d}",
                role=role,
                curriculum=cur,
                trajectories=(
                    LossTrajectory(true_params.test_example_id, l0, losses),
                ),
            )
        )
    return RunSet(true_params.n, tuple(runs))


# ---------------------------------------------------------------------------
# SGD training with full loss instrumentation


def _trace_closures(dataset: ToyDataset, model: ToyModel) -> dict:
    def train_gradient(theta, example_id):
        return model.gradient(theta, dataset.train_x[example_id - 1], dataset.train_y[example_id - 1])

    def train_gradients(theta, ids):
        idx = np.asarray(ids, dtype=int) - 1
        return model.gradients(theta, dataset.train_x[idx], dataset.train_y[idx])

    def test_gradient(theta, test_id):
        return model.gradient(theta, dataset.test_x[test_id - 1], dataset.test_y[test_id - 1])

    def test_loss(theta, test_id):
        return model.loss(theta, dataset.test_x[test_id - 1], dataset.test_y[test_id - 1])

    return {
        "train_gradient": train_gradient,
        "train_gradients": train_gradients,
        "test_gradient": test_gradient,
        "test_loss": test_loss,
    }


def _hessian_provider(dataset: ToyDataset, model: ToyModel, train_ids: Sequence[int]):
    idx = np.asarray(sorted(train_ids), dtype=int) - 1

    def training_hessian(theta):
        return model.hessian(theta, dataset.train_x[idx])

    return training_hessian


def train_toy(
    dataset: ToyDataset,
    model: ToyModel,
    curriculum: Curriculum,
    etas: float | Sequence[float],
    tracked_test_ids: Sequence[int],
    checkpoint_every: int = 1,
    run_id: str = "toy",
    role: str = "past",
) -> tuple[Run, CheckpointTrace]:
    """Vanilla SGD from zeros over the curriculum, recording every test loss.

    The update is theta -= eta_t * (mean gradient over the step's batch,
    multiplicity counted).  Checkpoints are saved at step 0, every
    `checkpoint_every` steps, and the final step; each carries the
    learning rate of the following step (the last reuses the final
    rate).  Divergence aborts with the last finite step.
    """
    if curriculum.n != dataset.n_train:
        raise ValidationError(
            f"train_toy: curriculum n={curriculum.n} != dataset n_train={dataset.n_train}"
        )
    tracked = sorted(set(tracked_test_ids))
    if not tracked:
        raise ValidationError("train_toy: no tracked test ids")
    for tid in tracked:
        if not 1 <= tid <= dataset.n_test:
            raise ValidationError(f"train_toy: test id {tid} outside [1, {dataset.n_test}]")
    t_total = curriculum.num_steps
    if isinstance(etas, (int, float)):
        eta_list = [float(etas)] * t_total
    else:
        eta_list = [float(e) for e in etas]
        if len(eta_list) != t_total:
            raise ValidationError(
                f"train_toy: eta schedule length {len(eta_list)} != steps {t_total}"
            )
    if any(not math.isfinite(e) or e <= 0 for e in eta_list):
        raise ValidationError("train_toy: learning rates must be finite and > 0")
    if checkpoint_every < 1:
        raise ValidationError(f"train_toy: checkpoint_every must be >= 1, got {checkpoint_every}")

    tracked_idx = np.asarray(tracked, dtype=int) - 1
    test_x = dataset.test_x[tracked_idx]
    test_y = dataset.test_y[tracked_idx]

    theta = model.init_params()
    initial = model.losses(theta, test_x, test_y)
    recorded: dict[int, dict[int, float]] = {tid: {} for tid in tracked}

    ckpt_steps: list[int] = [0]
    ckpt_etas: list[float] = [eta_list[0]]
    ckpt_thetas: list[np.ndarray] = [theta.copy()]

    for t, batch in enumerate(curriculum.steps, start=1):
        idx = np.asarray(batch, dtype=int) - 1  # multiplicity preserved
        g = model.batch_gradient(theta, dataset.train_x[idx], dataset.train_y[idx])
        theta = theta - eta_list[t - 1] * g
        with np.errstate(over="ignore"):  # divergence is detected below, not warned about
            losses_t = model.losses(theta, test_x, test_y)
        if not np.all(np.isfinite(losses_t)):
            raise DivergenceError(
                f"train_toy: run {run_id} diverged at step {t}", last_good_step=t - 1
            )
        for j, tid in enumerate(tracked):
            recorded[tid][t] = float(losses_t[j])
        if t % checkpoint_every == 0 or t == t_total:
            ckpt_steps.append(t)
            ckpt_etas.append(eta_list[t] if t < t_total else eta_list[-1])
            ckpt_thetas.append(theta.copy())

    trajectories = tuple(
        LossTrajectory(tid, float(initial[j]), recorded[tid]) for j, tid in enumerate(tracked)
    )
    run = Run(run_id=run_id, role=role, curriculum=curriculum, trajectories=trajectories)
    consumed = sorted(set(i for batch in curriculum.steps for i in batch))
    closures = _trace_closures(dataset, model)
    trace = CheckpointTrace(
        steps=tuple(ckpt_steps),
        etas=tuple(ckpt_etas),
        thetas=tuple(ckpt_thetas),
        n_train=dataset.n_train,
        training_hessian=_hessian_provider(dataset, model, consumed),
        hessian_train_ids=tuple(consumed),
        run_id=run_id,
        **closures,
    )
    return run, trace


# ---------------------------------------------------------------------------
# run collections


@dataclass(frozen=True)
class CollectionConfig:
    """Flat configuration for a full fit/validation/future collection."""

    seed: int
    dataset_seed: int
    train_pool: int
    test_pool: int
    runs: int
    fit_runs: int
    val_runs: int
    future_runs: int
    examples_per_run: int
    epochs: int
    batch_size: int
    eta: float
    checkpoint_every: int = 1
    tracked_tests: int = 10
    dim: int = 5
    classes: int = 3
    l2: float = 1e-3
    class_spread: float = 2.0
    noise: float = 1.0

    def __post_init__(self):
        if self.fit_runs + self.val_runs + self.future_runs != self.runs:
            raise ConfigError(
                f"collection: fit+val+future = "
                f"{self.fit_runs + self.val_runs + self.future_runs} != runs = {self.runs}"
            )
        if not 1 <= self.examples_per_run <= self.train_pool:
            raise ConfigError("collection: examples_per_run outside [1, train_pool]")
        if self.examples_per_run % self.batch_size != 0:
            raise ConfigError("collection: examples_per_run not divisible by batch_size")
        if not 1 <= self.tracked_tests <= self.test_pool:
            raise ConfigError("collection: tracked_tests outside [1, test_pool]")
        if self.eta <= 0 or self.epochs < 1 or self.checkpoint_every < 1:
            raise ConfigError("collection: eta, epochs, checkpoint_every must be positive")

    def dataset_config(self) -> DatasetConfig:
        return DatasetConfig(
            seed=self.dataset_seed,
            n_train=self.train_pool,
            n_test=self.test_pool,
            dim=self.dim,
            classes=self.classes,
            class_spread=self.class_spread,
            noise=self.noise,
        )

    def to_doc(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dataclass_fields(self)}

    @classmethod
    def from_doc(cls, doc: Mapping) -> "CollectionConfig":
        known = {f.name for f in dataclass_fields(cls)}
        unknown = set(doc) - known - {"version"}
        if unknown:
            raise ConfigError(f"collection config: unknown keys {sorted(unknown)}")
        try:
            return cls(**{k: v for k, v in doc.items() if k in known})
        except TypeError as exc:
            raise ConfigError(f"collection config: {exc}") from None


def default_desk_config(seed: int = 0) -> CollectionConfig:
    """32 runs of 64-example 4-epoch training at batch size 4, split 20/2/10."""
    return CollectionConfig(
        seed=seed,
        dataset_seed=seed + 10_000,
        train_pool=100,
        test_pool=16,
        runs=32,
        fit_runs=20,
        val_runs=2,
        future_runs=10,
        examples_per_run=64,
        epochs=4,
        batch_size=4,
        eta=0.15,
        checkpoint_every=1,
        tracked_tests=10,
    )


def make_run_collection(
    config: CollectionConfig,
) -> tuple[RunSet, dict[str, CheckpointTrace]]:
    """Train every run of the collection; returns the log and its traces.

    Run order is fit runs, then validation runs (both role past), then
    future runs; the positional split is part of the contract since the
    log format only carries past/future.
    """
    dataset = generate_dataset(config.dataset_config())
    model = ToyModel(dim=config.dim, classes=config.classes, l2=config.l2)
    tracked = list(range(1, config.tracked_tests + 1))
    source = shuffled_epoch_source(
        config.train_pool, config.epochs, config.batch_size, config.examples_per_run
    )
    children = SeedSequence(config.seed).spawn(config.runs)
    runs: list[Run] = []
    traces: dict[str, CheckpointTrace] = {}
    for r in range(config.runs):
        rng = Generator(Philox(children[r]))
        curriculum = source(rng)
        role = "past" if r < config.fit_runs + config.val_runs else "future"
        run_id = f"r{r:03d}"
        run, trace = train_toy(
            dataset,
            model,
            curriculum,
            config.eta,
            tracked,
            checkpoint_every=config.checkpoint_every,
            run_id=run_id,
            role=role,
        )
        runs.append(run)
        traces[run_id] = trace
    run_set = RunSet(config.train_pool, tuple(runs))
    return run_set, traces


_SYNTHETIC_KEYS = {
    "mode",
    "seed",
    "params_seed",
    "n",
    "k",
    "runs",
    "future_runs",
    "repeats",
    "noise_sigma",
    "l0_low",
    "l0_high",
}


def generate_from_doc(doc: Mapping) -> tuple[RunSet, dict[str, CheckpointTrace] | None]:
    """Build a run collection from a config document.

    mode "toy" trains the instrumented model and returns traces; mode
    "synthetic" rolls known weights over a repeated batching-matrix
    curriculum (no traces).  Unknown keys are rejected.
    """
    if not isinstance(doc, Mapping):
        raise ConfigError("generate config: expected an object")
    mode = doc.get("mode", "toy")
    if mode == "toy":
        return make_run_collection(CollectionConfig.from_doc({k: v for k, v in doc.items() if k != "mode"}))
    if mode == "synthetic":
        unknown = set(doc) - _SYNTHETIC_KEYS
        if unknown:
            raise ConfigError(f"generate config: unknown keys {sorted(unknown)}")
        for key in ("n", "k", "runs"):
            if key not in doc:
                raise ConfigError(f"generate config: missing {key!r}")
        n = int(doc["n"])
        k = int(doc["k"])
        true = random_linear_params(n, k, int(doc.get("params_seed", 0)))
        qm = build_batching_matrix(n, k)
        cur = curriculum_from_Q(qm, repeats=int(doc.get("repeats", 2)))
        run_set = generate_synthetic_runs(
            true,
            int(doc["runs"]),
            cur,
            l0_range=(float(doc.get("l0_low", 5.0)), float(doc.get("l0_high", 10.0))),
            noise_sigma=float(doc.get("noise_sigma", 0.0)),
            seed=int(doc.get("seed", 0)),
            future_count=int(doc.get("future_runs", 0)),
        )
        return run_set, None
    raise ConfigError(f"generate config: unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# trace sidecar documents


def save_traces(
    path,
    traces: Mapping[str, CheckpointTrace],
    dataset: ToyDataset,
    model: ToyModel,
) -> None:
    """Line-delimited sidecar: header with dataset/model config, one run per line."""
    header = {
        "version": TRACES_DOC_VERSION,
        "model": {"dim": model.dim, "classes": model.classes, "l2": model.l2},
        "dataset": dataset.config.to_doc(),
    }
    lines = [docio.dumps(header)]
    for run_id in sorted(traces):
        trace = traces[run_id]
        lines.append(
            docio.dumps(
                {
                    "run_id": run_id,
                    "steps": list(trace.steps),
                    "etas": list(trace.etas),
                    "train_ids": list(trace.hessian_train_ids),
                    "thetas": [[float(v) for v in th] for th in trace.thetas],
                }
            )
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_traces(path) -> tuple[dict[str, CheckpointTrace], ToyDataset, ToyModel]:
    """Rebuild traces with live closures from a sidecar document."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValidationError("traces document: empty file")
    header = docio.loads(lines[0], line=1)
    model_doc = header.get("model", {})
    model = ToyModel(
        dim=int(model_doc["dim"]), classes=int(model_doc["classes"]), l2=float(model_doc["l2"])
    )
    dataset = generate_dataset(DatasetConfig.from_doc(header["dataset"]))
    closures = _trace_closures(dataset, model)
    traces: dict[str, CheckpointTrace] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        doc = docio.loads(line, line=lineno)
        train_ids = tuple(int(i) for i in doc.get("train_ids", ()))
        traces[doc["run_id"]] = CheckpointTrace(
            steps=tuple(int(s) for s in doc["steps"]),
            etas=tuple(float(e) for e in doc["etas"]),
            thetas=tuple(np.array(th, dtype=float) for th in doc["thetas"]),
            n_train=dataset.n_train,
            training_hessian=_hessian_provider(dataset, model, train_ids)
            if train_ids
            else None,
            hessian_train_ids=train_ids,
            run_id=doc["run_id"],
            **closures,
        )
    return traces, dataset, model
