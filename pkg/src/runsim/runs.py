"""Training-run records: curricula, per-step loss trajectories, and the
line-delimited log format that moves them between tools.

A curriculum is the sequence of consumed batches; batches are multisets
(a duplicated id contributes once per occurrence everywhere downstream).
Loss recording is sparse: a trajectory stores the pre-training loss L0
plus whichever step losses were measured.
"""

from dataclasses import dataclass, field
from typing import Mapping

import math

from . import docio
from .errors import ParseError, ValidationError

__all__ = [
    "Curriculum",
    "LossTrajectory",
    "Run",
    "RunSet",
    "occurrence_steps",
    "parse_run_log",
    "serialize_run_set",
    "load_run_log",
    "save_run_log",
    "load_curriculum",
    "save_curriculum",
]

ROLES = ("past", "future")

FORMAT_VERSION = 1


def _check_example_id(i: object, n: int, where: str) -> int:
    if not isinstance(i, int) or isinstance(i, bool):
        raise ValidationError(f"{where}: example id must be an int, got {i!r}")
    if not 1 <= i <= n:
        raise ValidationError(f"{where}: example id {i} outside [1, {n}]")
    return i


@dataclass(frozen=True)
class Curriculum:
    """Ordered batches over a universe of n training examples (ids 1..n)."""

    n: int
    steps: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1:
            raise ValidationError(f"curriculum: n must be a positive int, got {self.n!r}")
        if len(self.steps) < 1:
            raise ValidationError("curriculum: needs at least one step")
        norm = []
        for t, batch in enumerate(self.steps, start=1):
            ids = tuple(sorted(batch))
            if not ids:
                raise ValidationError(f"curriculum: step {t} has an empty batch")
            for i in ids:
                _check_example_id(i, self.n, f"curriculum step {t}")
            norm.append(ids)
        object.__setattr__(self, "steps", tuple(norm))

    @property
    def num_steps(self) -> int:
        return len(self.steps)

    def batch(self, t: int) -> tuple[int, ...]:
        """Batch consumed at 1-based step t."""
        if not 1 <= t <= self.num_steps:
            raise ValidationError(f"step {t} outside [1, {self.num_steps}]")
        return self.steps[t - 1]


@dataclass(frozen=True)
class LossTrajectory:
    """Sparse per-step losses of one tracked test example.

    `losses` maps 1-based step index -> loss after that step;
    `initial_loss` is the loss before any training (step 0).
    """

    test_example_id: int
    initial_loss: float
    losses: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.test_example_id, int) or self.test_example_id < 1:
            raise ValidationError(
                f"trajectory: test example id must be a positive int, got {self.test_example_id!r}"
            )
        if not math.isfinite(self.initial_loss):
            raise ValidationError(
                f"trajectory {self.test_example_id}: L0 must be finite, got {self.initial_loss!r}"
            )
        clean: dict[int, float] = {}
        for t in sorted(self.losses):
            v = self.losses[t]
            if not isinstance(t, int) or isinstance(t, bool) or t < 1:
                raise ValidationError(
                    f"trajectory {self.test_example_id}: step index {t!r} must be a positive int"
                )
            v = float(v)
            if not math.isfinite(v):
                raise ValidationError(
                    f"trajectory {self.test_example_id}: loss at step {t} not finite"
                )
            clean[t] = v
        object.__setattr__(self, "losses", clean)
        object.__setattr__(self, "initial_loss", float(self.initial_loss))

    @property
    def recorded_steps(self) -> tuple[int, ...]:
        return tuple(sorted(self.losses))

    def loss_at(self, t: int) -> float | None:
        """Loss after step t (t=0 means the initial loss); None if unrecorded."""
        if t == 0:
            return self.initial_loss
        return self.losses.get(t)

    @property
    def last_recorded_step(self) -> int:
        """Largest recorded step index, 0 when only L0 is known."""
        return max(self.losses) if self.losses else 0


@dataclass(frozen=True)
class Run:
    """One training run: its curriculum plus tracked test-loss trajectories."""

    run_id: str
    role: str
    curriculum: Curriculum
    trajectories: tuple[LossTrajectory, ...]

    def __post_init__(self):
        if not self.run_id or not isinstance(self.run_id, str):
            raise ValidationError(f"run: run_id must be a non-empty string, got {self.run_id!r}")
        if self.role not in ROLES:
            raise ValidationError(
                f"run {self.run_id}: role must be one of {ROLES}, got {self.role!r}"
            )
        object.__setattr__(self, "trajectories", tuple(self.trajectories))
        seen: set[int] = set()
        t_max = self.curriculum.num_steps
        for traj in self.trajectories:
            if traj.test_example_id in seen:
                raise ValidationError(
                    f"run {self.run_id}: test example {traj.test_example_id} tracked twice"
                )
            seen.add(traj.test_example_id)
            if traj.losses and max(traj.losses) > t_max:
                raise ValidationError(
                    f"run {self.run_id}: trajectory {traj.test_example_id} records step "
                    f"{max(traj.losses)} beyond curriculum length {t_max}"
                )

    @property
    def num_steps(self) -> int:
        return self.curriculum.num_steps

    @property
    def tracked_ids(self) -> tuple[int, ...]:
        return tuple(sorted(t.test_example_id for t in self.trajectories))

    def trajectory_for(self, test_example_id: int) -> LossTrajectory | None:
        for traj in self.trajectories:
            if traj.test_example_id == test_example_id:
                return traj
        return None


@dataclass(frozen=True)
class RunSet:
    """A collection of runs over one example universe, with name tables.

    `example_names` / `test_example_names` map ids to external names;
    missing entries are filled with defaults so serialization is total.
    """

    n: int
    runs: tuple[Run, ...]
    example_names: Mapping[int, str] = field(default_factory=dict)
    test_example_names: Mapping[int, str] = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1:
            raise ValidationError(f"run set: n must be a positive int, got {self.n!r}")
        object.__setattr__(self, "runs", tuple(self.runs))
        seen_runs: set[str] = set()
        tracked: set[int] = set()
        for run in self.runs:
            if run.run_id in seen_runs:
                raise ValidationError(f"run set: duplicate run_id {run.run_id!r}")
            seen_runs.add(run.run_id)
            if run.curriculum.n != self.n:
                raise ValidationError(
                    f"run {run.run_id}: curriculum n={run.curriculum.n} != run set n={self.n}"
                )
            tracked.update(run.tracked_ids)
        names = {int(i): str(v) for i, v in self.example_names.items()}
        for i in names:
            _check_example_id(i, self.n, "example name table")
        for i in range(1, self.n + 1):
            names.setdefault(i, f"ex-{i:03d}")
        object.__setattr__(self, "example_names", dict(sorted(names.items())))
        tnames = {int(i): str(v) for i, v in self.test_example_names.items()}
        for i in tnames:
            if i < 1:
                raise ValidationError(f"test example name table: id {i} must be positive")
        for i in sorted(tracked):
            tnames.setdefault(i, f"test-{i:03d}")
        object.__setattr__(self, "test_example_names", dict(sorted(tnames.items())))

    @property
    def m(self) -> int:
        """Number of tracked test examples (size of the test name table)."""
        return len(self.test_example_names)

    def past_runs(self) -> tuple[Run, ...]:
        return tuple(r for r in self.runs if r.role == "past")

    def future_runs(self) -> tuple[Run, ...]:
        return tuple(r for r in self.runs if r.role == "future")

    def run(self, run_id: str) -> Run:
        for r in self.runs:
            if r.run_id == run_id:
                return r
        raise DataKeyError(f"unknown run_id {run_id!r}")


class DataKeyError(ValidationError, KeyError):
    """Lookup of an unknown run id; both a validation failure and a KeyError."""

    def __str__(self) -> str:  # KeyError quotes its arg; keep the message plain
        return self.args[0]


def occurrence_steps(run: Run, example_id: int) -> dict[int, int]:
    """Steps at which `example_id` was consumed, mapped to its multiplicity.

    Returns an empty dict when the example never occurs.
    """
    _check_example_id(example_id, run.curriculum.n, f"run {run.run_id}")
    out: dict[int, int] = {}
    for t, batch in enumerate(run.curriculum.steps, start=1):
        c = batch.count(example_id)
        if c:
            out[t] = c
    return out


# ---------------------------------------------------------------------------
# line-delimited log format


def _require(doc: Mapping, key: str, where: str):
    if key not in doc:
        raise ValidationError(f"{where}: missing {key!r}")
    return doc[key]


def _int_keyed_names(raw: Mapping, where: str) -> dict[int, str]:
    out: dict[int, str] = {}
    for k, v in raw.items():
        try:
            i = int(k)
        except (TypeError, ValueError):
            raise ValidationError(f"{where}: id {k!r} is not an integer") from None
        if not isinstance(v, str):
            raise ValidationError(f"{where}: name for id {k} must be a string")
        out[i] = v
    return out


def _trajectory_from_doc(tid_key: str, doc, run_id: str) -> LossTrajectory:
    where = f"run {run_id}, trajectory {tid_key}"
    try:
        tid = int(tid_key)
    except ValueError:
        raise ValidationError(f"{where}: test example id is not an integer") from None
    if not isinstance(doc, Mapping):
        raise ValidationError(f"{where}: expected an object")
    l0 = _require(doc, "L0", where)
    if isinstance(l0, bool) or not isinstance(l0, (int, float)):
        raise ValidationError(f"{where}: L0 must be a number")
    losses_raw = doc.get("losses", {})
    if not isinstance(losses_raw, Mapping):
        raise ValidationError(f"{where}: losses must be an object")
    losses: dict[int, float] = {}
    for k, v in losses_raw.items():
        try:
            t = int(k)
        except ValueError:
            raise ValidationError(f"{where}: step index {k!r} is not an integer") from None
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ValidationError(f"{where}: loss at step {k} must be a number")
        losses[t] = float(v)
    try:
        return LossTrajectory(tid, float(l0), losses)
    except ValidationError as exc:
        raise ValidationError(f"{where}: {exc}") from None


def parse_run_log(data: str | bytes) -> RunSet:
    """Decode a line-delimited run log (header line, then one run per line)."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    lines = data.splitlines()
    if not lines or not lines[0].strip():
        raise ParseError("empty document, expected a header line", line=1)
    header = docio.loads(lines[0], line=1)
    if not isinstance(header, Mapping):
        raise ValidationError("header: expected an object")
    version = _require(header, "version", "header")
    if version != FORMAT_VERSION:
        raise ParseError(
            f"unsupported run log version {version!r}, expected {FORMAT_VERSION}", line=1
        )
    n = _require(header, "n", "header")
    if isinstance(n, bool) or not isinstance(n, int):
        raise ValidationError("header: n must be an integer")
    example_names = _int_keyed_names(header.get("example_names", {}), "header example_names")
    test_names = _int_keyed_names(
        header.get("test_example_names", {}), "header test_example_names"
    )
    runs: list[Run] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            raise ParseError("blank line inside log", line=lineno)
        doc = docio.loads(line, line=lineno)
        if not isinstance(doc, Mapping):
            raise ValidationError(f"line {lineno}: expected a run object")
        run_id = _require(doc, "run_id", f"line {lineno}")
        if not isinstance(run_id, str):
            raise ValidationError(f"line {lineno}: run_id must be a string")
        where = f"run {run_id}"
        role = _require(doc, "role", where)
        steps_raw = _require(doc, "steps", where)
        if not isinstance(steps_raw, list) or not all(isinstance(b, list) for b in steps_raw):
            raise ValidationError(f"{where}: steps must be an array of arrays")
        trajs_raw = _require(doc, "trajectories", where)
        if not isinstance(trajs_raw, Mapping):
            raise ValidationError(f"{where}: trajectories must be an object")
        curriculum = Curriculum(n, tuple(tuple(b) for b in steps_raw))
        trajectories = tuple(
            _trajectory_from_doc(k, v, run_id) for k, v in trajs_raw.items()
        )
        runs.append(Run(run_id, role, curriculum, trajectories))
    return RunSet(n, tuple(runs), example_names, test_names)


def _trajectory_doc(traj: LossTrajectory) -> dict:
    return {
        "L0": traj.initial_loss,
        "losses": {str(t): traj.losses[t] for t in sorted(traj.losses)},
    }


def serialize_run_set(run_set: RunSet) -> bytes:
    """Canonical byte form of a run set; parse(serialize(rs)) == rs."""
    header = {
        "version": FORMAT_VERSION,
        "n": run_set.n,
        "example_names": {str(i): run_set.example_names[i] for i in sorted(run_set.example_names)},
        "test_example_names": {
            str(i): run_set.test_example_names[i] for i in sorted(run_set.test_example_names)
        },
    }
    lines = [docio.dumps(header)]
    for run in run_set.runs:
        doc = {
            "run_id": run.run_id,
            "role": run.role,
            "steps": [list(b) for b in run.curriculum.steps],
            "trajectories": {
                str(t.test_example_id): _trajectory_doc(t)
                for t in sorted(run.trajectories, key=lambda t: t.test_example_id)
            },
        }
        lines.append(docio.dumps(doc))
    return ("\n".join(lines) + "\n").encode("utf-8")


def load_run_log(path) -> RunSet:
    with open(path, "rb") as fh:
        return parse_run_log(fh.read())


def save_run_log(run_set: RunSet, path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_run_set(run_set))


# ---------------------------------------------------------------------------
# standalone curriculum documents (CLI simulate input)


def curriculum_to_doc(curriculum: Curriculum) -> dict:
    return {
        "version": FORMAT_VERSION,
        "n": curriculum.n,
        "steps": [list(b) for b in curriculum.steps],
    }


def curriculum_from_doc(doc) -> Curriculum:
    if not isinstance(doc, Mapping):
        raise ValidationError("curriculum document: expected an object")
    n = _require(doc, "n", "curriculum document")
    steps = _require(doc, "steps", "curriculum document")
    if not isinstance(steps, list) or not all(isinstance(b, list) for b in steps):
        raise ValidationError("curriculum document: steps must be an array of arrays")
    return Curriculum(n, tuple(tuple(b) for b in steps))


def load_curriculum(path) -> Curriculum:
    with open(path, "r", encoding="utf-8") as fh:
        return curriculum_from_doc(docio.loads(fh.read()))


def save_curriculum(curriculum: Curriculum, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(docio.dumps(curriculum_to_doc(curriculum)) + "\n")
