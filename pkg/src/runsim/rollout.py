"""Rolling fitted parameters forward over a curriculum, and the what-if
edit vocabulary for counterfactual curricula.

Predicted losses are never clamped: an exploding rollout is flagged with
the first bad step rather than silently propagated or truncated.
"""

from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import math

from .errors import EditError, RunSimError, ValidationError
from .runs import Curriculum, Run
from .simparams import SimulatorParams

__all__ = [
    "SimulatedTrajectory",
    "SimulationFailure",
    "simulate",
    "simulate_batch",
    "RemoveExample",
    "RemoveSteps",
    "DuplicateExample",
    "Reorder",
    "ReplaceBatch",
    "CurriculumEdit",
    "apply_edits",
    "what_if",
    "edit_to_doc",
    "edit_from_doc",
]


@dataclass(frozen=True)
class SimulatedTrajectory:
    """Predicted losses after each step; NaN from `diverged_at` onward."""

    test_example_id: int
    initial_loss: float
    losses: tuple[float, ...]
    diverged_at: int | None = None

    @property
    def num_steps(self) -> int:
        return len(self.losses)

    @property
    def final_loss(self) -> float:
        return self.losses[-1]

    def loss_at(self, t: int) -> float:
        """Predicted loss after step t; t=0 is the initial loss."""
        if t == 0:
            return self.initial_loss
        if not 1 <= t <= len(self.losses):
            raise ValidationError(f"step {t} outside [0, {len(self.losses)}]")
        return self.losses[t - 1]


@dataclass(frozen=True)
class SimulationFailure:
    """Per-trajectory failure marker used by simulate_batch."""

    test_example_id: int
    message: str


def simulate(
    params: SimulatorParams, curriculum: Curriculum, initial_loss: float
) -> SimulatedTrajectory:
    """Roll L_t = alpha(c_t) L_{t-1} + beta(c_t) over the whole curriculum."""
    if curriculum.n != params.n:
        raise ValidationError(
            f"simulate: curriculum n={curriculum.n} does not match params n={params.n}"
        )
    if not math.isfinite(initial_loss):
        raise ValidationError(f"simulate: initial loss must be finite, got {initial_loss!r}")
    losses: list[float] = []
    diverged_at = None
    value = float(initial_loss)
    for t, batch in enumerate(curriculum.steps, start=1):
        alpha, beta = params.step_gains(batch)
        value = alpha * value + beta
        if not math.isfinite(value):
            diverged_at = t
            losses.extend([math.nan] * (curriculum.num_steps - t + 1))
            break
        losses.append(value)
    return SimulatedTrajectory(
        test_example_id=params.test_example_id,
        initial_loss=float(initial_loss),
        losses=tuple(losses),
        diverged_at=diverged_at,
    )


def simulate_batch(
    params_list: Sequence[SimulatorParams], run: Run
) -> list[SimulatedTrajectory | SimulationFailure]:
    """Simulate each params over `run`'s curriculum from its recorded L0.

    The output aligns with the input; any per-entry problem (no L0 for
    that test example, mismatched n) yields a SimulationFailure entry
    instead of aborting the batch.
    """
    out: list[SimulatedTrajectory | SimulationFailure] = []
    for params in params_list:
        traj = run.trajectory_for(params.test_example_id)
        if traj is None:
            out.append(
                SimulationFailure(
                    params.test_example_id,
                    f"run {run.run_id} does not track test example {params.test_example_id}",
                )
            )
            continue
        try:
            out.append(simulate(params, run.curriculum, traj.initial_loss))
        except RunSimError as exc:
            out.append(SimulationFailure(params.test_example_id, str(exc)))
    return out


# ---------------------------------------------------------------------------
# what-if edits


@dataclass(frozen=True)
class RemoveExample:
    """Delete every occurrence of one example; emptied steps are dropped."""

    example_id: int


@dataclass(frozen=True)
class RemoveSteps:
    """Delete steps start..stop (1-based, inclusive)."""

    start: int
    stop: int


@dataclass(frozen=True)
class DuplicateExample:
    """Multiply each occurrence's in-batch multiplicity by `count`."""

    example_id: int
    count: int


@dataclass(frozen=True)
class Reorder:
    """Permute steps: new step t takes the old batch at order[t-1]."""

    order: tuple[int, ...]


@dataclass(frozen=True)
class ReplaceBatch:
    """Substitute the batch consumed at one step."""

    step: int
    batch: tuple[int, ...]


CurriculumEdit = Union[RemoveExample, RemoveSteps, DuplicateExample, Reorder, ReplaceBatch]


def _edit_error(edit: CurriculumEdit, message: str) -> EditError:
    return EditError(f"{edit!r}: {message}")


def _apply_edit(cur: Curriculum, edit: CurriculumEdit) -> Curriculum:
    steps = [list(b) for b in cur.steps]
    if isinstance(edit, RemoveExample):
        if not 1 <= edit.example_id <= cur.n:
            raise _edit_error(edit, f"example id outside [1, {cur.n}]")
        if not any(edit.example_id in b for b in steps):
            raise _edit_error(edit, "example does not occur in this curriculum")
        steps = [[i for i in b if i != edit.example_id] for b in steps]
        steps = [b for b in steps if b]  # a removed step never happens
    elif isinstance(edit, RemoveSteps):
        if not (1 <= edit.start <= edit.stop <= cur.num_steps):
            raise _edit_error(
                edit, f"need 1 <= start <= stop <= {cur.num_steps}"
            )
        del steps[edit.start - 1 : edit.stop]
    elif isinstance(edit, DuplicateExample):
        if not 1 <= edit.example_id <= cur.n:
            raise _edit_error(edit, f"example id outside [1, {cur.n}]")
        if not isinstance(edit.count, int) or edit.count < 1:
            raise _edit_error(edit, "count must be an int >= 1")
        if not any(edit.example_id in b for b in steps):
            raise _edit_error(edit, "example does not occur in this curriculum")
        steps = [
            sorted(b) + [edit.example_id] * (b.count(edit.example_id) * (edit.count - 1))
            for b in steps
        ]
    elif isinstance(edit, Reorder):
        if sorted(edit.order) != list(range(1, cur.num_steps + 1)):
            raise _edit_error(edit, f"order must be a permutation of 1..{cur.num_steps}")
        steps = [steps[t - 1] for t in edit.order]
    elif isinstance(edit, ReplaceBatch):
        if not 1 <= edit.step <= cur.num_steps:
            raise _edit_error(edit, f"step outside [1, {cur.num_steps}]")
        if not edit.batch:
            raise _edit_error(edit, "replacement batch is empty")
        for i in edit.batch:
            if not 1 <= i <= cur.n:
                raise _edit_error(edit, f"example id {i} outside [1, {cur.n}]")
        steps[edit.step - 1] = list(edit.batch)
    else:
        raise EditError(f"unknown edit {edit!r}")
    if not steps:
        raise _edit_error(edit, "edit leaves an empty curriculum")
    return Curriculum(cur.n, tuple(tuple(b) for b in steps))


def apply_edits(curriculum: Curriculum, edits: Sequence[CurriculumEdit]) -> Curriculum:
    """Apply edits left to right; the empty list returns the input unchanged."""
    cur = curriculum
    for edit in edits:
        cur = _apply_edit(cur, edit)
    return cur


def what_if(
    params: SimulatorParams, base_run: Run, edits: Sequence[CurriculumEdit]
) -> SimulatedTrajectory:
    """Simulate the edited curriculum from the base run's recorded L0."""
    traj = base_run.trajectory_for(params.test_example_id)
    if traj is None:
        raise ValidationError(
            f"what_if: run {base_run.run_id} does not track test example "
            f"{params.test_example_id}"
        )
    edited = apply_edits(base_run.curriculum, edits)
    return simulate(params, edited, traj.initial_loss)


# ---------------------------------------------------------------------------
# wire form shared by the CLI, the service, and the UI

_EDIT_OPS = {
    "remove_example": RemoveExample,
    "remove_steps": RemoveSteps,
    "duplicate_example": DuplicateExample,
    "reorder": Reorder,
    "replace_batch": ReplaceBatch,
}


def edit_to_doc(edit: CurriculumEdit) -> dict:
    if isinstance(edit, RemoveExample):
        return {"op": "remove_example", "example_id": edit.example_id}
    if isinstance(edit, RemoveSteps):
        return {"op": "remove_steps", "start": edit.start, "stop": edit.stop}
    if isinstance(edit, DuplicateExample):
        return {"op": "duplicate_example", "example_id": edit.example_id, "count": edit.count}
    if isinstance(edit, Reorder):
        return {"op": "reorder", "order": list(edit.order)}
    if isinstance(edit, ReplaceBatch):
        return {"op": "replace_batch", "step": edit.step, "batch": list(edit.batch)}
    raise EditError(f"unknown edit {edit!r}")


def edit_from_doc(doc: Mapping) -> CurriculumEdit:
    if not isinstance(doc, Mapping) or "op" not in doc:
        raise EditError(f"edit document must be an object with an 'op' field, got {doc!r}")
    op = doc["op"]
    if op not in _EDIT_OPS:
        raise EditError(f"unknown edit op {op!r}")
    fields = {k: v for k, v in doc.items() if k != "op"}
    try:
        if op == "reorder":
            fields["order"] = tuple(fields.get("order", ()))
        if op == "replace_batch":
            fields["batch"] = tuple(fields.get("batch", ()))
        return _EDIT_OPS[op](**fields)
    except TypeError as exc:
        raise EditError(f"bad fields for edit op {op!r}: {exc}") from None
