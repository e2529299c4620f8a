"""Fitted simulator parameters: per-example multiplicative and additive
loss-update weights, for one tracked test example.

The per-step update is L_t = alpha(c_t) * L_{t-1} + beta(c_t), where
alpha sums the consumed examples' A entries (with multiplicity) and beta
sums their B entries.  Variants pin one side: ADDITIVE fixes alpha = 1,
MULTIPLICATIVE fixes beta = 0.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Mapping

import math

import numpy as np

from . import docio
from .errors import ValidationError

__all__ = [
    "SimulatorVariant",
    "SimulatorParams",
    "params_doc",
    "params_from_doc",
    "save_params_doc",
    "load_params_doc",
]

PARAMS_DOC_VERSION = 1


class SimulatorVariant(str, Enum):
    LINEAR = "linear"
    ADDITIVE = "additive"
    MULTIPLICATIVE = "multiplicative"

    @property
    def has_multiplicative(self) -> bool:
        return self in (SimulatorVariant.LINEAR, SimulatorVariant.MULTIPLICATIVE)

    @property
    def has_additive(self) -> bool:
        return self in (SimulatorVariant.LINEAR, SimulatorVariant.ADDITIVE)


def _as_weight_vector(v, n: int, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.shape != (n,):
        raise ValidationError(f"params: {name} must have shape ({n},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"params: {name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SimulatorParams:
    """Weights of one fitted simulator plus fit diagnostics.

    `a` is None for ADDITIVE (alpha is the constant 1), `b` is None for
    MULTIPLICATIVE (beta is the constant 0).  `rank` is the numerical
    rank of the design matrix; `rss` the residual sum of squares; both
    None when the params were not produced by a regression fit.
    """

    test_example_id: int
    variant: SimulatorVariant
    n: int
    a: np.ndarray | None
    b: np.ndarray | None
    lam: float = 0.0
    rss: float | None = None
    rank: int | None = None
    rows: int | None = None

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1:
            raise ValidationError(f"params: n must be a positive int, got {self.n!r}")
        if not isinstance(self.test_example_id, int) or self.test_example_id < 1:
            raise ValidationError("params: test_example_id must be a positive int")
        variant = SimulatorVariant(self.variant)
        object.__setattr__(self, "variant", variant)
        if variant.has_multiplicative:
            if self.a is None:
                raise ValidationError(f"params: variant {variant.value} requires A")
            object.__setattr__(self, "a", _as_weight_vector(self.a, self.n, "A"))
        elif self.a is not None:
            raise ValidationError(f"params: variant {variant.value} does not use A")
        if variant.has_additive:
            if self.b is None:
                raise ValidationError(f"params: variant {variant.value} requires B")
            object.__setattr__(self, "b", _as_weight_vector(self.b, self.n, "B"))
        elif self.b is not None:
            raise ValidationError(f"params: variant {variant.value} does not use B")
        if not (isinstance(self.lam, (int, float)) and math.isfinite(self.lam) and self.lam >= 0):
            raise ValidationError(f"params: lambda must be finite and >= 0, got {self.lam!r}")
        object.__setattr__(self, "lam", float(self.lam))

    def step_gains(self, batch: tuple[int, ...]) -> tuple[float, float]:
        """(alpha, beta) for one consumed batch, multiplicity included."""
        alpha = 1.0
        beta = 0.0
        if self.a is not None:
            alpha = 0.0
            for i in batch:
                alpha += self.a[i - 1]
        if self.b is not None:
            for i in batch:
                beta += self.b[i - 1]
        # plain floats: callers do long scalar recursions with these
        return float(alpha), float(beta)


def _fit_entry(p: SimulatorParams) -> dict:
    return {
        "test_example_id": p.test_example_id,
        "lambda": p.lam,
        "A": None if p.a is None else [float(x) for x in p.a],
        "B": None if p.b is None else [float(x) for x in p.b],
        "rss": p.rss,
        "rank": p.rank,
        "rows": p.rows,
    }


def params_doc(fits: Mapping[int, SimulatorParams] | list[SimulatorParams]) -> dict:
    """Versioned document holding one or more fits of a shared variant/n."""
    if isinstance(fits, Mapping):
        fits = [fits[k] for k in sorted(fits)]
    else:
        fits = sorted(fits, key=lambda p: p.test_example_id)
    if not fits:
        raise ValidationError("params document: needs at least one fit")
    variant = fits[0].variant
    n = fits[0].n
    for p in fits:
        if p.variant != variant or p.n != n:
            raise ValidationError("params document: fits must share variant and n")
    seen = set()
    for p in fits:
        if p.test_example_id in seen:
            raise ValidationError(
                f"params document: duplicate fit for test example {p.test_example_id}"
            )
        seen.add(p.test_example_id)
    return {
        "version": PARAMS_DOC_VERSION,
        "variant": variant.value,
        "n": n,
        "fits": [_fit_entry(p) for p in fits],
    }


def params_from_doc(doc) -> dict[int, SimulatorParams]:
    """Inverse of params_doc; returns fits keyed by test example id."""
    if not isinstance(doc, Mapping):
        raise ValidationError("params document: expected an object")
    for key in ("version", "variant", "n", "fits"):
        if key not in doc:
            raise ValidationError(f"params document: missing {key!r}")
    if doc["version"] != PARAMS_DOC_VERSION:
        raise ValidationError(
            f"params document: unsupported version {doc['version']!r}, "
            f"expected {PARAMS_DOC_VERSION}"
        )
    try:
        variant = SimulatorVariant(doc["variant"])
    except ValueError:
        raise ValidationError(
            f"params document: unknown variant {doc['variant']!r}"
        ) from None
    n = doc["n"]
    if isinstance(n, bool) or not isinstance(n, int):
        raise ValidationError("params document: n must be an integer")
    out: dict[int, SimulatorParams] = {}
    for entry in doc["fits"]:
        if not isinstance(entry, Mapping):
            raise ValidationError("params document: each fit must be an object")
        tid = entry.get("test_example_id")
        if isinstance(tid, bool) or not isinstance(tid, int):
            raise ValidationError("params document: fit missing integer test_example_id")
        p = SimulatorParams(
            test_example_id=tid,
            variant=variant,
            n=n,
            a=entry.get("A"),
            b=entry.get("B"),
            lam=float(entry.get("lambda", 0.0)),
            rss=entry.get("rss"),
            rank=entry.get("rank"),
            rows=entry.get("rows"),
        )
        if tid in out:
            raise ValidationError(f"params document: duplicate fit for test example {tid}")
        out[tid] = p
    if not out:
        raise ValidationError("params document: needs at least one fit")
    return out


def save_params_doc(fits, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(docio.dumps(params_doc(fits)) + "\n")


def load_params_doc(path) -> dict[int, SimulatorParams]:
    with open(path, "r", encoding="utf-8") as fh:
        return params_from_doc(docio.loads(fh.read()))
