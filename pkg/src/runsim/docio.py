"""Canonical JSON for the on-disk document formats.

The stock json module cannot pin float formatting, and the file formats
promise byte-stable output: dict keys in insertion order, floats at 17
significant digits (round-trip exact for IEEE doubles), no whitespace
beyond a single space after ':' and ','.  Parsing piggybacks on
json.loads but rejects duplicate object keys instead of silently keeping
the last one.
"""

import json
import math
from typing import Any

from .errors import ParseError

__all__ = ["format_float", "dumps", "loads"]


def format_float(x: float) -> str:
    """17-significant-digit decimal form of x; round-trips through float()."""
    if not math.isfinite(x):
        raise ValueError(f"non-finite float cannot be serialized: {x!r}")
    return format(float(x), ".17g")


def dumps(obj: Any) -> str:
    """Serialize a document (dict/list/str/int/float/bool/None) canonically."""
    parts: list[str] = []
    _write(obj, parts)
    return "".join(parts)


def _write(obj: Any, out: list[str]) -> None:
    # bool first: it is a subclass of int
    if obj is None:
        out.append("null")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, int):
        out.append(repr(obj))
    elif isinstance(obj, float):
        out.append(format_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            if not isinstance(k, str):
                raise TypeError(f"document keys must be str, got {type(k).__name__}")
            if i:
                out.append(", ")
            out.append(json.dumps(k, ensure_ascii=False))
            out.append(": ")
            _write(v, out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, v in enumerate(obj):
            if i:
                out.append(", ")
            _write(v, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def _reject_duplicate_keys(pairs: list[tuple[str, Any]]) -> dict[str, Any]:
    d: dict[str, Any] = {}
    for k, v in pairs:
        if k in d:
            raise ValueError(f"duplicate key {k!r}")
        d[k] = v
    return d


def loads(text: str, line: int | None = None) -> Any:
    """Parse one JSON document, rejecting duplicate object keys.

    `line` is attached to the ParseError for callers decoding
    line-delimited files.
    """
    try:
        return json.loads(text, object_pairs_hook=_reject_duplicate_keys)
    except ValueError as exc:
        raise ParseError(str(exc), line=line) from exc
