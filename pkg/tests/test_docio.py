import math

import pytest

from runsim import docio
from runsim.errors import ParseError


def test_float_formatting_is_17_significant_digits():
    assert docio.format_float(0.1) == "0.10000000000000001"
    assert docio.format_float(1.0) == "1"
    assert docio.format_float(-2.5) == "-2.5"
    # 1e300 is not exactly representable; 17 digits expose that honestly
    assert docio.format_float(1e300) == "1.0000000000000001e+300"


def test_float_formatting_round_trips(rng_seed=0):
    import numpy as np

    rng = np.random.default_rng(rng_seed)
    for _ in range(500):
        x = float(rng.standard_normal() * 10.0 ** rng.integers(-300, 300))
        assert float(docio.format_float(x)) == x


def test_non_finite_floats_are_rejected():
    for bad in (math.inf, -math.inf, math.nan):
        with pytest.raises(ValueError):
            docio.format_float(bad)
        with pytest.raises(ValueError):
            docio.dumps({"x": bad})


def test_dumps_canonical_layout():
    doc = {"b": 1, "a": [1.5, "x", None, True, False], "c": {"k": 2}}
    # insertion order, single space after separators, bools lowercase
    assert docio.dumps(doc) == '{"b": 1, "a": [1.5, "x", null, true, false], "c": {"k": 2}}'


def test_dumps_rejects_non_string_keys():
    with pytest.raises(TypeError):
        docio.dumps({1: "x"})


def test_loads_rejects_duplicate_keys():
    with pytest.raises(ParseError) as err:
        docio.loads('{"a": 1, "a": 2}', line=7)
    assert err.value.line == 7
    assert "duplicate" in str(err.value)


def test_loads_bad_json_is_a_parse_error():
    with pytest.raises(ParseError):
        docio.loads("{nope")


def test_serialize_parse_identity():
    doc = {"n": 3, "vals": [0.1, 2.0, -47.25], "name": "r0", "flag": True, "none": None}
    text = docio.dumps(doc)
    assert docio.loads(text) == doc
    # a second round trip is byte-stable
    assert docio.dumps(docio.loads(text)) == text
