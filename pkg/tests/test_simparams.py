import numpy as np
import pytest

from runsim.errors import ValidationError
from runsim.simparams import (
    SimulatorParams,
    SimulatorVariant,
    load_params_doc,
    params_doc,
    params_from_doc,
    save_params_doc,
)


def _linear(tid=1, n=2):
    return SimulatorParams(
        test_example_id=tid,
        variant=SimulatorVariant.LINEAR,
        n=n,
        a=np.full(n, 0.9),
        b=np.full(n, -0.1),
        lam=0.5,
        rss=1e-9,
        rank=2 * n,
        rows=7,
    )


def test_variant_capabilities():
    assert SimulatorVariant.LINEAR.has_multiplicative
    assert SimulatorVariant.LINEAR.has_additive
    assert not SimulatorVariant.ADDITIVE.has_multiplicative
    assert not SimulatorVariant.MULTIPLICATIVE.has_additive
    assert SimulatorVariant("linear") is SimulatorVariant.LINEAR


def test_params_enforce_variant_weight_shape():
    with pytest.raises(ValidationError):
        SimulatorParams(1, SimulatorVariant.LINEAR, 2, a=None, b=np.zeros(2))
    with pytest.raises(ValidationError):
        SimulatorParams(1, SimulatorVariant.ADDITIVE, 2, a=np.ones(2), b=np.zeros(2))
    with pytest.raises(ValidationError):
        SimulatorParams(1, SimulatorVariant.MULTIPLICATIVE, 2, a=np.ones(2), b=np.zeros(2))
    with pytest.raises(ValidationError):
        SimulatorParams(1, SimulatorVariant.LINEAR, 3, a=np.ones(2), b=np.zeros(3))
    with pytest.raises(ValidationError):
        SimulatorParams(1, SimulatorVariant.LINEAR, 2, a=np.array([1.0, float("nan")]), b=np.zeros(2))


def test_weight_arrays_are_read_only():
    p = _linear()
    with pytest.raises(ValueError):
        p.a[0] = 2.0


def test_step_gains_accumulate_multiplicity():
    p = SimulatorParams(
        1, SimulatorVariant.LINEAR, 3,
        a=np.array([0.5, 0.2, 0.1]), b=np.array([-1.0, 2.0, 0.5]),
    )
    alpha, beta = p.step_gains((1, 2))
    assert alpha == pytest.approx(0.7)
    assert beta == pytest.approx(1.0)
    alpha, beta = p.step_gains((3, 3, 3))
    assert alpha == pytest.approx(0.3)
    assert beta == pytest.approx(1.5)
    assert isinstance(alpha, float) and isinstance(beta, float)


def test_step_gains_defaults_per_variant():
    add = SimulatorParams(1, SimulatorVariant.ADDITIVE, 2, a=None, b=np.array([-1.0, -2.0]))
    assert add.step_gains((1, 2)) == (1.0, -3.0)
    mul = SimulatorParams(1, SimulatorVariant.MULTIPLICATIVE, 2, a=np.array([0.4, 0.5]), b=None)
    assert mul.step_gains((1, 2)) == (0.9, 0.0)


def test_params_doc_round_trip(tmp_path):
    fits = {1: _linear(1), 3: _linear(3)}
    doc = params_doc(fits)
    assert doc["version"] == 1
    assert doc["variant"] == "linear"
    assert [f["test_example_id"] for f in doc["fits"]] == [1, 3]
    back = params_from_doc(doc)
    assert sorted(back) == [1, 3]
    assert np.array_equal(back[1].a, fits[1].a)
    assert back[1].lam == 0.5
    assert back[1].rank == 4
    path = tmp_path / "params.json"
    save_params_doc(fits, path)
    assert sorted(load_params_doc(path)) == [1, 3]


def test_params_doc_rejects_mixed_variants():
    add = SimulatorParams(2, SimulatorVariant.ADDITIVE, 2, a=None, b=np.zeros(2))
    with pytest.raises(ValidationError):
        params_doc({1: _linear(1), 2: add})


def test_params_from_doc_rejects_malformed_documents():
    good = params_doc({1: _linear()})
    for mutate in (
        lambda d: d.pop("version"),
        lambda d: d.update(version=99),
        lambda d: d.update(variant="bogus"),
        lambda d: d["fits"][0].pop("A"),
        lambda d: d["fits"][0].update(A=[1.0]),  # wrong length
    ):
        doc = params_doc({1: _linear()})
        mutate(doc)
        with pytest.raises(ValidationError):
            params_from_doc(doc)
    # unmutated control still parses
    params_from_doc(good)
