"""Score baselines and their simulator readings.

The load-bearing checks are the dual-route identities: loss-delta
scores against the pooled closed form, checkpoint scores against the
hypothetical-step route, and the second-order weights against a direct
Hessian-solve score.  Each pair is computed through genuinely different
code paths.
"""

import numpy as np
import pytest

from runsim import baselines
from runsim.baselines import (
    CheckpointTrace,
    InfluenceScores,
    ScoreMethod,
    expected_tracin_ideal,
    hypothetical_additive_fit,
    hypothetical_linear_fit,
    hypothetical_loss_reduction,
    influence_function_score,
    optimal_rescale,
    scores_doc,
    scores_from_doc,
    second_order_additive_fit,
    select_checkpoints,
    simulate_from_scores,
    tracin_cp,
    tracin_ideal,
)
from runsim.errors import (
    DataError,
    UndefinedStatisticError,
    UnsupportedSettingError,
    ValidationError,
)
from runsim.fitting import closed_form_additive, fit_simulator
from runsim.runs import Curriculum, LossTrajectory, Run
from runsim.simparams import SimulatorVariant


def _run(steps, l0, losses, run_id="h0", tid=1, n=3):
    return Run(
        run_id=run_id,
        role="past",
        curriculum=Curriculum(n, steps),
        trajectories=(LossTrajectory(tid, l0, dict(enumerate(losses, start=1))),),
    )


# ---------------------------------------------------------------------------
# loss-delta scores


def test_tracin_ideal_sums_recorded_drops():
    run = _run(((1,), (2,), (1,)), 10.0, [8.0, 7.0, 6.5])
    scores = tracin_ideal(run, 1)
    assert scores.method is ScoreMethod.TRACIN_IDEAL
    assert np.array_equal(scores.scores, [2.5, 1.0, 0.0])
    assert np.array_equal(scores.normalizers, [2.0, 1.0, 0.0])
    # -score/count is the per-example mean drop, negated
    assert np.array_equal(scores.additive_weights(), [-1.25, -1.0, 0.0])


def test_tracin_ideal_requires_tracked_example_and_single_batches():
    run = _run(((1,), (2,)), 5.0, [4.0, 3.0])
    with pytest.raises(DataError):
        tracin_ideal(run, 2)
    batched = _run(((1, 2), (3,)), 5.0, [4.0, 3.0])
    with pytest.raises(UnsupportedSettingError):
        tracin_ideal(batched, 1)


def test_expected_tracin_ideal_matches_pooled_closed_form(tiny_collection):
    _, run_set, _ = tiny_collection
    fit_runs = run_set.past_runs()[:2]
    for tid in (1, 2, 3):
        pooled = expected_tracin_ideal(fit_runs, tid)
        closed = closed_form_additive(fit_runs, tid)
        present = closed.present()
        assert np.allclose(
            pooled.additive_weights()[present], closed.values[present], rtol=0, atol=1e-12
        )
        # silent entries agree too: weight 0 with normalizer 0, NaN value
        assert np.all(pooled.normalizers[~present] == 0)
        assert np.all(np.isnan(closed.values[~present]))


def test_expected_tracin_ideal_averages_per_run_scores():
    r1 = _run(((1,), (2,)), 10.0, [8.0, 7.0], run_id="h1")
    r2 = _run(((1,), (1,)), 6.0, [5.0, 4.5], run_id="h2")
    pooled = expected_tracin_ideal([r1, r2], 1)
    # example 1: run scores 2.0 and 1.5, counts 1 and 2
    assert pooled.scores[0] == pytest.approx((2.0 + 1.5) / 2)
    assert pooled.normalizers[0] == pytest.approx(1.5)
    # example 2 appears in one run only
    assert pooled.scores[1] == 1.0 and pooled.normalizers[1] == 1.0
    assert pooled.scores[2] == 0.0 and pooled.normalizers[2] == 0.0


# ---------------------------------------------------------------------------
# checkpoint scores


def test_hypothetical_loss_reduction_is_eta_times_inner_product():
    g_i = np.array([1.0, -2.0])
    g_z = np.array([0.5, 1.0])
    assert hypothetical_loss_reduction(g_i, g_z, 0.1) == pytest.approx(0.1 * -1.5)
    with pytest.raises(ValidationError):
        hypothetical_loss_reduction(g_i, np.array([1.0]), 0.1)
    with pytest.raises(ValidationError):
        hypothetical_loss_reduction(g_i, g_z, -0.1)


def test_tracin_cp_equals_hypothetical_additive_route(tiny_collection):
    _, run_set, traces = tiny_collection
    run = run_set.runs[0]
    trace = traces[run.run_id]
    ids = trace.hessian_train_ids
    for tid in (1, 3):
        scores = tracin_cp(trace, ids, tid)
        b_hat = hypothetical_additive_fit(trace, ids, tid)
        assert np.allclose(scores.additive_weights(), b_hat, rtol=0, atol=1e-12)
        cols = np.array(ids) - 1
        assert np.all(scores.normalizers[cols] == trace.num_checkpoints)


def test_tracin_cp_respects_a_checkpoint_budget(tiny_collection):
    _, run_set, traces = tiny_collection
    run = run_set.runs[0]
    subset = select_checkpoints(traces[run.run_id], 3)
    scores = tracin_cp(subset, trace_ids := traces[run.run_id].hessian_train_ids, 1)
    cols = np.array(trace_ids) - 1
    assert np.all(scores.normalizers[cols] == 3)
    with pytest.raises(ValidationError):
        tracin_cp(subset, [], 1)


def test_second_order_weights_equal_influence_scores(tiny_collection):
    _, run_set, traces = tiny_collection
    run = run_set.runs[0]
    trace = traces[run.run_id]
    ids = trace.hessian_train_ids[:4]
    b_hat = second_order_additive_fit(trace, ids, 2)
    last = trace.num_checkpoints - 1
    hessian = trace.training_hessian(trace.thetas[last])
    g_z = trace.test_grad(last, 2)
    for i in ids:
        direct = influence_function_score(trace.train_grad(last, i), g_z, hessian)
        assert b_hat[i - 1] == pytest.approx(-direct, rel=0, abs=1e-12)
    untouched = sorted(set(range(1, trace.n_train + 1)) - set(ids))
    assert np.all(b_hat[np.array(untouched) - 1] == 0)


def test_influence_function_rejects_bad_hessians():
    g = np.array([1.0, 0.0])
    from runsim.errors import ConditioningError

    with pytest.raises(ConditioningError):
        influence_function_score(g, g, np.array([[1.0, 2.0], [0.0, 1.0]]))  # asymmetric
    with pytest.raises(ConditioningError):
        influence_function_score(g, g, -np.eye(2))  # not positive definite
    with pytest.raises(ValidationError):
        influence_function_score(g, g, np.eye(3))


# ---------------------------------------------------------------------------
# checkpoint subsetting


def _dummy_trace(num=10):
    zero = np.zeros(2)
    return CheckpointTrace(
        steps=tuple(range(num)),
        etas=(0.1,) * num,
        thetas=(zero,) * num,
        n_train=3,
        train_gradient=lambda theta, i: zero,
        test_gradient=lambda theta, i: zero,
        test_loss=lambda theta, i: 1.0,
    )


def test_select_checkpoints_picks_evenly_spaced_endpoints():
    trace = _dummy_trace(10)
    picked = select_checkpoints(trace, 3)
    # linspace over 10 checkpoints rounds the midpoint down: indices 0, 4, 9
    assert picked.steps == (0, 4, 9)
    assert select_checkpoints(trace, 10) is trace
    assert select_checkpoints(trace, 99) is trace
    assert select_checkpoints(trace, 1).steps == (0,)
    with pytest.raises(ValidationError):
        select_checkpoints(trace, 0)


def test_trace_validation():
    zero = np.zeros(2)
    with pytest.raises(ValidationError):
        CheckpointTrace(
            steps=(0, 0),
            etas=(0.1, 0.1),
            thetas=(zero, zero),
            n_train=3,
            train_gradient=lambda t, i: zero,
            test_gradient=lambda t, i: zero,
            test_loss=lambda t, i: 1.0,
        )
    with pytest.raises(ValidationError):
        CheckpointTrace(
            steps=(0, 1),
            etas=(0.1,),
            thetas=(zero, zero),
            n_train=3,
            train_gradient=lambda t, i: zero,
            test_gradient=lambda t, i: zero,
            test_loss=lambda t, i: 1.0,
        )


def test_trace_accessors_guard_unknown_examples(tiny_collection):
    _, run_set, traces = tiny_collection
    trace = traces[run_set.runs[0].run_id]
    with pytest.raises(DataError):
        trace.train_grad(0, 99)
    with pytest.raises(DataError):
        trace.train_grad_matrix(0, [1, 99])
    with pytest.raises(DataError):
        trace.test_grad(0, 99)  # only 4 test examples exist
    with pytest.raises(DataError):
        trace.test_loss_at(0, 99)


# ---------------------------------------------------------------------------
# hypothetical linear fits


def test_hypothetical_linear_fit_shapes(tiny_collection):
    _, run_set, traces = tiny_collection
    run = run_set.runs[0]
    trace = traces[run.run_id]
    ids = trace.hessian_train_ids[:3]
    params = hypothetical_linear_fit(trace, ids, 1, lam=0.01)
    assert params.variant is SimulatorVariant.LINEAR
    assert params.rows == trace.num_checkpoints * len(ids)
    assert params.a.shape == (trace.n_train,)


def test_hypothetical_linear_fit_actual_mode_reproduces_plain_fit(tiny_collection):
    _, run_set, traces = tiny_collection
    run = run_set.runs[1]
    trace = traces[run.run_id]
    # every step has a checkpoint, so actual-target rows are exactly the
    # recorded consecutive pairs and the ridge solutions must coincide
    via_trace = hypothetical_linear_fit(trace, [1], 2, lam=0.1, targets="actual", run=run)
    direct = fit_simulator([run], 2, SimulatorVariant.LINEAR, lam=0.1)
    assert via_trace.rows == direct.rows
    assert np.allclose(via_trace.a, direct.a, rtol=0, atol=1e-10)
    assert np.allclose(via_trace.b, direct.b, rtol=0, atol=1e-10)


def test_hypothetical_linear_fit_rejects_unknown_modes(tiny_collection):
    _, run_set, traces = tiny_collection
    trace = traces[run_set.runs[0].run_id]
    with pytest.raises(ValidationError):
        hypothetical_linear_fit(trace, [1], 1, targets="sideways")
    with pytest.raises(ValidationError):
        hypothetical_linear_fit(trace, [1], 1, targets="actual")  # needs a run


# ---------------------------------------------------------------------------
# scores as simulators


def test_simulate_from_scores_rolls_additive_weights():
    scores = InfluenceScores(
        test_example_id=1,
        method=ScoreMethod.TRACIN_IDEAL,
        scores=np.array([2.0, -1.0]),
        normalizers=np.array([2.0, 1.0]),
    )
    sim = simulate_from_scores(scores, Curriculum(2, ((1,), (2,))), 10.0)
    assert sim.losses == (9.0, 10.0)


def test_optimal_rescale_oracle():
    p = np.array([1.0, 2.0, 3.0])
    sigma, rescaled = optimal_rescale(p, 2 * p)
    assert sigma == pytest.approx(2.0)
    assert np.allclose(rescaled, 2 * p)
    # orthogonal actual gives sigma 0
    sigma, _ = optimal_rescale(np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    assert sigma == 0.0
    with pytest.raises(UndefinedStatisticError):
        optimal_rescale(np.zeros(3), np.ones(3))
    with pytest.raises(ValidationError):
        optimal_rescale(np.ones(3), np.ones(2))


# ---------------------------------------------------------------------------
# score documents


def test_scores_doc_round_trip():
    scores = InfluenceScores(
        test_example_id=2,
        method=ScoreMethod.TRACIN_CP,
        scores=np.array([0.5, -0.25, 0.0]),
        normalizers=np.array([3.0, 3.0, 0.0]),
    )
    doc = scores_doc(scores)
    assert doc["version"] == baselines.SCORES_DOC_VERSION
    back = scores_from_doc(doc)
    assert back.test_example_id == 2 and back.method is ScoreMethod.TRACIN_CP
    assert np.array_equal(back.scores, scores.scores)
    assert np.array_equal(back.normalizers, scores.normalizers)


def test_scores_doc_validation():
    scores = InfluenceScores(
        test_example_id=1,
        method=ScoreMethod.TRACIN_IDEAL,
        scores=np.array([1.0]),
        normalizers=np.array([1.0]),
    )
    doc = scores_doc(scores)
    for mutate in (
        lambda d: d.pop("method"),
        lambda d: d.update(method="astrology"),
        lambda d: d.update(n=5),
    ):
        bad = scores_doc(scores)
        mutate(bad)
        with pytest.raises(ValidationError):
            scores_from_doc(bad)
    assert scores_from_doc(doc).n == 1


def test_scores_validation():
    with pytest.raises(ValidationError):
        InfluenceScores(1, ScoreMethod.TRACIN_IDEAL, np.array([1.0]), np.array([1.0, 2.0]))
    with pytest.raises(ValidationError):
        InfluenceScores(1, ScoreMethod.TRACIN_IDEAL, np.array([np.nan]), np.array([1.0]))
    with pytest.raises(ValidationError):
        InfluenceScores(1, ScoreMethod.TRACIN_IDEAL, np.array([1.0]), np.array([-1.0]))
