"""Acceptance gate for the package's core claims.

One test per agreed criterion.  Every test records a single [PASS] or
[FAIL] line before asserting; the conftest terminal-summary hook prints
the collected lines after the run, one verdict per criterion.
Tolerances are pinned here and nowhere else; a failing criterion stays
failing until the implementation genuinely meets it.
"""

import math
import time

import numpy as np
import pytest

from runsim import toylab
from runsim.analysis import all_steps_mse, cost_model, final_step_spearman, compare_methods
from runsim.baselines import (
    hypothetical_additive_fit,
    hypothetical_loss_reduction,
    influence_function_score,
    second_order_additive_fit,
    tracin_cp,
    tracin_ideal,
)
from runsim.cli import main
from runsim.fitting import build_design, check_identifiability, closed_form_additive, fit_simulator
from runsim.pipeline import desk_comparison, simulator_method
from runsim.rollout import simulate
from runsim.runs import Curriculum, LossTrajectory, Run, RunSet
from runsim.simparams import SimulatorParams, SimulatorVariant


VERDICTS: list[str] = []  # drained by the terminal-summary hook in conftest


def _verdict(criterion: str, ok: bool, detail: str = "") -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {criterion}"
    if detail:
        line += f"  ({detail})"
    VERDICTS.append(line)


# ---------------------------------------------------------------------------
# 1. exact recovery of known weights from noise-free runs


def test_exact_weight_recovery_from_noise_free_runs():
    n, k = 30, 2
    true = toylab.random_linear_params(n, k, seed=101)
    qm = toylab.build_batching_matrix(n, k)
    cur = toylab.curriculum_from_Q(qm, repeats=2)  # one full-rank pass, twice
    run_set = toylab.generate_synthetic_runs(true, 1, cur, seed=7)

    start = time.perf_counter()
    fitted = fit_simulator(list(run_set.runs), 1, SimulatorVariant.LINEAR, lam=0.0)
    elapsed = time.perf_counter() - start

    rel_a = float(np.max(np.abs(fitted.a - true.a) / np.abs(true.a)))
    rel_b = float(np.max(np.abs(fitted.b - true.b) / np.abs(true.b)))
    ok = rel_a <= 1e-6 and rel_b <= 1e-6 and elapsed < 1.0
    _verdict(
        "exact recovery: noise-free runs return the generating weights",
        ok,
        f"max rel err A {rel_a:.2e}, B {rel_b:.2e}, fit {elapsed * 1e3:.1f} ms",
    )
    assert rel_a <= 1e-6 and rel_b <= 1e-6
    assert elapsed < 1.0


# ---------------------------------------------------------------------------
# 2. halving staircase


def test_two_step_halving_staircase():
    params = SimulatorParams(
        test_example_id=1,
        variant=SimulatorVariant.LINEAR,
        n=2,
        a=np.array([0.5, 0.5]),
        b=np.zeros(2),
    )
    sim = simulate(params, Curriculum(2, ((1,), (2,))), 100.0)
    ok = sim.losses == (50.0, 25.0)
    _verdict("pure-multiplier staircase: 100 halves to 50 then 25, exactly", ok,
             f"got {sim.losses}")
    assert sim.losses == (50.0, 25.0)


# ---------------------------------------------------------------------------
# 3. loss-drop scores agree with the additive closed form


def test_loss_drop_scores_match_closed_form_weights():
    ds = toylab.generate_dataset(
        toylab.DatasetConfig(seed=31, n_train=10, n_test=3, dim=4, classes=3)
    )
    model = toylab.ToyModel(dim=4, classes=3)
    source = toylab.shuffled_epoch_source(10, epochs=2, batch_size=1, subset_size=6)
    worst = 0.0
    for r in range(5):
        rng = np.random.default_rng(300 + r)
        cur = source(rng)
        run, _ = toylab.train_toy(ds, model, cur, 0.1, [1, 2], run_id=f"d{r}")
        for tid in (1, 2):
            closed = closed_form_additive([run], tid)
            scored = tracin_ideal(run, tid).additive_weights()
            present = closed.present()
            gap = float(np.max(np.abs(closed.values[present] - scored[present])))
            worst = max(worst, gap)
    ok = worst < 1e-12
    _verdict(
        "score/closed-form identity: summed loss drops negate to the pooled additive weights",
        ok,
        f"worst |diff| {worst:.2e} over 5 runs x 2 test examples",
    )
    assert worst < 1e-12


# ---------------------------------------------------------------------------
# 4. checkpoint scores agree with the hypothetical-step route


def test_checkpoint_scores_match_hypothetical_step_weights():
    ds = toylab.generate_dataset(
        toylab.DatasetConfig(seed=41, n_train=8, n_test=2, dim=4, classes=3)
    )
    model = toylab.ToyModel(dim=4, classes=3)
    cur = toylab.curriculum_from_Q(toylab.build_batching_matrix(8, 1), repeats=2)
    _, trace = toylab.train_toy(ds, model, cur, 0.1, [1, 2], checkpoint_every=1)
    ids = trace.hessian_train_ids
    worst = 0.0
    for tid in (1, 2):
        scores = tracin_cp(trace, ids, tid)
        b_hat = hypothetical_additive_fit(trace, ids, tid)
        worst = max(worst, float(np.max(np.abs(scores.additive_weights() - b_hat))))
    ok = worst < 1e-12
    _verdict(
        "checkpoint-score identity: inner-product scores equal hypothetical-step weights",
        ok,
        f"worst |diff| {worst:.2e}",
    )
    assert worst < 1e-12


# ---------------------------------------------------------------------------
# 5. second-order weights agree with the Hessian-solve score


def test_newton_step_weights_match_hessian_solve_scores():
    ds = toylab.generate_dataset(
        toylab.DatasetConfig(seed=51, n_train=9, n_test=2, dim=3, classes=3)
    )
    model = toylab.ToyModel(dim=3, classes=3, l2=1e-2)  # ridge keeps H positive definite
    cur = toylab.curriculum_from_Q(toylab.build_batching_matrix(9, 2), repeats=2)
    _, trace = toylab.train_toy(ds, model, cur, 0.1, [1], checkpoint_every=1)
    ids = trace.hessian_train_ids
    b_hat = second_order_additive_fit(trace, ids, 1)
    last = trace.num_checkpoints - 1
    hessian = trace.training_hessian(trace.thetas[last])
    g_z = trace.test_grad(last, 1)
    worst = 0.0
    for i in ids:
        direct = influence_function_score(trace.train_grad(last, i), g_z, hessian)
        worst = max(worst, abs(b_hat[i - 1] + direct))
    ok = worst < 1e-12
    _verdict(
        "second-order identity: Newton-step weights negate the Hessian-solve scores",
        ok,
        f"worst |diff| {worst:.2e}",
    )
    assert worst < 1e-12


# ---------------------------------------------------------------------------
# 6. the first-order gap shrinks quadratically with the step size


def test_first_order_gap_shrinks_quadratically_with_step_size():
    ratios = []
    for seed in range(5):
        ds = toylab.generate_dataset(
            toylab.DatasetConfig(seed=600 + seed, n_train=20, n_test=2, dim=5, classes=3)
        )
        model = toylab.ToyModel(dim=5, classes=3)
        order = [(t % 20) + 1 for t in range(20)]
        gaps = {0.05: 0.0, 0.025: 0.0}
        theta = model.init_params()
        # both step sizes are probed from the same state; the walk itself
        # advances at the larger one
        for i in order:
            x_i, y_i = ds.train_x[i - 1], int(ds.train_y[i - 1])
            g_i = model.gradient(theta, x_i, y_i)
            g_z = model.gradient(theta, ds.test_x[0], int(ds.test_y[0]))
            before = model.loss(theta, ds.test_x[0], int(ds.test_y[0]))
            for eta in gaps:
                predicted = hypothetical_loss_reduction(g_i, g_z, eta)
                after = model.loss(theta - eta * g_i, ds.test_x[0], int(ds.test_y[0]))
                gaps[eta] += abs((before - after) - predicted)
            theta = theta - 0.05 * g_i
        ratios.append(gaps[0.05] / gaps[0.025])
    ok = all(3.0 <= r <= 5.0 for r in ratios)
    _verdict(
        "quadratic remainder: halving the step size cuts the prediction gap ~4x",
        ok,
        "ratios " + ", ".join(f"{r:.2f}" for r in ratios),
    )
    assert ok, f"per-seed gap ratios outside [3, 5]: {ratios}"


# ---------------------------------------------------------------------------
# 7. uniqueness diagnostics flag each known failure shape


def test_uniqueness_diagnostics_flag_each_failure_mode():
    n, k = 12, 2
    true = toylab.random_linear_params(n, k, seed=71)
    qm = toylab.build_batching_matrix(n, k)
    full_cur = toylab.curriculum_from_Q(qm, repeats=2)

    # the full two-pass construction is uniquely solvable
    full_runs = toylab.generate_synthetic_runs(true, 1, full_cur, seed=3)
    full = check_identifiability(build_design(list(full_runs.runs), 1, SimulatorVariant.LINEAR))
    full_ok = full.unique_solution and full.rank == 2 * n and not full.insufficient_rows

    # one row short of the parameter count
    short_cur = Curriculum(n, full_cur.steps[: 2 * n - 1])
    short_runs = toylab.generate_synthetic_runs(true, 1, short_cur, seed=3)
    short = check_identifiability(build_design(list(short_runs.runs), 1, SimulatorVariant.LINEAR))
    short_ok = short.insufficient_rows and short.rank < 2 * n and not short.unique_solution

    # an example consumed only once
    true1 = toylab.random_linear_params(4, 1, seed=72)
    once_cur = Curriculum(4, ((1,), (2,), (3,), (1,), (2,), (3,), (4,), (1,), (2,), (3,)))
    once_runs = toylab.generate_synthetic_runs(true1, 1, once_cur, seed=4)
    once = check_identifiability(build_design(list(once_runs.runs), 1, SimulatorVariant.LINEAR))
    once_ok = 4 in once.underobserved_examples and once.rank < 8 and not once.unique_solution

    # constant recorded losses make a previous-loss column parallel to its bias column
    flat = Run(
        run_id="flat",
        role="past",
        curriculum=Curriculum(2, ((1,), (2,), (1,), (2,))),
        trajectories=(LossTrajectory(1, 5.0, {1: 5.0, 2: 5.0, 3: 5.0, 4: 5.0}),),
    )
    const = check_identifiability(build_design([flat], 1, SimulatorVariant.LINEAR))
    const_ok = (
        const.constant_loss_examples == (1, 2)
        and const.rank < const.num_params
        and not const.unique_solution
    )

    ok = full_ok and short_ok and once_ok and const_ok
    _verdict(
        "uniqueness diagnostics: short row count, one-shot example, constant losses all flagged",
        ok,
        f"full rank {full.rank}/{2 * n}; short {short.rank}; once {once.underobserved_examples}; "
        f"const {const.constant_loss_examples}",
    )
    assert full_ok, full.to_doc()
    assert short_ok, short.to_doc()
    assert once_ok, once.to_doc()
    assert const_ok, const.to_doc()


# ---------------------------------------------------------------------------
# 8. fitted weights beat rescaled checkpoint scores at desk scale


def test_fitted_weights_beat_rescaled_checkpoint_scores_at_desk_scale():
    wins = 0
    rows = []
    slowest = 0.0
    for seed in range(10):
        start = time.perf_counter()
        cfg = toylab.default_desk_config(seed=seed)
        run_set, traces = toylab.make_run_collection(cfg)
        outcome = desk_comparison(run_set, traces, val_runs=cfg.val_runs)
        elapsed = time.perf_counter() - start
        slowest = max(slowest, elapsed)

        linear = outcome.report.method(outcome.linear_name)
        tracin = outcome.report.method(outcome.tracin_name)
        l_mse, _, _ = linear.mse_stats
        t_mse, _, _ = tracin.mse_stats
        l_rho, _, _ = linear.spearman_stats
        t_rho, _, _ = tracin.spearman_stats
        won = l_mse < t_mse and l_rho > t_rho
        wins += won
        rows.append(f"seed {seed}: mse {l_mse:.4g} vs {t_mse:.4g}, "
                    f"rho {l_rho:.3f} vs {t_rho:.3f}, {elapsed:.2f}s")
        assert elapsed < 60.0, f"replication for seed {seed} took {elapsed:.1f}s"
    ok = wins >= 8
    _verdict(
        "desk-scale head-to-head: fitted weights beat rescaled checkpoint scores in >= 8/10 seeds",
        ok,
        f"{wins}/10 wins, slowest replication {slowest:.2f}s",
    )
    assert wins >= 8, "\n".join(rows)


# ---------------------------------------------------------------------------
# 9. the full variant beats its two restrictions on well-specified data


def test_full_variant_beats_restricted_variants_on_well_specified_data():
    failures = []
    details = []
    for seed in range(5):
        n, bs = 12, 3
        true = toylab.random_linear_params(n, bs, seed=900 + seed)
        source = toylab.shuffled_epoch_source(n, epochs=4, batch_size=bs)
        run_set = toylab.generate_synthetic_runs(
            true, 5, source, seed=910 + seed, future_count=2
        )
        past = list(run_set.past_runs())
        future = list(run_set.future_runs())
        specs = []
        for variant in SimulatorVariant:
            fits = {1: fit_simulator(past, 1, variant, lam=0.0)}
            specs.append(simulator_method(variant.value, fits))
        report = compare_methods(specs, future)
        mse = {m.name: m.mse_stats[0] for m in report.methods}
        restricted = min(mse["additive"], mse["multiplicative"])
        details.append(
            f"seed {seed}: linear {mse['linear']:.3g}, best restricted {restricted:.3g}"
        )
        if not mse["linear"] < restricted:
            failures.append(seed)
    ok = not failures
    _verdict(
        "variant ordering: the two-sided fit beats both one-sided fits on matched data, every seed",
        ok,
        "; ".join(details),
    )
    assert not failures, details


# ---------------------------------------------------------------------------
# 10. metric implementations against hand oracles


def test_metric_implementations_against_hand_oracles():
    checks = []

    x = [3.0, 1.0, 4.0, 1.5, 9.0]
    checks.append(abs(final_step_spearman(x, [v + 2 for v in x]) - 1.0) < 1e-12)
    checks.append(abs(final_step_spearman(x, [-v for v in x]) + 1.0) < 1e-12)

    # tied predictions [1, 2, 2, 3] rank as [1, 2.5, 2.5, 4]
    rho = final_step_spearman([1.0, 2.0, 2.0, 3.0], [10.0, 20.0, 30.0, 40.0])
    checks.append(abs(rho - math.sqrt(0.9)) < 1e-12)

    rng = np.random.default_rng(1001)
    invariant = True
    for _ in range(100):
        base = rng.normal(size=7)
        a, b, c = rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0), rng.normal()
        mapped = a * np.exp(b * base) + c  # strictly increasing
        if abs(final_step_spearman(base, mapped) - 1.0) >= 1e-12:
            invariant = False
            break
    checks.append(invariant)

    # brute-force double loop over a random run
    steps = tuple((int(i) % 3 + 1,) for i in range(6))
    trajs = []
    sims = {}
    from runsim.rollout import SimulatedTrajectory

    for tid in (1, 2, 3):
        actual = {t: float(rng.normal()) for t in range(1, 7)}
        predicted = [float(rng.normal()) for _ in range(6)]
        trajs.append(LossTrajectory(tid, 0.0, actual))
        sims[tid] = SimulatedTrajectory(tid, 0.0, tuple(predicted))
    run = Run(run_id="m", role="future", curriculum=Curriculum(3, steps), trajectories=tuple(trajs))
    brute_terms = []
    for traj in trajs:
        errs = []
        for t in sorted(traj.losses):
            errs.append((sims[traj.test_example_id].losses[t - 1] - traj.losses[t]) ** 2)
        brute_terms.append(sum(errs) / len(errs))
    brute = sum(brute_terms) / len(brute_terms)
    mse_gap = abs(all_steps_mse(sims, run) - brute)
    checks.append(mse_gap < 1e-14)

    ok = all(checks)
    _verdict(
        "metric oracles: rank correlation fixtures, monotone invariance, brute-force error",
        ok,
        f"tie fixture |diff| {abs(rho - math.sqrt(0.9)):.1e}, mse |diff| {mse_gap:.1e}",
    )
    assert all(checks), checks


# ---------------------------------------------------------------------------
# 11. projected-cost identities


def test_cost_model_identities():
    n, m = 100, 10
    report = cost_model(n, m, 1, loss_eval_cost=1.0, grad_eval_cost=2.0)
    crossover_exact = report.crossover_checkpoints == n * m / (n + m)
    gradient_at_crossover = (n + m) * report.crossover_checkpoints * 2.0
    equal_at_crossover = math.isclose(
        gradient_at_crossover, report.additive_fit_cost, rel_tol=1e-12
    )
    ok = crossover_exact and equal_at_crossover
    _verdict(
        "cost model: crossover point exact, both families equal when run at it",
        ok,
        f"crossover {report.crossover_checkpoints:.6g}, "
        f"gradient {gradient_at_crossover:g} vs table {report.additive_fit_cost:g}",
    )
    assert crossover_exact
    assert equal_at_crossover


# ---------------------------------------------------------------------------
# 12. pipeline determinism, byte for byte


def test_generate_fit_simulate_is_byte_deterministic(tmp_path):
    import json

    config = tmp_path / "config.json"
    config.write_text(
        json.dumps(
            {
                "mode": "synthetic",
                "n": 8,
                "k": 1,
                "runs": 3,
                "future_runs": 1,
                "seed": 12,
                "params_seed": 6,
            }
        )
    )
    outputs = []
    for tag in ("a", "b"):
        log = tmp_path / f"runs_{tag}.log"
        params = tmp_path / f"params_{tag}.json"
        sim = tmp_path / f"sim_{tag}.json"
        assert main(["generate", "--config", str(config), "--out", str(log)]) == 0
        assert main(
            ["fit", "--runs", str(log), "--variant", "linear", "--lam", "0",
             "--val-runs", "0", "--out", str(params)]
        ) == 0
        assert main(
            ["simulate", "--runs", str(log), "--params", str(params),
             "--run-id", "s002", "--out", str(sim)]
        ) == 0
        outputs.append((log.read_bytes(), params.read_bytes(), sim.read_bytes()))
    same = outputs[0] == outputs[1]
    _verdict(
        "determinism: generate, fit, simulate repeat byte-identically under a fixed seed",
        same,
        f"{len(outputs[0][0])}B log, {len(outputs[0][1])}B weights, {len(outputs[0][2])}B simulation",
    )
    assert same
