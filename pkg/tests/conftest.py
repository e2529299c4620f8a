import sys

import pytest

from runsim import toylab


def pytest_terminal_summary(terminalreporter):
    """Print the acceptance verdicts collected during the run, if any."""
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "VERDICTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.line(line)


@pytest.fixture(scope="session")
def tiny_collection():
    """Small instrumented collection: 4 runs, batch size 1, full traces."""
    cfg = toylab.CollectionConfig(
        seed=1,
        dataset_seed=11,
        train_pool=12,
        test_pool=4,
        runs=4,
        fit_runs=2,
        val_runs=1,
        future_runs=1,
        examples_per_run=8,
        epochs=2,
        batch_size=1,
        eta=0.1,
        tracked_tests=3,
    )
    run_set, traces = toylab.make_run_collection(cfg)
    return cfg, run_set, traces


@pytest.fixture(scope="session")
def batched_collection():
    """Batch-size-2 variant for code paths that need real batches."""
    cfg = toylab.CollectionConfig(
        seed=2,
        dataset_seed=22,
        train_pool=12,
        test_pool=4,
        runs=5,
        fit_runs=3,
        val_runs=1,
        future_runs=1,
        examples_per_run=8,
        epochs=3,
        batch_size=2,
        eta=0.1,
        tracked_tests=3,
    )
    run_set, traces = toylab.make_run_collection(cfg)
    return cfg, run_set, traces


@pytest.fixture(scope="session")
def synthetic_exact():
    """Noise-free runs from known weights over a full-rank curriculum."""
    true = toylab.random_linear_params(n=6, k=2, seed=3)
    qm = toylab.build_batching_matrix(6, 2)
    cur = toylab.curriculum_from_Q(qm, repeats=2)
    run_set = toylab.generate_synthetic_runs(true, 3, cur, seed=5, future_count=1)
    return true, cur, run_set
