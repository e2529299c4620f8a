"""Command line interface, exercised in process through main(argv).

Covers exit codes (0 success, 1 usage, 2 reported failure), the
generate/fit/simulate/whatif/evaluate/diagnose/cost flows, and byte
determinism of file outputs run twice from the same inputs.
"""

import json

import pytest

from runsim import docio
from runsim.cli import main


SYNTH_CONFIG = {
    "mode": "synthetic",
    "n": 6,
    "k": 2,
    "runs": 4,
    "future_runs": 1,
    "seed": 5,
    "params_seed": 3,
}

TOY_CONFIG = {
    "mode": "toy",
    "seed": 1,
    "dataset_seed": 11,
    "train_pool": 12,
    "test_pool": 4,
    "runs": 3,
    "fit_runs": 2,
    "val_runs": 0,
    "future_runs": 1,
    "examples_per_run": 6,
    "epochs": 2,
    "batch_size": 1,
    "eta": 0.1,
    "tracked_tests": 2,
}


@pytest.fixture()
def synth_log(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps(SYNTH_CONFIG))
    log = tmp_path / "runs.log"
    assert main(["generate", "--config", str(config), "--out", str(log)]) == 0
    return log


@pytest.fixture()
def synth_params(tmp_path, synth_log):
    out = tmp_path / "params.json"
    code = main(
        ["fit", "--runs", str(synth_log), "--variant", "linear", "--lam", "0",
         "--val-runs", "0", "--out", str(out)]
    )
    assert code == 0
    return out


# ---------------------------------------------------------------------------
# exit codes


def test_usage_errors_exit_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["fit"])  # missing required arguments
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["conjure"])  # no such subcommand
    assert exc.value.code == 1
    capsys.readouterr()


def test_operation_failures_exit_2(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    code = main(["generate", "--config", str(missing), "--out", str(tmp_path / "x.log")])
    assert code == 2
    assert "error:" in capsys.readouterr().err

    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code = main(["generate", "--config", str(bad), "--out", str(tmp_path / "x.log")])
    assert code == 2
    capsys.readouterr()


def test_unknown_variant_exits_2(synth_log, tmp_path, capsys):
    code = main(
        ["fit", "--runs", str(synth_log), "--variant", "cubic", "--lam", "0",
         "--val-runs", "0", "--out", str(tmp_path / "p.json")]
    )
    assert code == 2
    assert "unknown variant" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# generate


def test_generate_writes_a_parseable_log(synth_log, capsys):
    from runsim.runs import load_run_log

    run_set = load_run_log(synth_log)
    assert len(run_set.runs) == 4
    assert len(run_set.future_runs()) == 1


def test_generate_is_byte_deterministic(tmp_path, capsys):
    config = tmp_path / "config.json"
    config.write_text(json.dumps(SYNTH_CONFIG))
    a = tmp_path / "a.log"
    b = tmp_path / "b.log"
    assert main(["generate", "--config", str(config), "--out", str(a)]) == 0
    assert main(["generate", "--config", str(config), "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    capsys.readouterr()


def test_generate_toy_mode_with_traces(tmp_path, capsys):
    config = tmp_path / "toy.json"
    config.write_text(json.dumps(TOY_CONFIG))
    log = tmp_path / "toy.log"
    traces = tmp_path / "traces.log"
    code = main(
        ["generate", "--config", str(config), "--out", str(log), "--traces", str(traces)]
    )
    assert code == 0
    from runsim.toylab import load_traces

    loaded, _, _ = load_traces(traces)
    assert sorted(loaded) == ["r000", "r001", "r002"]
    capsys.readouterr()


def test_generate_synthetic_mode_refuses_traces(tmp_path, capsys):
    config = tmp_path / "config.json"
    config.write_text(json.dumps(SYNTH_CONFIG))
    code = main(
        ["generate", "--config", str(config), "--out", str(tmp_path / "x.log"),
         "--traces", str(tmp_path / "t.log")]
    )
    assert code == 2
    capsys.readouterr()


# ---------------------------------------------------------------------------
# fit and downstream commands


def test_fit_output_is_byte_deterministic(tmp_path, synth_log, capsys):
    a = tmp_path / "pa.json"
    b = tmp_path / "pb.json"
    for out in (a, b):
        code = main(
            ["fit", "--runs", str(synth_log), "--variant", "linear", "--lam", "0",
             "--val-runs", "0", "--out", str(out)]
        )
        assert code == 0
    assert a.read_bytes() == b.read_bytes()
    capsys.readouterr()


def test_fit_writes_a_loadable_params_doc(synth_params):
    from runsim.simparams import load_params_doc

    fits = load_params_doc(synth_params)
    assert sorted(fits) == [1]
    assert fits[1].n == 6


def test_simulate_to_stdout(synth_log, synth_params, capsys):
    code = main(
        ["simulate", "--runs", str(synth_log), "--params", str(synth_params),
         "--run-id", "s000"]
    )
    assert code == 0
    doc = docio.loads(capsys.readouterr().out)
    assert doc["run_id"] == "s000"
    (traj,) = doc["trajectories"]
    assert traj["test_example_id"] == 1
    assert len(traj["losses"]) == 12
    assert traj["diverged_at"] is None


def test_simulate_unknown_run_exits_2(synth_log, synth_params, capsys):
    code = main(
        ["simulate", "--runs", str(synth_log), "--params", str(synth_params),
         "--run-id", "shrug"]
    )
    assert code == 2
    capsys.readouterr()


def test_whatif_round_trip(tmp_path, synth_log, synth_params, capsys):
    edits = tmp_path / "edits.json"
    edits.write_text(json.dumps([{"op": "remove_example", "example_id": 2}]))
    out = tmp_path / "whatif.json"
    code = main(
        ["whatif", "--runs", str(synth_log), "--params", str(synth_params),
         "--run-id", "s001", "--edits", str(edits), "--out", str(out)]
    )
    assert code == 0
    doc = docio.loads(out.read_text())
    assert doc["run_id"] == "s001"
    (result,) = doc["results"]
    assert result["delta_final"] != 0.0
    capsys.readouterr()


def test_whatif_accepts_wrapped_edit_list(tmp_path, synth_log, synth_params, capsys):
    edits = tmp_path / "edits.json"
    edits.write_text(json.dumps({"edits": []}))
    code = main(
        ["whatif", "--runs", str(synth_log), "--params", str(synth_params),
         "--run-id", "s000", "--edits", str(edits)]
    )
    assert code == 0
    doc = docio.loads(capsys.readouterr().out)
    assert doc["results"][0]["delta_final"] == 0.0


def test_whatif_rejects_non_list_edits(tmp_path, synth_log, synth_params, capsys):
    edits = tmp_path / "edits.json"
    edits.write_text(json.dumps({"op": "remove_example", "example_id": 1}))
    code = main(
        ["whatif", "--runs", str(synth_log), "--params", str(synth_params),
         "--run-id", "s000", "--edits", str(edits)]
    )
    assert code == 2
    capsys.readouterr()


def test_evaluate_prints_a_table_and_writes_a_doc(tmp_path, synth_log, synth_params, capsys):
    out = tmp_path / "report.json"
    code = main(
        ["evaluate", "--runs", str(synth_log), "--params", f"exact={synth_params}",
         "--roles", "future", "--out", str(out)]
    )
    assert code == 0
    table = capsys.readouterr().out
    assert "exact" in table and "mse mean" in table
    doc = docio.loads(out.read_text())
    assert doc["run_ids"] == ["s003"]
    # the weights were fit on noise-free data from the same family, so
    # the held-out error is numerically zero
    assert doc["methods"][0]["mean_all_steps_mse"] < 1e-16


def test_evaluate_default_method_name(synth_log, synth_params, capsys):
    code = main(
        ["evaluate", "--runs", str(synth_log), "--params", str(synth_params)]
    )
    assert code == 0
    assert "linear:" in capsys.readouterr().out


def test_diagnose_reports_rank(synth_log, capsys):
    code = main(["diagnose", "--runs", str(synth_log), "--variant", "linear"])
    assert code == 0
    out = capsys.readouterr().out
    assert "test example 1: rank 12/12, unique" in out


def test_cost_command(tmp_path, capsys):
    out = tmp_path / "cost.json"
    code = main(
        ["cost", "--n-train", "100", "--m-test", "10", "--checkpoints", "5",
         "--out", str(out)]
    )
    assert code == 0
    assert "crossover_checkpoints" in capsys.readouterr().out
    doc = docio.loads(out.read_text())
    assert doc["additive_fit_cost"] == 2000.0
