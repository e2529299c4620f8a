"""Command line front end.

Thin dispatch onto the package: every subcommand parses arguments,
loads documents, calls one workflow, and writes documents back out.
Exit codes: 0 success, 1 bad usage, 2 a reported operation failure.
"""

import argparse
import sys

from . import __version__, docio
from .analysis import compare_methods, cost_model
from .errors import ConfigError, RunSimError, ValidationError
from .fitting import DEFAULT_LAMBDA_GRID, build_design, check_identifiability
from .pipeline import (
    fit_collection,
    simulator_method,
    split_runs,
    tracked_test_ids,
    what_if_report,
)
from .rollout import edit_from_doc, simulate
from .runs import load_run_log, save_run_log
from .simparams import SimulatorVariant, load_params_doc, save_params_doc
from .toylab import generate_from_doc, load_traces, save_traces


class _Parser(argparse.ArgumentParser):
    # usage problems exit 1; argparse's default of 2 is reserved for
    # operation failures here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _read_json(path: str, what: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {what} {path!r}: {exc}") from None
    return docio.loads(text)


def _write_doc(doc, path: str | None) -> None:
    text = docio.dumps(doc) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _variant(name: str) -> SimulatorVariant:
    try:
        return SimulatorVariant(name)
    except ValueError:
        raise ConfigError(
            f"unknown variant {name!r}; expected one of "
            f"{', '.join(v.value for v in SimulatorVariant)}"
        ) from None


# ---------------------------------------------------------------------------
# subcommands


def _cmd_generate(args) -> int:
    config = _read_json(args.config, "config")
    run_set, traces = generate_from_doc(config)
    save_run_log(run_set, args.out)
    print(
        f"wrote {len(run_set.runs)} runs "
        f"({len(run_set.past_runs())} past, {len(run_set.future_runs())} future) "
        f"to {args.out}",
        file=sys.stderr,
    )
    if args.traces:
        if traces is None:
            raise ConfigError("generate: this config produces no traces to save")
        from .toylab import CollectionConfig, ToyModel, generate_dataset

        cfg = CollectionConfig.from_doc(
            {k: v for k, v in config.items() if k != "mode"}
        )
        dataset = generate_dataset(cfg.dataset_config())
        model = ToyModel(dim=cfg.dim, classes=cfg.classes, l2=cfg.l2)
        save_traces(args.traces, traces, dataset, model)
        print(f"wrote {len(traces)} traces to {args.traces}", file=sys.stderr)
    return 0


def _cmd_fit(args) -> int:
    run_set = load_run_log(args.runs)
    lam = None if args.lam == "auto" else float(args.lam)
    test_ids = args.test_id if args.test_id else None
    result = fit_collection(
        run_set,
        _variant(args.variant),
        lam=lam,
        val_runs=args.val_runs,
        test_ids=test_ids,
    )
    save_params_doc(result.fits, args.out)
    skipped = f", {len(result.skipped)} skipped" if result.skipped else ""
    print(
        f"fitted {len(result.fits)} test examples at lambda={result.lam:g}"
        f"{' (selected)' if result.lam_selected else ''}{skipped}; wrote {args.out}",
        file=sys.stderr,
    )
    return 0


def _cmd_simulate(args) -> int:
    run_set = load_run_log(args.runs)
    fits = load_params_doc(args.params)
    run = run_set.run(args.run_id)
    ids = sorted(set(args.test_id)) if args.test_id else sorted(
        set(fits) & set(run.tracked_ids)
    )
    if not ids:
        raise ValidationError(f"simulate: run {run.run_id} tracks no fitted test example")
    trajectories = []
    for tid in ids:
        if tid not in fits:
            raise ValidationError(f"simulate: no fitted weights for test example {tid}")
        traj = run.trajectory_for(tid)
        if traj is None:
            raise ValidationError(
                f"simulate: run {run.run_id} does not track test example {tid}"
            )
        sim = simulate(fits[tid], run.curriculum, traj.initial_loss)
        trajectories.append(
            {
                "test_example_id": tid,
                "initial_loss": sim.initial_loss,
                "losses": [None if v != v else v for v in sim.losses],
                "diverged_at": sim.diverged_at,
            }
        )
    _write_doc({"run_id": run.run_id, "trajectories": trajectories}, args.out)
    return 0


def _cmd_whatif(args) -> int:
    run_set = load_run_log(args.runs)
    fits = load_params_doc(args.params)
    run = run_set.run(args.run_id)
    edits_doc = _read_json(args.edits, "edits")
    if isinstance(edits_doc, dict):
        edits_doc = edits_doc.get("edits", edits_doc)
    if not isinstance(edits_doc, list):
        raise ConfigError("whatif: edits document must be a list (or {'edits': [...]})")
    edits = [edit_from_doc(e) for e in edits_doc]
    test_ids = args.test_id if args.test_id else None
    report = what_if_report(fits, run, edits, test_ids)
    _write_doc(report, args.out)
    return 0


def _cmd_evaluate(args) -> int:
    run_set = load_run_log(args.runs)
    specs = []
    for entry in args.params:
        name, _, path = entry.rpartition("=")
        fits = load_params_doc(path)
        if not name:
            variant = next(iter(fits.values())).variant.value
            name = f"{variant}:{path}"
        specs.append(simulator_method(name, fits))
    runs = run_set.future_runs() if args.roles == "future" else (
        run_set.past_runs() if args.roles == "past" else run_set.runs
    )
    report = compare_methods(specs, list(runs))
    if args.out:
        _write_doc(report.to_doc(), args.out)
    print(report.to_table())
    return 0


def _cmd_diagnose(args) -> int:
    run_set = load_run_log(args.runs)
    fit_runs, _, _ = split_runs(run_set, args.val_runs)
    ids = sorted(set(args.test_id)) if args.test_id else list(tracked_test_ids(fit_runs))
    variant = _variant(args.variant)
    reports = []
    for tid in ids:
        problem = build_design(fit_runs, tid, variant)
        report = check_identifiability(problem)
        doc = report.to_doc()
        doc["test_example_id"] = tid
        reports.append(doc)
        state = "unique" if report.unique_solution else "underdetermined"
        print(f"test example {tid}: rank {report.rank}/{report.num_params}, {state}")
    _write_doc({"variant": variant.value, "reports": reports}, args.out)
    return 0


def _cmd_cost(args) -> int:
    report = cost_model(
        args.n_train, args.m_test, args.checkpoints, args.loss_cost, args.grad_cost
    )
    if args.out:
        _write_doc(report.to_doc(), args.out)
    print(report.to_table())
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service.app import create_app

    app = create_app(args.data_dir, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="runsim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("generate", parents=[], help="produce a run log from a config")
    p.add_argument("--config", required=True, help="JSON config (toy or synthetic mode)")
    p.add_argument("--out", required=True, help="run log to write")
    p.add_argument("--traces", help="also write the checkpoint trace sidecar (toy mode)")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("fit", help="fit per-example weights from past runs")
    p.add_argument("--runs", required=True, help="run log")
    p.add_argument("--variant", default="linear", help="linear | additive | multiplicative")
    p.add_argument("--lam", default="auto", help="ridge strength, or 'auto' to select")
    p.add_argument("--val-runs", type=int, default=2,
                   help="past runs reserved for lambda selection (default 2)")
    p.add_argument("--test-id", type=int, action="append",
                   help="fit only these test examples (repeatable)")
    p.add_argument("--out", required=True, help="weights document to write")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("simulate", help="replay fitted weights over a recorded run")
    p.add_argument("--runs", required=True)
    p.add_argument("--params", required=True, help="fitted weights document")
    p.add_argument("--run-id", required=True)
    p.add_argument("--test-id", type=int, action="append")
    p.add_argument("--out", help="output document (default stdout)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("whatif", help="replay a run with curriculum edits applied")
    p.add_argument("--runs", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--run-id", required=True)
    p.add_argument("--edits", required=True, help="JSON list of edit operations")
    p.add_argument("--test-id", type=int, action="append")
    p.add_argument("--out", help="output document (default stdout)")
    p.set_defaults(func=_cmd_whatif)

    p = sub.add_parser("evaluate", help="score fitted weights against recorded runs")
    p.add_argument("--runs", required=True)
    p.add_argument("--params", required=True, action="append",
                   help="weights document, optionally name=path (repeatable)")
    p.add_argument("--roles", choices=("future", "past", "all"), default="future")
    p.add_argument("--out", help="also write the full report document here")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("diagnose", help="report whether the fit is uniquely determined")
    p.add_argument("--runs", required=True)
    p.add_argument("--variant", default="linear")
    p.add_argument("--val-runs", type=int, default=0,
                   help="past runs to exclude, matching a later fit (default 0)")
    p.add_argument("--test-id", type=int, action="append")
    p.add_argument("--out", help="output document (default stdout)")
    p.set_defaults(func=_cmd_diagnose)

    p = sub.add_parser("cost", help="projected cost of scoring vs gradient methods")
    p.add_argument("--n-train", type=int, required=True)
    p.add_argument("--m-test", type=int, required=True)
    p.add_argument("--checkpoints", type=int, required=True)
    p.add_argument("--loss-cost", type=float, default=1.0)
    p.add_argument("--grad-cost", type=float, default=2.0)
    p.add_argument("--out", help="also write the report document here")
    p.set_defaults(func=_cmd_cost)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8100)
    p.add_argument("--data-dir", required=True, help="directory holding runs.log etc.")
    p.add_argument("--ui-dir", help="static front end to mount at /ui")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except RunSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
