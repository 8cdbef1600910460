"""
-----------------------------------------------------------------
fairpol - outcome-disparity controlled policy learning
-----------------------------------------------------------------

Command-line entry point.

Subcommands:
- gen-data: draw a semi-synthetic dataset (+ ground-truth sidecar)
- phase1:   train and save the phase-I models
- sweep:    run the slack sweep; write frontier, baselines, metrics and histograms
- lp:       solve a discrete-action ModBrk program
- eval:     summarize a frontier CSV as a markdown report
- plot:     render a frontier CSV as an SVG chart

Exit codes: 0 success, 1 runtime failure, 2 usage or config error, 3 infeasible LP.

Usage:
    fairpol gen-data --config run.cfg --out data.csv
    fairpol sweep --config run.cfg --out results/ --jobs 4
    fairpol lp --epsilon 0.01 --out solution.csv
"""

import argparse
import json
import logging
import math
import os
import sys

import pandas as pd

from .config import (experiment_from_config, generator_spec_from_config, load_config, lp_epsilon,
                     resolve_seed, setup_logging)
from .dataio import (generate_ihdp_surrogate, generate_nyc, ground_truth_path, load_dataset, load_ground_truth,
                     load_ihdp_standin, save_dataset, save_ground_truth)
from .errors import ConfigError, ContractError, DatasetParseError, GenerationError, SchemaError, TrainingError
from .lpsolve import EXAMPLE_PROBLEM, load_problem, save_solution, solution_to_policy, solve_problem
from .nnet import save_net
from .pipeline import (action_histogram, baselines_frame, phase1_train, run_baselines, run_metadata,
                       slack_sweep)
from .plotting import plot_frontier, plot_histogram
from .report import frontier_report, read_frontier

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3

USAGE_ERRORS = (ConfigError, ContractError, DatasetParseError, SchemaError, OSError)
RUNTIME_ERRORS = (GenerationError, TrainingError)


def _start(args, command):
    """Load the config (when given), set up logging and resolve the seed."""
    run_config = load_config(args.config, command) if getattr(args, "config", None) else None
    if run_config is not None:
        setup_logging(run_config.get("logging", "file"), run_config.get("logging", "level"))
    else:
        setup_logging(args.log_file)
    seed = resolve_seed(args.seed, run_config)
    logging.info(f"fairpol {command}: seed={seed}")
    return run_config, seed


def _write_json(data, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True, default=str)


def _acquire_dataset(run_config, seed, data_path=None):
    """
    Dataset and optional ground truth for a run.

    An explicit path wins; otherwise data.source decides between a file and
    one of the generators.
    """
    source = run_config.get("data", "source")
    path = data_path or (run_config.get("data", "path") if source == "file" else None)
    if path:
        dataset = load_dataset(path)
        sidecar = ground_truth_path(path)
        truth = load_ground_truth(sidecar) if sidecar.exists() else None
        return dataset, truth, path
    spec = generator_spec_from_config(run_config, seed)
    if source == "nyc":
        dataset, truth = generate_nyc(spec)
        return dataset, truth, None
    if source == "ihdp":
        source_path = run_config.get("data", "ihdp_source")
        source_rows = load_dataset(source_path) if source_path else load_ihdp_standin()
        return generate_ihdp_surrogate(spec, source_rows), None, None
    raise ConfigError("data.source = file needs data.path or --data", key="data.path")


def cmd_gen_data(args):
    run_config, seed = _start(args, "gen-data")
    source = run_config.get("data", "source")
    spec = generator_spec_from_config(run_config, seed)
    if source == "nyc":
        dataset, truth = generate_nyc(spec)
        save_dataset(dataset, args.out)
        save_ground_truth(truth, ground_truth_path(args.out))
    elif source == "ihdp":
        source_path = run_config.get("data", "ihdp_source")
        source_rows = load_dataset(source_path) if source_path else load_ihdp_standin()
        dataset = generate_ihdp_surrogate(spec, source_rows)
        save_dataset(dataset, args.out)
        _write_json({"generator": "ihdp", "seed": seed, "n": spec.n,
                     "source": source_path or "bundled stand-in"}, ground_truth_path(args.out))
    else:
        raise ConfigError("gen-data needs data.source = nyc or ihdp", key="data.source")
    print(f"Wrote {len(dataset)} rows to {args.out}")
    return EXIT_OK


def cmd_phase1(args):
    run_config, seed = _start(args, "phase1")
    config = experiment_from_config(run_config, seed, faithful=args.faithful or None)
    dataset, truth, _ = _acquire_dataset(run_config, seed, args.data)
    result = phase1_train(dataset, config, truth)

    os.makedirs(args.out, exist_ok=True)
    save_net(result.outcome, os.path.join(args.out, "outcome.json"))
    summary = {"constraint": result.constraint, "fingerprints": result.fingerprints(),
               "diagnostics": result.diagnostics}
    if result.baseline_net is not None:
        save_net(result.baseline_net, os.path.join(args.out, "baseline.json"))
        summary["variances"] = {"vA": result.variances.vA, "vY": result.variances.vY}
    _write_json(summary, os.path.join(args.out, "phase1.json"))
    print(f"Phase I outcome model holdout R2: {result.diagnostics['outcome_r2']:.4f}")
    return EXIT_OK


def _write_sweep_outputs(sweep, dataset, config, out_dir):
    frame = sweep.frame()
    frame.to_csv(os.path.join(out_dir, "frontier.csv"), index=False, lineterminator="\n")
    if sweep.failures:
        pd.DataFrame(sweep.failures, columns=["epsilon", "seed", "error"]).to_csv(
            os.path.join(out_dir, "failures.csv"), index=False, lineterminator="\n")

    metrics_dir = os.path.join(out_dir, "metrics")
    hist_dir = os.path.join(out_dir, "histograms")
    os.makedirs(metrics_dir, exist_ok=True)
    os.makedirs(hist_dir, exist_ok=True)
    all_actions = [dataset.a] + [run.actions for run in sweep.runs.values()]
    value_range = (float(min(a.min() for a in all_actions)), float(max(a.max() for a in all_actions)))
    for (eps, seed), run in sweep.runs.items():
        stem = f"eps{eps:g}_seed{seed}"
        pd.DataFrame(run.metrics, columns=["step", "lambda", "penalty_mu", "violation"]).to_csv(
            os.path.join(metrics_dir, f"{stem}.csv"), index=False, lineterminator="\n")
        hist = action_histogram(run.actions, dataset.s, config.histogram_bins, value_range)
        hist.to_csv(os.path.join(hist_dir, f"{stem}.csv"), index=False, lineterminator="\n")
        plot_histogram(hist, os.path.join(hist_dir, f"{stem}.svg"))


def cmd_sweep(args):
    run_config, seed = _start(args, "sweep")
    config = experiment_from_config(run_config, seed, faithful=args.faithful or None)
    dataset, truth, data_path = _acquire_dataset(run_config, seed, args.data)
    os.makedirs(args.out, exist_ok=True)

    phase1 = phase1_train(dataset, config, truth)
    sweep = slack_sweep(config, dataset, phase1, truth, jobs=args.jobs, progress=not args.quiet)
    _write_sweep_outputs(sweep, dataset, config, args.out)
    if not sweep.rows:
        print(f"All {len(sweep.failures)} sweep runs failed; see failures.csv", file=sys.stderr)
        return EXIT_RUNTIME

    if not args.skip_baselines:
        baselines = run_baselines(dataset, phase1, config, truth)
        baselines_frame(baselines).to_csv(os.path.join(args.out, "baselines.csv"), index=False,
                                          lineterminator="\n")
    meta = run_metadata(config, generator_seed=None if data_path else seed, dataset_path=data_path)
    meta["failures"] = len(sweep.failures)
    _write_json(meta, os.path.join(args.out, "run_metadata.json"))
    print(f"Sweep wrote {len(sweep.rows)} frontier rows to {os.path.join(args.out, 'frontier.csv')}")
    return EXIT_OK


def cmd_lp(args):
    run_config, _ = _start(args, "lp")
    epsilon = args.epsilon if args.epsilon is not None else (
        lp_epsilon(run_config) if run_config is not None else math.inf)
    if not epsilon >= 0:
        raise ConfigError(f"epsilon must be >= 0, got {epsilon}", key="lp.epsilon")
    problem = load_problem(args.problem or EXAMPLE_PROBLEM, args.p, epsilon)
    lp, solution = solve_problem(problem)
    if not solution.optimal:
        print(f"status: {solution.status}")
        return EXIT_INFEASIBLE if solution.status == "infeasible" else EXIT_RUNTIME
    table = solution_to_policy(problem, lp, solution)
    if args.out:
        save_solution(problem, table, args.out)
    print("status: optimal")
    print(f"objective: {solution.objective:.10g}")
    print(f"expected outcome: {solution.expected_outcome:.10g}")
    return EXIT_OK


def cmd_eval(args):
    _start(args, "eval")
    frame = read_frontier(args.frontier)
    baselines = pd.read_csv(args.baselines) if args.baselines else None
    report = frontier_report(frame, baselines)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(report)
    print(report)
    return EXIT_OK


def cmd_plot(args):
    _start(args, "plot")
    frame = read_frontier(args.frontier)
    plot_frontier(frame, args.out)
    print(f"Wrote {args.out}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="fairpol", description="Outcome-disparity controlled policy learning")
    parser.add_argument("--seed", type=int, default=None, help="Seed override (beats config and FAIRPOL_SEED)")
    parser.add_argument("--log-file", default="fairpol.log", help="Log file when no config is given")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="Generate a semi-synthetic dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="Dataset CSV path")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("phase1", help="Train the phase-I models")
    p.add_argument("--config", required=True)
    p.add_argument("--data", help="Dataset CSV (overrides data.source)")
    p.add_argument("--out", required=True, help="Output directory")
    p.add_argument("--faithful", action="store_true", help="Use the full training settings")
    p.set_defaults(func=cmd_phase1)

    p = sub.add_parser("sweep", help="Run the slack sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--data", help="Dataset CSV (overrides data.source)")
    p.add_argument("--out", required=True, help="Output directory")
    p.add_argument("--jobs", type=int, default=1, help="Parallel phase-II runs")
    p.add_argument("--faithful", action="store_true", help="Use the full training settings")
    p.add_argument("--skip-baselines", action="store_true")
    p.add_argument("--quiet", action="store_true", help="Hide the progress bar")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("lp", help="Solve a discrete-action program")
    p.add_argument("problem", nargs="?", help="a,s,x,muY CSV (bundled example when omitted)")
    p.add_argument("--p", help="s,x,p CSV (defaults to <stem>.p.csv)")
    p.add_argument("--epsilon", type=float, default=None, help="Slack (inf when omitted)")
    p.add_argument("--config")
    p.add_argument("--out", help="Solution CSV path")
    p.set_defaults(func=cmd_lp)

    p = sub.add_parser("eval", help="Summarize a frontier CSV")
    p.add_argument("frontier")
    p.add_argument("--baselines")
    p.add_argument("--out", help="Markdown report path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("plot", help="Render a frontier CSV as SVG")
    p.add_argument("frontier")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except USAGE_ERRORS as e:
        logging.error(f"{args.command}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except RUNTIME_ERRORS as e:
        logging.error(f"{args.command}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
