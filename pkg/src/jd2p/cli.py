"""Command-line driver: embed, deepen, simulate, experiment, report.

Every verb takes a config file plus an output directory, echoes the fully
resolved configuration next to its outputs, and exits nonzero with one
machine-readable error line on stderr when something goes wrong.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import experiments
from .config import build_dataset, default_config, load_config, resolve
from .learners import save_model
from .sim import (
    BenchmarkKind,
    prepare_data,
    run_benchmark,
    run_jd2p,
    summarize,
    write_ledger_csv,
    write_summary_json,
)


def _load(args):
    app = load_config(args.config)
    if args.seed is not None:
        app = dataclasses.replace(app, sim=dataclasses.replace(app.sim, seed=args.seed))
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "resolved_config.ini"), "w") as handle:
        handle.write(resolve(app))
    return app


def _prepared(app):
    train, test = build_dataset(app.dataset)
    return prepare_data(train, test, app.sim.features)


def cmd_embed(args):
    app = _load(args)
    data = _prepared(app)
    model = data.model
    experiments.write_csv(
        os.path.join(args.out, "eigenvalues.csv"),
        [("feature", "importance rank, 1-based"),
         ("eigenvalue", "explained variance of the component"),
         ("cumulative_fraction", "captured variance over the embedded total")],
        [[i + 1, float(v), float(np.sum(model.eigenvalues[:i + 1]) / np.sum(model.eigenvalues))]
         for i, v in enumerate(model.eigenvalues)],
    )
    np.savez(os.path.join(args.out, "embedding.npz"), mean=model.mean,
             components=model.components, eigenvalues=model.eigenvalues)
    write_summary_json(os.path.join(args.out, "summary.json"), {
        "raw_dim": model.raw_dim,
        "num_features": model.num_features,
        "train_samples": int(data.train_features.shape[0]),
    })
    return 0


def cmd_deepen(args):
    app = _load(args)
    data = _prepared(app)
    result = run_jd2p(app.sim, data)
    deepening = result.deepening
    rows = [[log.round_index, log.acs_size, float(log.threshold),
             float(log.train_accuracy),
             float(log.holdout_accuracy) if log.holdout_accuracy is not None else float("nan")]
            for log in deepening.logs]
    experiments.write_csv(
        os.path.join(args.out, "deepening_log.csv"),
        [("round", "deepening round, 1-based"),
         ("acs_size", "ambiguous candidates entering the round"),
         ("threshold", "clarity threshold for the round"),
         ("train_accuracy", "depth-k classifier accuracy on its training inputs"),
         ("holdout_accuracy", "depth-k classifier accuracy on the held-out split")],
        rows,
    )
    if app.sim.deepening.classifier == "mlp":
        loss_rows = [[log.round_index, e + 1, float(loss)]
                     for log in deepening.logs
                     for e, loss in enumerate(log.epoch_losses)]
        experiments.write_csv(
            os.path.join(args.out, "loss_vs_epoch.csv"),
            [("round", "deepening round, 1-based"),
             ("epoch", "epoch within the round, 1-based"),
             ("loss", "training cross-entropy after the epoch")],
            loss_rows,
        )
    models_dir = os.path.join(args.out, "models")
    os.makedirs(models_dir, exist_ok=True)
    for stage in deepening.hierarchy.stages:
        save_model(stage.classifier, os.path.join(models_dir, f"depth_{stage.depth:02d}.npz"))
    write_summary_json(os.path.join(args.out, "summary.json"), {
        "rounds_executed": len(deepening.logs),
        "termination": deepening.termination,
        "deepening_ratio": result.deepening_ratio,
        "accuracy": result.accuracy,
        "thresholds": [float(log.threshold) for log in deepening.logs],
    })
    return 0


def cmd_simulate(args):
    app = _load(args)
    data = _prepared(app)
    if app.benchmark is BenchmarkKind.JD2P:
        result = run_jd2p(app.sim, data)
    else:
        result = run_benchmark(app.benchmark, app.sim, data)
    write_ledger_csv(os.path.join(args.out, "ledger.csv"), result.ledgers)
    write_summary_json(os.path.join(args.out, "summary.json"), summarize(result, app.sim))
    return 0


def cmd_experiment(args):
    app = _load(args)
    if args.kind:
        app = dataclasses.replace(
            app, experiment=dataclasses.replace(app.experiment, kind=args.kind))
        with open(os.path.join(args.out, "resolved_config.ini"), "w") as handle:
            handle.write(resolve(app))
    experiments.run_experiment(app, args.out)
    return 0


def cmd_report(args):
    summary_path = os.path.join(args.dir, "summary.json")
    if not os.path.exists(summary_path):
        raise FileNotFoundError(f"no summary.json under {args.dir}")
    with open(summary_path) as handle:
        summary = json.load(handle)
    tables = {}
    for name in sorted(os.listdir(args.dir)):
        if name.endswith(".csv"):
            header, rows = experiments.read_csv(os.path.join(args.dir, name))
            tables[name] = {"columns": header, "rows": len(rows)}
    print(json.dumps({"summary": summary, "tables": tables}, indent=2, sort_keys=True))
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="jd2p",
        description="Feature-by-feature offloading simulator: deepening, "
                    "clarity thresholds, and optimal prefetching.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("--config", required=True, help="path to the INI config file")
        p.add_argument("--seed", type=int, default=None, help="override [sim] seed")
        if needs_out:
            p.add_argument("--out", required=True, help="output directory")

    common(sub.add_parser("embed", help="fit the embedding and report eigenvalues"))
    common(sub.add_parser("deepen", help="run the deepening loop and log each round"))
    common(sub.add_parser("simulate", help="full run with the energy ledger"))
    p_exp = sub.add_parser("experiment", help="run a parameter-grid experiment")
    common(p_exp)
    p_exp.add_argument("--kind", default=None,
                       help="override [experiment] kind (e.g. tradeoff-sweep)")
    p_rep = sub.add_parser("report", help="re-parse an output directory and summarize")
    p_rep.add_argument("--dir", required=True, help="output directory to summarize")

    args = parser.parse_args(argv)
    handlers = {
        "embed": cmd_embed,
        "deepen": cmd_deepen,
        "simulate": cmd_simulate,
        "experiment": cmd_experiment,
        "report": cmd_report,
    }
    try:
        return handlers[args.command](args)
    except Exception as err:  # noqa: BLE001 - single CLI error boundary
        print(json.dumps({"error": f"{type(err).__name__}: {err}"}), file=sys.stderr)
        return 1


def write_default_config(path):
    """Convenience for tests and docs: emit a fully populated config file."""
    with open(path, "w") as handle:
        handle.write(resolve(default_config()))


if __name__ == "__main__":
    sys.exit(main())
