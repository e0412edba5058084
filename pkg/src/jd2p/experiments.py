"""Experiment grids: threshold tradeoffs, depth and round sweeps, training-window
and channel-shape studies. Each run writes plot-ready CSV (x, y, stderr over
seeds) plus a summary JSON; plotting itself is out of process.
"""

from __future__ import annotations

import dataclasses
import json
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .config import AppConfig, build_dataset, resolve
from .prefetch_energy import RoundTiming, expected_energy_osc
from .stats import ChannelModel, inverse_mean_gain
from .sim import BenchmarkKind, SimConfig, prepare_data, run_benchmark, run_jd2p


def _mean_stderr(values):
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    stderr = float(arr.std(ddof=1) / np.sqrt(arr.size)) if arr.size > 1 else 0.0
    return mean, stderr


def write_csv(path, columns, rows):
    """columns: (name, description) pairs; floats rendered via repr for
    byte-stable, round-trippable output."""
    lines = ["# " + "; ".join(f"{name}: {desc}" for name, desc in columns)]
    lines.append(",".join(name for name, _ in columns))
    for row in rows:
        rendered = []
        for value in row:
            rendered.append(repr(float(value)) if isinstance(value, float) else str(value))
        lines.append(",".join(rendered))
    with open(path, "w") as handle:
        handle.write("\n".join(lines) + "\n")


def read_csv(path):
    """Re-parse a CSV written by _write_csv; returns (columns, rows-of-strings)."""
    with open(path) as handle:
        lines = [line.rstrip("\n") for line in handle if line.strip()]
    if not lines or not lines[0].startswith("#"):
        raise ValueError(f"{path}: missing schema header line")
    header = lines[1].split(",")
    rows = [line.split(",") for line in lines[2:]]
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"{path}: ragged row {row}")
    return header, rows


def _gain_db(reference, value):
    if value <= 0:
        return float("nan")
    return 10.0 * float(np.log10(reference / value))


def _osc_reference(config: SimConfig, num_samples: int) -> float:
    nu = inverse_mean_gain(ChannelModel(shape=config.channel_shape,
                                        fixed_gain=config.fixed_gain))
    return expected_energy_osc(num_samples, config.rounds, config.timing, nu,
                               config.energy)


def _seeded(config: SimConfig, seed_index: int) -> SimConfig:
    return dataclasses.replace(config, seed=config.seed + 1000 * (seed_index + 1))


# --- grid cells (top-level so a process pool can pickle them) ---------------

def _cell_tradeoff(payload):
    app, threshold, num_seeds = payload
    if app.sim.deepening.classifier == "svm":
        deepening = dataclasses.replace(app.sim.deepening, p_th=threshold)
    else:
        deepening = dataclasses.replace(app.sim.deepening, z_th=threshold)
    config = dataclasses.replace(app.sim, deepening=deepening)
    train, test = build_dataset(app.dataset)
    data = prepare_data(train, test, config.features)
    ratios, accs, energies, gains, losses = [], [], [], [], None
    for s in range(num_seeds):
        result = run_jd2p(_seeded(config, s), data)
        ratios.append(result.deepening_ratio)
        accs.append(result.accuracy)
        energies.append(result.total_energy)
        eval_samples = result.ledgers[0].acs_size
        gains.append(_gain_db(_osc_reference(config, eval_samples), result.total_energy))
        if s == 0 and config.deepening.classifier == "mlp":
            losses = [(log.round_index, e + 1, loss)
                      for log in result.deepening.logs
                      for e, loss in enumerate(log.epoch_losses)]
    return threshold, ratios, accs, energies, gains, losses


def _cell_depth(payload):
    app, rounds, num_seeds = payload
    config = dataclasses.replace(app.sim, rounds=rounds, num_features=None)
    train, test = build_dataset(app.dataset)
    data = prepare_data(train, test, config.features)
    per_method = {}
    for s in range(num_seeds):
        cfg = _seeded(config, s)
        reference = run_jd2p(cfg, data)
        budget = reference.transmitted_features
        runs = {
            "jd2p": reference,
            "osc": run_benchmark(BenchmarkKind.OSC, cfg, data),
            "random-data": run_benchmark(BenchmarkKind.RANDOM_DATA, cfg, data, budget=budget),
            "random-feature": run_benchmark(BenchmarkKind.RANDOM_FEATURE, cfg, data, budget=budget),
            "importance-aware": run_benchmark(BenchmarkKind.IMPORTANCE_AWARE, cfg, data, budget=budget),
        }
        for name, result in runs.items():
            per_method.setdefault(name, ([], []))
            per_method[name][0].append(result.accuracy)
            per_method[name][1].append(result.total_energy)
    return rounds, per_method


def _cell_tau(payload):
    app, tau, num_seeds = payload
    timing = RoundTiming(round_duration=app.sim.timing.round_duration, train_duration=tau)
    config = dataclasses.replace(app.sim, timing=timing)
    train, test = build_dataset(app.dataset)
    data = prepare_data(train, test, config.features)
    per_method = {}
    for s in range(num_seeds):
        cfg = _seeded(config, s)
        runs = {
            "jd2p": run_jd2p(cfg, data),
            "deepening-only": run_benchmark(BenchmarkKind.DEEPENING_ONLY, cfg, data),
        }
        for name, result in runs.items():
            eval_samples = result.ledgers[0].acs_size
            gain = _gain_db(_osc_reference(cfg, eval_samples), result.total_energy)
            per_method.setdefault(name, ([], []))
            per_method[name][0].append(gain)
            per_method[name][1].append(result.total_energy)
    return tau, per_method


def _cell_rounds(payload):
    app, rounds, num_seeds = payload
    config = dataclasses.replace(app.sim, rounds=rounds, num_features=None)
    train, test = build_dataset(app.dataset)
    data = prepare_data(train, test, config.features)
    per_method = {}
    for s in range(num_seeds):
        cfg = _seeded(config, s)
        runs = {
            "jd2p": run_jd2p(cfg, data),
            "osc": run_benchmark(BenchmarkKind.OSC, cfg, data),
        }
        for name, result in runs.items():
            per_method.setdefault(name, ([], []))
            per_method[name][0].append(result.total_energy)
            per_method[name][1].append(result.accuracy)
    return rounds, per_method


def _cell_shape(payload):
    app, shape, num_seeds = payload
    config = dataclasses.replace(app.sim, channel_shape=shape)
    train, test = build_dataset(app.dataset)
    data = prepare_data(train, test, config.features)
    energies = []
    for s in range(num_seeds):
        energies.append(run_jd2p(_seeded(config, s), data).total_energy)
    nu = inverse_mean_gain(ChannelModel(shape=shape))
    return shape, nu, energies


_CELL_RUNNERS = {
    "tradeoff-sweep": _cell_tradeoff,
    "depth-sweep": _cell_depth,
    "energy-vs-tau": _cell_tau,
    "rounds-sweep": _cell_rounds,
    "channel-shape-sweep": _cell_shape,
}


def _grid(app: AppConfig):
    exp = app.experiment
    if exp.kind == "tradeoff-sweep":
        values = (exp.p_th_values if app.sim.deepening.classifier == "svm"
                  else exp.z_th_values)
    elif exp.kind == "depth-sweep":
        values = exp.rounds_values
    elif exp.kind == "energy-vs-tau":
        values = exp.tau_values
    elif exp.kind == "rounds-sweep":
        values = exp.rounds_values
    else:
        values = exp.shape_values
    return [(app, value, exp.num_seeds) for value in values]


def run_experiment(app: AppConfig, out_dir):
    """Execute the configured grid and write CSV + summary into out_dir.

    Cells dispatch to a process pool when workers > 1; results are ordered by
    grid position before writing, so the output bytes do not depend on worker
    scheduling.
    """
    exp = app.experiment
    os.makedirs(out_dir, exist_ok=True)
    payloads = _grid(app)
    runner = _CELL_RUNNERS[exp.kind]
    if exp.workers > 1:
        with ProcessPoolExecutor(max_workers=exp.workers) as pool:
            results = list(pool.map(runner, payloads))
    else:
        results = [runner(p) for p in payloads]

    with open(os.path.join(out_dir, "resolved_config.ini"), "w") as handle:
        handle.write(resolve(app))

    files = {}
    if exp.kind == "tradeoff-sweep":
        columns = [
            ("threshold", "clarity parameter swept (p_th for SVM, z_th for MLP)"),
            ("deepening_ratio", "mean candidate mass over one-shot volume"),
            ("deepening_ratio_stderr", "standard error over seeds"),
            ("accuracy", "mean held-out accuracy of hierarchical inference"),
            ("accuracy_stderr", "standard error over seeds"),
            ("energy_j", "mean total transmit energy, Joules"),
            ("energy_j_stderr", "standard error over seeds"),
            ("gain_db_vs_osc", "mean 10*log10(E_osc/E), dB"),
        ]
        rows, loss_rows = [], []
        for threshold, ratios, accs, energies, gains, losses in results:
            row = [float(threshold)]
            for series in (ratios, accs, energies):
                row.extend(_mean_stderr(series))
            row.append(_mean_stderr(gains)[0])
            rows.append(row)
            if losses:
                loss_rows.extend([float(threshold), r, e, loss] for r, e, loss in losses)
        files["tradeoff.csv"] = (columns, rows)
        if loss_rows:
            files["loss_vs_epoch.csv"] = ([
                ("threshold", "clarity parameter of the run"),
                ("round", "deepening round, 1-based"),
                ("epoch", "epoch within the round, 1-based"),
                ("loss", "training cross-entropy after the epoch"),
            ], loss_rows)
    elif exp.kind in ("depth-sweep", "energy-vs-tau", "rounds-sweep"):
        x_name = {"depth-sweep": "rounds", "energy-vs-tau": "tau",
                  "rounds-sweep": "rounds"}[exp.kind]
        y_names = {
            "depth-sweep": ("accuracy", "energy_j"),
            "energy-vs-tau": ("gain_db_vs_osc", "energy_j"),
            "rounds-sweep": ("energy_j", "accuracy"),
        }[exp.kind]
        columns = [
            (x_name, "swept parameter"),
            ("method", "policy or benchmark"),
            (y_names[0], "mean primary metric"),
            (y_names[0] + "_stderr", "standard error over seeds"),
            (y_names[1], "mean secondary metric"),
            (y_names[1] + "_stderr", "standard error over seeds"),
        ]
        rows = []
        for x_value, per_method in results:
            for method in sorted(per_method):
                primary, secondary = per_method[method]
                row = [x_value if isinstance(x_value, int) else float(x_value), method]
                row.extend(_mean_stderr(primary))
                row.extend(_mean_stderr(secondary))
                rows.append(row)
        files[f"{exp.kind}.csv"] = (columns, rows)
    else:
        columns = [
            ("shape", "gamma channel shape (mean gain fixed at 1)"),
            ("inverse_mean_gain", "analytic E[1/h]"),
            ("energy_j", "mean total transmit energy, Joules"),
            ("energy_j_stderr", "standard error over seeds"),
        ]
        rows = []
        for shape, nu, energies in results:
            mean, stderr = _mean_stderr(energies)
            rows.append([float(shape), float(nu), mean, stderr])
        files["channel-shape.csv"] = (columns, rows)

    for name, (columns, rows) in files.items():
        write_csv(os.path.join(out_dir, name), columns, rows)

    summary = {
        "experiment": exp.kind,
        "num_seeds": exp.num_seeds,
        "grid_size": len(payloads),
        "files": sorted(files),
    }
    with open(os.path.join(out_dir, "summary.json"), "w") as handle:
        json.dump(summary, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return summary
