#!/usr/bin/env python3
"""End-to-end energy comparison on overlapping synthetic classes: the full
policy versus deepening without prefetching versus one-shot offloading,
averaged over channel realizations.

Usage: python scripts/blob_energy_study.py [num_seeds]
"""

import dataclasses
import sys

import numpy as np

from jd2p.datasets import gen_synthetic
from jd2p.deepening import DeepeningParams
from jd2p.learners import TrainSpec
from jd2p.prefetch_energy import EnergyParams, RoundTiming, expected_energy_osc
from jd2p.sim import ChannelModel, SimConfig, inverse_mean_gain, prepare_data, run_jd2p


def blobs(seed, per_class=300, dim=6, separation=0.8):
    means = np.zeros((2, dim))
    means[0, 0], means[1, 0] = -separation, separation
    means[0, 1], means[1, 1] = -0.3, 0.3
    return gen_synthetic(means, np.eye(dim), [per_class, per_class], seed=seed)


def main():
    num_seeds = int(sys.argv[1]) if len(sys.argv) > 1 else 100
    data = prepare_data(blobs(11), blobs(12, per_class=150), num_features=4)
    config = SimConfig(
        rounds=4, timing=RoundTiming(1.0, 0.5), energy=EnergyParams(order=3.0),
        channel_shape=2.0,
        deepening=DeepeningParams(p_th=0.98, strategy=2, train=TrainSpec(seed=5)),
        rho_mode="pilot", pilot_fraction=0.25, seed=42)

    reference = run_jd2p(config, data)
    deep, rho = reference.deepening, list(reference.rho)
    jd, do = [], []
    for s in range(num_seeds):
        cfg = dataclasses.replace(config, seed=900 + s)
        jd.append(run_jd2p(cfg, data, deepening_result=deep, rho=rho).total_energy)
        do.append(run_jd2p(dataclasses.replace(cfg, prefetch_enabled=False), data,
                           deepening_result=deep, rho=rho).total_energy)

    eval_samples = reference.ledgers[0].acs_size
    nu = inverse_mean_gain(ChannelModel(shape=config.channel_shape))
    osc = expected_energy_osc(eval_samples, config.rounds, config.timing, nu,
                              config.energy)
    mean_jd, mean_do = float(np.mean(jd)), float(np.mean(do))
    print(f"seeds: {num_seeds}; candidates chain: "
          f"{[lg.acs_size for lg in reference.ledgers]}")
    print(f"full policy       : {mean_jd:.3e} J  "
          f"({10 * np.log10(osc / mean_jd):+.2f} dB vs one-shot)")
    print(f"deepening only    : {mean_do:.3e} J  "
          f"({10 * np.log10(osc / mean_do):+.2f} dB vs one-shot)")
    print(f"one-shot expected : {osc:.3e} J")
    print(f"held-out accuracy : {reference.accuracy:.3f}; "
          f"deepening ratio {reference.deepening_ratio:.3f}")


if __name__ == "__main__":
    main()
