"""Acceptance suite: one test per release criterion, each printing a
pass/fail line (run with `pytest tests/test_acceptance.py -v -s`).

Full-size image corpora are not bundled, so the data-driven criteria run on
the real handwritten-digits set that ships with scikit-learn, loaded through
the same IDX path a full-size corpus would use. Thresholds below are pinned,
not tuned at runtime.
"""

import dataclasses
import math

import numpy as np
import pytest

from jd2p.deepening import DeepeningParams, MocKind, svm_threshold
from jd2p.learners import LinearSvm, TrainSpec
from jd2p.prefetch_energy import (
    EnergyParams,
    RoundTiming,
    efficiency_condition,
    optimal_prefetch,
    prefetch_oracle_exact,
    true_expected_objective,
)
from jd2p.sim import (
    BenchmarkKind,
    SimConfig,
    pairwise_round_energy_ratio,
    replay_energy,
    run_benchmark,
    run_jd2p,
    write_ledger_csv,
)
from jd2p.stats import (
    ChannelModel,
    ClassGaussian,
    binomial_moment,
    chi2_cdf,
    chi2_quantile,
    inverse_mean_gain,
    moment_bound,
)

TIMING = RoundTiming(round_duration=1.0, train_duration=0.5)
UNIT = EnergyParams(coefficient=1.0, order=3.0, bits_per_feature=1.0)

BLOB_CONFIG = SimConfig(
    rounds=4, timing=TIMING, energy=EnergyParams(order=3.0), channel_shape=2.0,
    deepening=DeepeningParams(p_th=0.98, strategy=2, train=TrainSpec(seed=5)),
    rho_mode="pilot", pilot_fraction=0.25, seed=42,
)


def report(index, name, passed, detail):
    print(f"[criterion {index:02d}] {name}: {'PASS' if passed else 'FAIL'} ({detail})")
    assert passed, f"criterion {index} {name}: {detail}"


def test_c01_prefetch_policy_near_optimal():
    worst = 0.0
    for rho in np.arange(0.1, 0.95, 0.1):
        rho = float(rho)
        for gain in (0.5, 1.0, 2.0):
            decision = optimal_prefetch(1000, rho, gain, 2.0, TIMING, UNIT)
            at_policy = true_expected_objective(decision.count, 1000, rho, gain, 2.0,
                                                TIMING, UNIT)
            best_p = prefetch_oracle_exact(1000, rho, gain, 2.0, TIMING, UNIT)
            at_best = true_expected_objective(best_p, 1000, rho, gain, 2.0, TIMING, UNIT)
            worst = max(worst, at_policy / at_best - 1.0)
    report(1, "closed-form prefetch within 5% of exhaustive oracle",
           worst <= 0.05, f"worst relative gap {worst:.2e}")


def test_c02_first_order_stationarity():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(1000):
        order = float(rng.choice([2, 3, 4, 5]))
        t0 = rng.uniform(0.5, 2.0)
        timing = RoundTiming(t0, rng.uniform(0.1, 0.9) * t0)
        params = EnergyParams(coefficient=1.0, order=order, bits_per_feature=1.0)
        s = int(rng.integers(1, 5000))
        rho = rng.uniform(0.01, 1.0)
        gain = rng.uniform(0.05, 5.0)
        nu = rng.uniform(1.0, 5.0)
        p = optimal_prefetch(s, rho, gain, nu, timing, params).continuous
        lhs = order * p ** (order - 1) / (gain * timing.train_duration ** (order - 1))
        rhs = (order * nu * rho / timing.offload_duration ** (order - 1)
               * ((s - p) * rho + order / 2) ** (order - 1))
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs)))
    report(2, "continuous optimum satisfies the first-order condition",
           worst <= 1e-6, f"worst relative residual {worst:.2e} over 1000 draws")


def test_c03_binomial_moment_bound():
    hand = binomial_moment(4, 0.5, 3)
    violations = 0
    for n in range(0, 51):
        for q in np.arange(0.1, 0.95, 0.1):
            for order in (2, 3, 4, 5):
                exact = binomial_moment(n, float(q), order)
                if exact > moment_bound(n * float(q), order) + 1e-9:
                    violations += 1
    report(3, "exact binomial moments stay under the closed-form bound",
           violations == 0 and hand == 14.0,
           f"violations={violations}, E[X^3]@(4,0.5)={hand}")


def _rejection_max(g0, g1, svm, p_th, n, seed=0):
    k = len(g0.mu)
    radius = math.sqrt(chi2_quantile(p_th, k))
    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((n, k))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    ball = directions * (rng.random(n) ** (1.0 / k))[:, None]
    evals, evecs = np.linalg.eigh(g0.sigma)
    points = g0.mu + (ball * (radius * np.sqrt(evals))) @ evecs.T
    dev = points - g1.mu
    inside = np.einsum("ij,jk,ik->i", dev, g1.sigma_inverse, dev) <= radius ** 2
    points = points[inside]
    if points.shape[0] == 0:
        return 0.0
    return float(np.max(np.abs(points @ svm.weights + svm.offset))
                 / np.linalg.norm(svm.weights))


def test_c04_threshold_machinery():
    worst_round_trip = 0.0
    for k in range(1, 21):
        for p in (0.9, 0.95, 0.99):
            r = chi2_quantile(p, k)
            worst_round_trip = max(worst_round_trip, abs(chi2_cdf(r, k) - p))

    def gauss(mu, sigma, cid):
        mu = np.asarray(mu, float)
        sigma = np.asarray(sigma, float)
        return ClassGaussian(class_id=cid, mu=mu, sigma=sigma,
                             sigma_inverse=np.linalg.inv(sigma))

    geometries = [
        (gauss([0.0, 0.0], np.eye(2), 0), gauss([0.0, 0.0], np.eye(2), 1),
         LinearSvm(weights=np.array([2.0, 1.0]), offset=0.0, depth=2)),
        (gauss([-1.0, 0.0], np.eye(2), 0), gauss([1.0, 0.0], np.eye(2), 1),
         LinearSvm(weights=np.array([1.0, 0.0]), offset=0.0, depth=2)),
        (gauss([-1.0, 0.5], [[2.0, 0.3], [0.3, 0.5]], 0),
         gauss([1.0, -0.2], [[1.0, -0.2], [-0.2, 1.5]], 1),
         LinearSvm(weights=np.array([1.5, -0.7]), offset=0.3, depth=2)),
    ]
    worst_gap = 0.0
    for g0, g1, svm in geometries:
        solved = svm_threshold(g0, g1, svm, 0.95)
        sampled = _rejection_max(g0, g1, svm, 0.95, n=1_000_000)
        worst_gap = max(worst_gap, abs(solved - sampled))
    report(4, "chi-square round-trip 1e-9 and threshold solver vs sampling 1e-2",
           worst_round_trip <= 1e-9 and worst_gap <= 1e-2,
           f"round-trip {worst_round_trip:.1e}, solver gap {worst_gap:.1e}")


def test_c05_per_round_energy_win_and_condition_value():
    config = SimConfig(rounds=2, timing=TIMING, energy=EnergyParams(order=3.0),
                       channel_shape=2.0, seed=7)
    ratio = pairwise_round_energy_ratio(1000, 0.9, config, num_seeds=200)
    _, margin = efficiency_condition(0.5, 1.0, 0.5, 2.0)
    rhs = 0.5 + margin
    report(5, "per-round energy beats one-shot and the order-2 admissible fraction",
           ratio < 1.0 and abs(rhs - 0.9375) < 1e-12,
           f"mean round ratio {ratio:.3f}, admissible fraction {rhs}")


def test_c06_digit_pair_tradeoff(digits_pair_data):
    data = digits_pair_data
    osc = run_benchmark(BenchmarkKind.OSC,
                        SimConfig(rounds=10, deepening=DeepeningParams(train=TrainSpec(seed=3))),
                        data)
    results = {}
    monotone = True
    for p_th in (0.95, 0.965, 0.98, 0.995):
        config = SimConfig(rounds=10,
                           deepening=DeepeningParams(p_th=p_th, train=TrainSpec(seed=3)),
                           seed=1)
        result = run_jd2p(config, data)
        sizes = [lg.acs_size for lg in result.ledgers]
        monotone &= all(b <= a for a, b in zip(sizes, sizes[1:]))
        results[p_th] = result
    ratios_below_one = all(r.deepening_ratio < 1.0 for r in results.values())
    accuracy_gap = osc.accuracy - results[0.995].accuracy
    report(6, "digit-pair sweep: ratio < 1, accuracy within 2pp of one-shot",
           ratios_below_one and monotone and accuracy_gap <= 0.02,
           f"ratios {[round(r.deepening_ratio, 3) for r in results.values()]}, "
           f"acc {results[0.995].accuracy:.3f} vs OSC {osc.accuracy:.3f}")


def test_c07_multiclass_hierarchical_accuracy(digits_full_data):
    data = digits_full_data
    config = SimConfig(
        rounds=10,
        deepening=DeepeningParams(classifier="mlp", moc_kind=MocKind.POSTERIOR_GAP,
                                  z_th=0.03, strategy=2,
                                  train=TrainSpec(epochs=10, batch_size=64,
                                                  learning_rate=0.1, seed=3)),
        seed=1)
    result = run_jd2p(config, data)
    benchmark = run_benchmark(BenchmarkKind.RANDOM_FEATURE, config, data,
                              budget=result.transmitted_features)
    report(7, "multi-class hierarchical accuracy >= 85% and beats random features",
           result.accuracy >= 0.85 and result.accuracy >= benchmark.accuracy,
           f"hierarchical {result.accuracy:.3f}, random-feature {benchmark.accuracy:.3f}, "
           f"budget {result.transmitted_features}")


def test_c08_prefetch_beats_deepening_only(blob_data):
    reference = run_jd2p(BLOB_CONFIG, blob_data)
    deep, rho = reference.deepening, list(reference.rho)
    jd_energies, do_energies = [], []
    for s in range(100):
        config = dataclasses.replace(BLOB_CONFIG, seed=900 + s)
        jd_energies.append(run_jd2p(config, blob_data, deepening_result=deep,
                                    rho=rho).total_energy)
        do_energies.append(run_jd2p(dataclasses.replace(config, prefetch_enabled=False),
                                    blob_data, deepening_result=deep,
                                    rho=rho).total_energy)
    forced = run_jd2p(dataclasses.replace(BLOB_CONFIG, prefetch_enabled=False), blob_data)
    bench = run_benchmark(BenchmarkKind.DEEPENING_ONLY, BLOB_CONFIG, blob_data)
    mean_jd, mean_do = float(np.mean(jd_energies)), float(np.mean(do_energies))
    report(8, "prefetching beats deepening-only on average; disabling matches it bit-exactly",
           mean_jd < mean_do and forced.ledgers == bench.ledgers,
           f"mean {mean_jd:.3e} vs {mean_do:.3e} over 100 seeds")


def test_c09_channel_shape_trend(blob_data):
    reference = run_jd2p(BLOB_CONFIG, blob_data)
    deep, rho = reference.deepening, list(reference.rho)
    means = []
    nu_ok = True
    for shape in (2.0, 4.0, 8.0):
        nu_ok &= inverse_mean_gain(ChannelModel(shape=shape)) == pytest.approx(
            shape / (shape - 1.0), rel=1e-12)
        energies = [
            run_jd2p(dataclasses.replace(BLOB_CONFIG, channel_shape=shape, seed=2000 + s),
                     blob_data, deepening_result=deep, rho=rho).total_energy
            for s in range(100)
        ]
        means.append(float(np.mean(energies)))
    trend = means[0] >= means[1] >= means[2]
    report(9, "mean energy non-increasing as the channel steadies",
           trend and nu_ok, f"means by shape {['%.3e' % m for m in means]}")


def test_c10_determinism_and_accounting(blob_data, tmp_path):
    first = run_jd2p(BLOB_CONFIG, blob_data)
    second = run_jd2p(BLOB_CONFIG, blob_data)
    write_ledger_csv(tmp_path / "a.csv", first.ledgers)
    write_ledger_csv(tmp_path / "b.csv", second.ledgers)
    identical = (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    replayed = replay_energy(first.events, BLOB_CONFIG.energy)
    closure = abs(replayed - first.total_energy) <= 1e-12 * first.total_energy
    report(10, "byte-identical reruns and event-replay energy closure",
           identical and closure,
           f"ledger bytes equal: {identical}, replay gap "
           f"{abs(replayed - first.total_energy):.2e} J")
