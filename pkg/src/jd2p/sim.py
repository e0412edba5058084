"""Round-based offloading simulation: offload, train-while-prefetch, feedback.

One run embeds the data, optionally estimates per-round survival ratios on a
pilot subset, executes the deepening loop, and accounts every transmission
as an event (round, feature, samples, duration, gain, energy). Benchmarks
share the same ledger shape so runs are directly comparable.
"""

from __future__ import annotations

import dataclasses
import enum
import json
from dataclasses import dataclass

import numpy as np

from .datasets import RawDataset
from .deepening import (
    DeepeningParams,
    DeepeningResult,
    infer_batch,
    run_deepening,
)
from .embedding import EmbeddingModel, embed, fit_pca, reconstruct
from .learners import mlp_posterior, svm_decision, svm_predict, train_mlp, train_svm
from .prefetch_energy import EnergyParams, RoundTiming, optimal_prefetch, tx_energy
from .stats import ChannelModel, inverse_mean_gain, sample_gain


class BenchmarkKind(enum.Enum):
    OSC = "osc"
    RANDOM_DATA = "random-data"
    RANDOM_FEATURE = "random-feature"
    IMPORTANCE_AWARE = "importance-aware"
    DEEPENING_ONLY = "deepening-only"
    JD2P = "jd2p"


@dataclass(frozen=True)
class SimConfig:
    """Everything one run needs beyond the dataset itself."""

    rounds: int = 10
    num_features: int | None = None          # embedded dimension; defaults to rounds
    timing: RoundTiming = RoundTiming()
    energy: EnergyParams = EnergyParams()
    channel_shape: float = 2.0
    fixed_gain: float | None = None
    deepening: DeepeningParams = DeepeningParams()
    rho_mode: str = "pilot"                  # "pilot" | "constant"
    rho_value: float = 0.9
    pilot_fraction: float = 0.25
    prefetch_enabled: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("need at least one round")
        if self.rho_mode not in ("pilot", "constant"):
            raise ValueError(f"unknown rho mode {self.rho_mode!r}")
        if self.rho_mode == "constant" and not 0.0 <= self.rho_value <= 1.0:
            raise ValueError("constant reduction ratio must lie in [0, 1]")
        if not 0.0 < self.pilot_fraction < 1.0:
            raise ValueError("pilot fraction must lie in (0, 1)")

    @property
    def features(self) -> int:
        return self.rounds if self.num_features is None else self.num_features


@dataclass(frozen=True)
class TxEvent:
    """One batch transmission; the audit trail is replayed from these."""

    round_index: int
    kind: str                 # "offload" | "prefetch"
    feature: int
    sample_ids: tuple
    duration: float
    gain: float
    energy: float


@dataclass(frozen=True)
class RoundLedger:
    round_index: int
    gain: float
    acs_size: int
    prefetched: int
    offloaded: int
    wasted: int
    prefetch_energy: float
    offload_energy: float
    wasted_energy: float
    cumulative_energy: float


@dataclass(frozen=True)
class PreparedData:
    """Embedded train/test split plus the embedding that produced it."""

    model: EmbeddingModel
    train_features: np.ndarray
    train_labels: np.ndarray
    test_features: np.ndarray | None
    test_labels: np.ndarray | None
    num_classes: int


@dataclass(frozen=True)
class SimResult:
    kind: BenchmarkKind
    ledgers: tuple
    events: tuple
    deepening: DeepeningResult | None
    accuracy: float | None
    deepening_ratio: float
    rho: tuple
    total_energy: float

    @property
    def transmitted_features(self) -> int:
        return sum(len(e.sample_ids) for e in self.events)


def prepare_data(train: RawDataset, test: RawDataset | None,
                 num_features: int) -> PreparedData:
    """Fit the embedding on the training set once and embed both splits."""
    model = fit_pca(train.data, num_features)
    test_features = embed(model, test.data) if test is not None else None
    test_labels = test.labels if test is not None else None
    return PreparedData(
        model=model,
        train_features=embed(model, train.data),
        train_labels=train.labels,
        test_features=test_features,
        test_labels=test_labels,
        num_classes=max(train.num_classes, 2),
    )


def _seed_streams(seed: int):
    states = np.random.SeedSequence(seed).generate_state(4, dtype=np.uint64)
    return {name: int(states[i]) for i, name in
            enumerate(("pilot", "channel", "prefetch", "benchmark"))}


def deepening_ratio(acs_sizes, rounds: int, num_samples: int) -> float:
    """Candidate mass across rounds over the one-shot volume K*M.

    Rounds after early termination contribute zero.
    """
    if num_samples <= 0 or rounds <= 0:
        raise ValueError("rounds and sample count must be positive")
    return float(sum(acs_sizes[:rounds])) / (rounds * num_samples)


def estimate_rho(pilot_features, pilot_labels, config: SimConfig,
                 model: EmbeddingModel, num_classes: int):
    """Per-round survival ratios measured by a deepening dry run on pilot data."""
    result = run_deepening(pilot_features, pilot_labels, config.rounds,
                           config.deepening, model=model, num_classes=num_classes)
    sizes = [state.members.size for state in result.chain]
    ratios = []
    for k in range(config.rounds):
        if k + 1 < len(sizes) and sizes[k] > 0:
            ratios.append(sizes[k + 1] / sizes[k])
        else:
            ratios.append(0.0)
    return ratios


def _hierarchical_accuracy(result: DeepeningResult, data: PreparedData):
    if data.test_features is None or not result.hierarchy.stages:
        return None
    predictions, _depths = infer_batch(result.hierarchy, data.test_features)
    return float(np.mean(predictions == data.test_labels))


def run_jd2p(config: SimConfig, data: PreparedData,
             deepening_result: DeepeningResult | None = None,
             rho: list | None = None) -> SimResult:
    """Full deepening-and-prefetching run with per-event energy accounting.

    `deepening_result`/`rho` allow channel-only Monte Carlo studies to reuse
    one deepening pass: the candidate chain is channel-independent, so
    re-running it per channel seed would reproduce the identical chain.
    """
    streams = _seed_streams(config.seed)
    features, labels = data.train_features, data.train_labels
    if config.rounds > features.shape[1]:
        raise ValueError("embedded dimension is smaller than the round count")

    if config.rho_mode == "pilot":
        pilot_rng = np.random.default_rng(streams["pilot"])
        n = features.shape[0]
        pilot_count = max(2, int(round(config.pilot_fraction * n)))
        perm = pilot_rng.permutation(n)
        pilot_idx, eval_idx = perm[:pilot_count], perm[pilot_count:]
        if rho is None:
            rho = estimate_rho(features[pilot_idx], labels[pilot_idx], config,
                               data.model, data.num_classes)
    else:
        eval_idx = np.arange(features.shape[0])
        if rho is None:
            rho = [config.rho_value] * config.rounds

    eval_features, eval_labels = features[eval_idx], labels[eval_idx]
    if deepening_result is None:
        holdout = None
        if data.test_features is not None:
            holdout = (data.test_features, data.test_labels)
        deepening_result = run_deepening(
            eval_features, eval_labels, config.rounds, config.deepening,
            model=data.model, holdout=holdout, num_classes=data.num_classes,
        )

    channel = ChannelModel(shape=config.channel_shape, seed=streams["channel"],
                           fixed_gain=config.fixed_gain)
    prefetch_rng = np.random.default_rng(streams["prefetch"])
    timing, energy = config.timing, config.energy
    alpha = energy.bits_per_feature
    nu = inverse_mean_gain(channel)

    chain = deepening_result.chain
    executed = len(deepening_result.logs)
    gains = [sample_gain(channel) for _ in range(executed)]

    events, ledgers = [], []
    cumulative = 0.0
    prefetched_prev: np.ndarray = np.array([], dtype=int)
    for k in range(1, executed + 1):
        members = chain[k - 1].members
        gain = gains[k - 1]

        if k == 1:
            offload_ids = members
        else:
            offload_ids = np.setdiff1d(members, prefetched_prev, assume_unique=True)
        offload_energy = tx_energy(alpha * offload_ids.size, timing.offload_duration,
                                   gain, energy)
        events.append(TxEvent(round_index=k, kind="offload", feature=k,
                              sample_ids=tuple(int(i) for i in offload_ids),
                              duration=timing.offload_duration, gain=gain,
                              energy=offload_energy))

        prefetch_ids = np.array([], dtype=int)
        prefetch_energy = 0.0
        if config.prefetch_enabled and k < config.rounds and members.size > 0:
            decision = optimal_prefetch(members.size, float(rho[k - 1]), gain, nu,
                                        timing, energy)
            if decision.count > 0:
                prefetch_ids = np.sort(prefetch_rng.choice(members, size=decision.count,
                                                           replace=False))
                prefetch_energy = tx_energy(alpha * decision.count,
                                            timing.train_duration, gain, energy)
                events.append(TxEvent(round_index=k, kind="prefetch", feature=k + 1,
                                      sample_ids=tuple(int(i) for i in prefetch_ids),
                                      duration=timing.train_duration, gain=gain,
                                      energy=prefetch_energy))

        survivors = chain[k].members if k < len(chain) else np.array([], dtype=int)
        if k == executed and executed < config.rounds:
            # protocol stopped after this round; prefetched features go unused
            wasted = prefetch_ids
        else:
            wasted = np.setdiff1d(prefetch_ids, survivors, assume_unique=True)
        wasted_energy = (prefetch_energy * wasted.size / prefetch_ids.size
                         if prefetch_ids.size else 0.0)

        cumulative += offload_energy + prefetch_energy
        ledgers.append(RoundLedger(
            round_index=k, gain=gain, acs_size=int(members.size),
            prefetched=int(prefetch_ids.size), offloaded=int(offload_ids.size),
            wasted=int(wasted.size), prefetch_energy=prefetch_energy,
            offload_energy=offload_energy, wasted_energy=wasted_energy,
            cumulative_energy=cumulative,
        ))
        prefetched_prev = prefetch_ids

    ratio = deepening_ratio([lg.acs_size for lg in ledgers], config.rounds,
                            eval_features.shape[0])
    return SimResult(
        kind=BenchmarkKind.JD2P if config.prefetch_enabled else BenchmarkKind.DEEPENING_ONLY,
        ledgers=tuple(ledgers), events=tuple(events), deepening=deepening_result,
        accuracy=_hierarchical_accuracy(deepening_result, data),
        deepening_ratio=ratio, rho=tuple(float(r) for r in rho),
        total_energy=cumulative,
    )


# ---------------------------------------------------------------------------
# Benchmarks
# ---------------------------------------------------------------------------

def _train_depth_classifier(config, data, inputs, labels):
    if config.deepening.classifier == "svm":
        clf = train_svm(inputs, labels, config.deepening.train)
        return clf, lambda X: svm_predict(clf, X)
    clf = train_mlp(inputs, labels, config.deepening.train,
                    hidden=config.deepening.mlp_hidden, num_classes=data.num_classes)
    return clf, lambda X: np.argmax(mlp_posterior(clf, X), axis=-1)


def _depth_k_inputs(config, data, features, mask=None):
    k = config.rounds
    if mask is None:
        masked = features
    else:
        masked = features * mask
    if config.deepening.classifier == "svm":
        return masked[:, :k]
    return data.model.mean + masked @ data.model.components


def _osc_style_energy(config, channel, feature_counts):
    """Rounds 1..K-1 offload over the full round; the last round leaves time
    for the single training pass."""
    timing, energy = config.timing, config.energy
    alpha = energy.bits_per_feature
    events, ledgers = [], []
    cumulative = 0.0
    for k, (count, ids) in enumerate(feature_counts, start=1):
        gain = sample_gain(channel)
        duration = timing.round_duration if k < config.rounds else timing.offload_duration
        e = tx_energy(alpha * count, duration, gain, energy)
        events.append(TxEvent(round_index=k, kind="offload", feature=k,
                              sample_ids=ids, duration=duration, gain=gain, energy=e))
        cumulative += e
        ledgers.append(RoundLedger(
            round_index=k, gain=gain, acs_size=count, prefetched=0, offloaded=count,
            wasted=0, prefetch_energy=0.0, offload_energy=e, wasted_energy=0.0,
            cumulative_energy=cumulative,
        ))
    return events, ledgers, cumulative


def _benchmark_accuracy(config, data, predict):
    if data.test_features is None:
        return None
    test_inputs = _depth_k_inputs(config, data, data.test_features)
    return float(np.mean(predict(test_inputs) == data.test_labels))


def run_benchmark(kind: BenchmarkKind, config: SimConfig, data: PreparedData,
                  budget: int | None = None) -> SimResult:
    """Run a benchmark with the same ledger shape as the main policy.

    RANDOM_DATA / RANDOM_FEATURE / IMPORTANCE_AWARE match their transmitted
    feature count to a reference run exactly (run here when `budget` is not
    supplied). OSC offloads everything; DEEPENING_ONLY is the main policy
    with prefetching forced off.
    """
    if kind is BenchmarkKind.JD2P:
        return run_jd2p(config, data)
    if kind is BenchmarkKind.DEEPENING_ONLY:
        return run_jd2p(dataclasses.replace(config, prefetch_enabled=False), data)

    streams = _seed_streams(config.seed)
    channel = ChannelModel(shape=config.channel_shape, seed=streams["channel"],
                           fixed_gain=config.fixed_gain)
    features, labels = data.train_features, data.train_labels
    m = features.shape[0]
    k_rounds = config.rounds

    if kind is BenchmarkKind.OSC:
        inputs = _depth_k_inputs(config, data, features)
        _clf, predict = _train_depth_classifier(config, data, inputs, labels)
        all_ids = tuple(range(m))
        counts = [(m, all_ids)] * k_rounds
        events, ledgers, total = _osc_style_energy(config, channel, counts)
        return SimResult(kind=kind, ledgers=tuple(ledgers), events=tuple(events),
                         deepening=None, accuracy=_benchmark_accuracy(config, data, predict),
                         deepening_ratio=1.0, rho=(), total_energy=total)

    if budget is None:
        budget = run_jd2p(config, data).transmitted_features
    budget = int(min(budget, m * k_rounds))
    rng = np.random.default_rng(streams["benchmark"])

    if kind in (BenchmarkKind.RANDOM_DATA, BenchmarkKind.IMPORTANCE_AWARE):
        n_full, remainder = divmod(budget, k_rounds)
        if kind is BenchmarkKind.RANDOM_DATA:
            order = rng.permutation(m)
        else:
            # rank by round-1 uncertainty: hyperplane margin or posterior entropy
            depth1 = _stage1_inputs(config, data, features)
            clf1, _pred = _train_depth_classifier(config, data, depth1, labels)
            if config.deepening.classifier == "svm":
                clarity = np.abs(svm_decision(clf1, depth1)) / np.linalg.norm(clf1.weights)
            else:
                post = mlp_posterior(clf1, depth1)
                clarity = np.sum(np.where(post > 0, post * np.log(np.clip(post, 1e-300, None)), 0.0),
                                 axis=-1)
            order = np.argsort(clarity, kind="stable")
        chosen = order[:n_full]
        mask = np.zeros((m, features.shape[1]))
        mask[chosen, :k_rounds] = 1.0
        if remainder:
            mask[order[n_full], :remainder] = 1.0
    elif kind is BenchmarkKind.RANDOM_FEATURE:
        flat = rng.choice(m * k_rounds, size=budget, replace=False)
        mask = np.zeros((m, features.shape[1]))
        mask[flat // k_rounds, flat % k_rounds] = 1.0
    else:
        raise ValueError(f"unknown benchmark kind {kind!r}")

    inputs = _depth_k_inputs(config, data, features, mask=mask)
    participating = mask[:, :k_rounds].any(axis=1)
    _clf, predict = _train_depth_classifier(config, data, inputs[participating],
                                            labels[participating])
    counts = []
    for k in range(1, k_rounds + 1):
        ids = np.nonzero(mask[:, k - 1])[0]
        counts.append((int(ids.size), tuple(int(i) for i in ids)))
    events, ledgers, total = _osc_style_energy(config, channel, counts)
    return SimResult(kind=kind, ledgers=tuple(ledgers), events=tuple(events),
                     deepening=None, accuracy=_benchmark_accuracy(config, data, predict),
                     deepening_ratio=budget / (k_rounds * m), rho=(), total_energy=total)


def _stage1_inputs(config, data, features):
    if config.deepening.classifier == "svm":
        return features[:, :1]
    return reconstruct(data.model, features[:, :1], 1)


# ---------------------------------------------------------------------------
# Audit helpers and per-round Monte Carlo
# ---------------------------------------------------------------------------

def replay_energy(events, params: EnergyParams) -> float:
    """Recompute every event's energy from first principles and sum."""
    return sum(
        tx_energy(params.bits_per_feature * len(e.sample_ids), e.duration, e.gain, params)
        for e in events)


def transmissions_are_unique(events) -> bool:
    """No (sample, feature) pair may be transmitted twice."""
    seen = set()
    for e in events:
        for sid in e.sample_ids:
            key = (sid, e.feature)
            if key in seen:
                return False
            seen.add(key)
    return True


def pairwise_round_energy_ratio(candidates: int, reduction_ratio: float,
                                config: SimConfig, num_seeds: int) -> float:
    """Monte Carlo of one prefetch+offload round over the one-shot per-round
    reference energy at the same volume.

    Draws the current and next gains per trial, applies the closed-form
    policy at the current gain, then realizes the binomial survivor count.
    """
    channel = ChannelModel(shape=config.channel_shape, seed=_seed_streams(config.seed)["channel"])
    nu = inverse_mean_gain(channel)
    rng = np.random.default_rng(_seed_streams(config.seed)["prefetch"])
    timing, energy = config.timing, config.energy
    alpha = energy.bits_per_feature

    total = 0.0
    for _ in range(num_seeds):
        gain_now = sample_gain(channel)
        gain_next = sample_gain(channel)
        decision = optimal_prefetch(candidates, reduction_ratio, gain_now, nu,
                                    timing, energy)
        trial = tx_energy(alpha * decision.count, timing.train_duration, gain_now, energy)
        leftover = rng.binomial(candidates - decision.count, reduction_ratio)
        trial += tx_energy(alpha * leftover, timing.offload_duration, gain_next, energy)
        total += trial
    reference = (energy.coefficient * nu * (alpha * candidates) ** energy.order
                 / timing.round_duration ** (energy.order - 1.0))
    return (total / num_seeds) / reference


# ---------------------------------------------------------------------------
# Ledger emission
# ---------------------------------------------------------------------------

LEDGER_COLUMNS = (
    ("round", "round index, 1-based"),
    ("gain", "channel gain during the round"),
    ("acs_size", "ambiguous candidates entering the round"),
    ("prefetched", "next-feature transmissions issued during training"),
    ("offloaded", "current-feature transmissions in the offload window"),
    ("wasted", "prefetched samples that turned clearly classified"),
    ("prefetch_energy_j", "Joules spent prefetching"),
    ("offload_energy_j", "Joules spent offloading"),
    ("wasted_energy_j", "pro-rata share of prefetch energy spent on waste"),
    ("cumulative_energy_j", "running total, Joules"),
)


def write_ledger_csv(path, ledgers):
    lines = ["# " + "; ".join(f"{name}: {desc}" for name, desc in LEDGER_COLUMNS)]
    lines.append(",".join(name for name, _ in LEDGER_COLUMNS))
    for lg in ledgers:
        lines.append(",".join([
            str(lg.round_index), repr(lg.gain), str(lg.acs_size), str(lg.prefetched),
            str(lg.offloaded), str(lg.wasted), repr(lg.prefetch_energy),
            repr(lg.offload_energy), repr(lg.wasted_energy), repr(lg.cumulative_energy),
        ]))
    with open(path, "w") as handle:
        handle.write("\n".join(lines) + "\n")


def summarize(result: SimResult, config: SimConfig) -> dict:
    """Run summary with the analytic one-shot reference for the dB gain."""
    from .prefetch_energy import expected_energy_osc

    channel = ChannelModel(shape=config.channel_shape, fixed_gain=config.fixed_gain)
    nu = inverse_mean_gain(channel)
    eval_samples = result.ledgers[0].acs_size if result.ledgers else 0
    osc_reference = expected_energy_osc(eval_samples, config.rounds, config.timing,
                                        nu, config.energy) if eval_samples else float("nan")
    gain_db = (10.0 * np.log10(osc_reference / result.total_energy)
               if result.total_energy > 0 and eval_samples else float("nan"))
    return {
        "kind": result.kind.value,
        "total_energy_j": result.total_energy,
        "energy_gain_db_vs_osc": gain_db,
        "accuracy": result.accuracy,
        "deepening_ratio": result.deepening_ratio,
        "rounds_executed": len(result.ledgers),
        "transmitted_features": result.transmitted_features,
    }


def write_summary_json(path, summary: dict):
    with open(path, "w") as handle:
        json.dump(summary, handle, indent=2, sort_keys=True)
        handle.write("\n")
