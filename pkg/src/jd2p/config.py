"""INI-style run configuration: parsing, validation, and resolved echo.

A config file fully determines a run; `resolve` fills every default so the
echoed copy in the output directory is the complete record.
"""

from __future__ import annotations

import configparser
import json
from dataclasses import dataclass

import numpy as np

from .datasets import DatasetError, RawDataset, gen_synthetic, load_idx
from .deepening import DeepeningParams, MocKind
from .learners import TrainSpec
from .prefetch_energy import EnergyParams, RoundTiming
from .sim import BenchmarkKind, SimConfig

_MOC_BY_NAME = {kind.value: kind for kind in MocKind}
_BENCH_BY_NAME = {kind.value: kind for kind in BenchmarkKind}

EXPERIMENT_KINDS = (
    "tradeoff-sweep",
    "depth-sweep",
    "energy-vs-tau",
    "rounds-sweep",
    "channel-shape-sweep",
)


@dataclass(frozen=True)
class DatasetSource:
    """Where samples come from: IDX containers or the synthetic generator."""

    kind: str = "synthetic-gaussians"
    train_images: str | None = None
    train_labels: str | None = None
    test_images: str | None = None
    test_labels: str | None = None
    means: tuple = (
        (-0.8, -0.3, -0.1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0),
        (0.8, 0.3, 0.1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0),
    )
    covariance: object = 1.0
    counts: tuple = (300, 300)
    test_fraction: float = 0.2
    subsample_train: int | None = 2000
    subsample_test: int | None = 1000
    class_pair: tuple | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("idx-files", "synthetic-gaussians"):
            raise DatasetError(f"unknown dataset kind {self.kind!r}")
        if self.kind == "idx-files" and not (self.train_images and self.train_labels):
            raise DatasetError("idx-files dataset needs train_images and train_labels paths")


@dataclass(frozen=True)
class ExperimentSpec:
    """One named experiment family and its parameter grid."""

    kind: str = "tradeoff-sweep"
    p_th_values: tuple = (0.95, 0.965, 0.98, 0.995)
    z_th_values: tuple = (0.01, 0.03, 0.05, 0.07, 0.09)
    tau_values: tuple = (0.1, 0.3, 0.5, 0.7)
    shape_values: tuple = (2.0, 4.0, 8.0)
    rounds_values: tuple = (1, 2, 3, 4, 5)
    num_seeds: int = 5
    workers: int = 1

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        for name in ("p_th_values", "z_th_values", "tau_values", "shape_values",
                     "rounds_values"):
            if len(getattr(self, name)) == 0:
                raise ValueError(f"{name} must be non-empty")
        if self.num_seeds < 1 or self.workers < 1:
            raise ValueError("num_seeds and workers must be positive")


@dataclass(frozen=True)
class AppConfig:
    dataset: DatasetSource
    sim: SimConfig
    benchmark: BenchmarkKind
    experiment: ExperimentSpec


def _floats(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _ints(text):
    return tuple(int(v) for v in text.replace(",", " ").split())


def load_config(path) -> AppConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    read = parser.read(path)
    if not read:
        raise FileNotFoundError(f"config file not found: {path}")

    def get(section, option, fallback):
        if parser.has_option(section, option):
            value = parser.get(section, option).strip()
            return value if value else fallback
        return fallback

    ds = DatasetSource(
        kind=get("dataset", "kind", "synthetic-gaussians"),
        train_images=get("dataset", "train_images", None),
        train_labels=get("dataset", "train_labels", None),
        test_images=get("dataset", "test_images", None),
        test_labels=get("dataset", "test_labels", None),
        means=tuple(tuple(row) for row in json.loads(get("dataset", "means",
                    json.dumps([list(r) for r in DatasetSource.means])))),
        covariance=json.loads(get("dataset", "covariance", "1.0")),
        counts=tuple(json.loads(get("dataset", "counts", "[300, 300]"))),
        test_fraction=float(get("dataset", "test_fraction", "0.2")),
        subsample_train=(None if get("dataset", "subsample_train", "2000") == "none"
                         else int(get("dataset", "subsample_train", "2000"))),
        subsample_test=(None if get("dataset", "subsample_test", "1000") == "none"
                        else int(get("dataset", "subsample_test", "1000"))),
        class_pair=(tuple(_ints(get("dataset", "class_pair", "")))
                    if get("dataset", "class_pair", "") else None),
        seed=int(get("dataset", "seed", "0")),
    )

    classifier = get("deepening", "classifier", "svm")
    default_moc = "svm-distance" if classifier == "svm" else "posterior-gap"
    moc_name = get("deepening", "moc", default_moc)
    if moc_name not in _MOC_BY_NAME:
        raise ValueError(f"unknown moc {moc_name!r}; options: {sorted(_MOC_BY_NAME)}")
    deepening = DeepeningParams(
        classifier=classifier,
        moc_kind=_MOC_BY_NAME[moc_name],
        p_th=float(get("deepening", "p_th", "0.98")),
        z_th=float(get("deepening", "z_th", "0.03")),
        strategy=int(get("deepening", "strategy", "2")),
        train=TrainSpec(
            slack_weight=float(get("deepening", "slack_weight", "1.0")),
            epochs=int(get("deepening", "epochs", "10")),
            batch_size=int(get("deepening", "batch_size", "64")),
            learning_rate=float(get("deepening", "learning_rate", "0.01")),
            seed=int(get("deepening", "train_seed", "0")),
        ),
        mlp_hidden=_ints(get("deepening", "mlp_hidden", "256,128,64,32")),
    )

    fixed_gain = get("channel", "fixed_gain", "")
    rounds = int(get("rounds", "count", "10"))
    sim = SimConfig(
        rounds=rounds,
        num_features=int(get("embedding", "features", str(rounds))),
        timing=RoundTiming(
            round_duration=float(get("timing", "round_duration", "1.0")),
            train_duration=float(get("timing", "train_duration", "0.5")),
        ),
        energy=EnergyParams(
            coefficient=float(get("energy", "coefficient", "1e-17")),
            order=float(get("energy", "order", "3")),
            bits_per_feature=float(get("energy", "bits_per_feature", "8")),
        ),
        channel_shape=float(get("channel", "shape", "2.0")),
        fixed_gain=float(fixed_gain) if fixed_gain else None,
        deepening=deepening,
        rho_mode=get("sim", "rho_mode", "pilot"),
        rho_value=float(get("sim", "rho_value", "0.9")),
        pilot_fraction=float(get("sim", "pilot_fraction", "0.25")),
        prefetch_enabled=get("sim", "prefetch", "true").lower() in ("true", "1", "yes"),
        seed=int(get("sim", "seed", "0")),
    )

    bench_name = get("sim", "benchmark", "jd2p")
    if bench_name not in _BENCH_BY_NAME:
        raise ValueError(f"unknown benchmark {bench_name!r}; options: {sorted(_BENCH_BY_NAME)}")

    experiment = ExperimentSpec(
        kind=get("experiment", "kind", "tradeoff-sweep"),
        p_th_values=_floats(get("experiment", "p_th_values", "0.95,0.965,0.98,0.995")),
        z_th_values=_floats(get("experiment", "z_th_values", "0.01,0.03,0.05,0.07,0.09")),
        tau_values=_floats(get("experiment", "tau_values", "0.1,0.3,0.5,0.7")),
        shape_values=_floats(get("experiment", "shape_values", "2,4,8")),
        rounds_values=_ints(get("experiment", "rounds_values", "1,2,3,4,5")),
        num_seeds=int(get("experiment", "num_seeds", "5")),
        workers=int(get("experiment", "workers", "1")),
    )

    return AppConfig(dataset=ds, sim=sim, benchmark=_BENCH_BY_NAME[bench_name],
                     experiment=experiment)


def build_dataset(source: DatasetSource):
    """Materialize (train, test) RawDatasets from the source description."""
    if source.kind == "idx-files":
        full = load_idx(source.train_images, source.train_labels)
        if source.test_images and source.test_labels:
            train, test = full, load_idx(source.test_images, source.test_labels)
        else:
            train, test = full.split(source.test_fraction, seed=source.seed)
    else:
        cov = np.asarray(source.covariance, dtype=float)
        dim = len(source.means[0])
        if cov.ndim == 0:
            cov = float(cov) * np.eye(dim)
        full = gen_synthetic(source.means, cov, source.counts, seed=source.seed)
        train, test = full.split(source.test_fraction, seed=source.seed)

    if source.class_pair is not None:
        train = train.filter_classes(source.class_pair)
        test = test.filter_classes(source.class_pair)
    if source.subsample_train is not None:
        train = train.subsample(source.subsample_train, seed=source.seed + 1)
    if source.subsample_test is not None:
        test = test.subsample(source.subsample_test, seed=source.seed + 2)
    return train, test


def resolve(config: AppConfig) -> str:
    """Render the fully resolved configuration as INI text (the audit echo)."""
    ds, sim, exp = config.dataset, config.sim, config.experiment
    lines = ["[dataset]"]
    lines.append(f"kind = {ds.kind}")
    if ds.kind == "idx-files":
        for name in ("train_images", "train_labels", "test_images", "test_labels"):
            value = getattr(ds, name)
            if value:
                lines.append(f"{name} = {value}")
    else:
        lines.append(f"means = {json.dumps([list(r) for r in ds.means])}")
        lines.append(f"covariance = {json.dumps(ds.covariance)}")
        lines.append(f"counts = {json.dumps(list(ds.counts))}")
    lines.append(f"test_fraction = {ds.test_fraction!r}")
    lines.append(f"subsample_train = {ds.subsample_train if ds.subsample_train is not None else 'none'}")
    lines.append(f"subsample_test = {ds.subsample_test if ds.subsample_test is not None else 'none'}")
    if ds.class_pair is not None:
        lines.append(f"class_pair = {ds.class_pair[0]},{ds.class_pair[1]}")
    lines.append(f"seed = {ds.seed}")

    lines += ["", "[embedding]", f"features = {sim.features}"]
    lines += ["", "[rounds]", f"count = {sim.rounds}"]
    lines += ["", "[timing]",
              f"round_duration = {sim.timing.round_duration!r}",
              f"train_duration = {sim.timing.train_duration!r}"]
    lines += ["", "[channel]", f"shape = {sim.channel_shape!r}"]
    if sim.fixed_gain is not None:
        lines.append(f"fixed_gain = {sim.fixed_gain!r}")
    lines += ["", "[energy]",
              f"coefficient = {sim.energy.coefficient!r}",
              f"order = {sim.energy.order!r}",
              f"bits_per_feature = {sim.energy.bits_per_feature!r}"]
    dp = sim.deepening
    lines += ["", "[deepening]",
              f"classifier = {dp.classifier}",
              f"moc = {dp.moc_kind.value}",
              f"p_th = {dp.p_th!r}",
              f"z_th = {dp.z_th!r}",
              f"strategy = {dp.strategy}",
              f"slack_weight = {dp.train.slack_weight!r}",
              f"epochs = {dp.train.epochs}",
              f"batch_size = {dp.train.batch_size}",
              f"learning_rate = {dp.train.learning_rate!r}",
              f"train_seed = {dp.train.seed}",
              f"mlp_hidden = {','.join(str(h) for h in dp.mlp_hidden)}"]
    lines += ["", "[sim]",
              f"seed = {sim.seed}",
              f"rho_mode = {sim.rho_mode}",
              f"rho_value = {sim.rho_value!r}",
              f"pilot_fraction = {sim.pilot_fraction!r}",
              f"benchmark = {config.benchmark.value}",
              f"prefetch = {'true' if sim.prefetch_enabled else 'false'}"]
    lines += ["", "[experiment]",
              f"kind = {exp.kind}",
              "p_th_values = " + ",".join(repr(v) for v in exp.p_th_values),
              "z_th_values = " + ",".join(repr(v) for v in exp.z_th_values),
              "tau_values = " + ",".join(repr(v) for v in exp.tau_values),
              "shape_values = " + ",".join(repr(v) for v in exp.shape_values),
              "rounds_values = " + ",".join(str(v) for v in exp.rounds_values),
              f"num_seeds = {exp.num_seeds}",
              f"workers = {exp.workers}"]
    return "\n".join(lines) + "\n"


def default_config() -> AppConfig:
    return AppConfig(dataset=DatasetSource(), sim=SimConfig(),
                     benchmark=BenchmarkKind.JD2P, experiment=ExperimentSpec())
