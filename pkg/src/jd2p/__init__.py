"""Energy-aware feature-by-feature offloading: data deepening, clarity
thresholds, and closed-form prefetching, plus the simulator that ties them
together."""

from .datasets import DatasetError, RawDataset, gen_synthetic, load_idx, write_idx
from .deepening import (
    AcsState,
    DeepeningParams,
    DeepeningResult,
    HierarchicalClassifier,
    MocKind,
    dnn_threshold,
    infer,
    infer_batch,
    moc,
    partition,
    run_deepening,
    svm_threshold,
)
from .embedding import EmbeddedSample, EmbeddingModel, embed, fit_pca, reconstruct
from .learners import (
    LinearSvm,
    Mlp,
    TrainSpec,
    load_model,
    mlp_posterior,
    save_model,
    svm_predict,
    train_mlp,
    train_svm,
)
from .prefetch_energy import (
    EnergyParams,
    PrefetchDecision,
    RoundTiming,
    efficiency_condition,
    expected_energy_osc,
    jd2p_energy_bound,
    optimal_prefetch,
    prefetch_objective,
    prefetch_oracle_exact,
    tx_energy,
)
from .sim import (
    BenchmarkKind,
    PreparedData,
    RoundLedger,
    SimConfig,
    SimResult,
    deepening_ratio,
    estimate_rho,
    pairwise_round_energy_ratio,
    prepare_data,
    run_benchmark,
    run_jd2p,
)
from .stats import (
    ChannelModel,
    ClassGaussian,
    binomial_moment,
    chi2_cdf,
    chi2_quantile,
    fit_class_gaussian,
    inverse_mean_gain,
    mahalanobis,
    moment_bound,
    sample_gain,
)

__version__ = "0.1.0"
