"""Data deepening: clarity metrics, per-round thresholds, candidate-set
partitioning, the round loop, and hierarchical inference.

Round k trains a depth-k classifier, scores each candidate with a metric of
clarity (MoC), and freezes the confident ones; the rest must offload their
next feature. The SVM threshold is the largest hyperplane distance inside
the intersection of the two classes' Mahalanobis ellipsoids, solved by
projected gradient ascent with Dykstra alternating projections. The MLP
threshold is an empirical sweep over the joint error/clarity distribution.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .embedding import EmbeddingModel, reconstruct
from .learners import (
    LinearSvm,
    Mlp,
    TrainSpec,
    mlp_posterior,
    svm_decision,
    svm_predict,
    train_mlp,
    train_svm,
)
from .stats import ClassGaussian, chi2_quantile, fit_class_gaussian


class MocKind(enum.Enum):
    SVM_DISTANCE = "svm-distance"
    NEG_ENTROPY = "neg-entropy"
    POSTERIOR_GAP = "posterior-gap"


def _entropy_moc(posterior):
    p = np.asarray(posterior, dtype=float)
    terms = np.where(p > 0.0, p * np.log(np.clip(p, 1e-300, None)), 0.0)
    return np.sum(terms, axis=-1)


def _gap_moc(posterior):
    p = np.asarray(posterior, dtype=float)
    top2 = -np.partition(-p, 1, axis=-1)[..., :2]
    return top2[..., 0] - top2[..., 1]


def moc(kind: MocKind, classifier, x):
    """Metric of clarity for one input or a batch; higher means clearer.

    SVM_DISTANCE is the absolute hyperplane distance and pairs only with a
    LinearSvm. NEG_ENTROPY (sum p log p, natural log) and POSTERIOR_GAP
    (top-1 minus top-2 posterior) pair only with an Mlp; for those, x must
    already be the depth-k reconstruction in raw space.
    """
    if kind is MocKind.SVM_DISTANCE:
        if not isinstance(classifier, LinearSvm):
            raise TypeError("distance MoC requires a LinearSvm")
        value = np.abs(svm_decision(classifier, x)) / np.linalg.norm(classifier.weights)
        return float(value) if np.ndim(value) == 0 else value
    if not isinstance(classifier, Mlp):
        raise TypeError(f"{kind.value} MoC requires an Mlp")
    posterior = mlp_posterior(classifier, x)
    value = _entropy_moc(posterior) if kind is MocKind.NEG_ENTROPY else _gap_moc(posterior)
    return float(value) if np.ndim(value) == 0 else value


# ---------------------------------------------------------------------------
# SVM threshold: max hyperplane distance over the ellipsoid intersection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Ellipsoid:
    center: np.ndarray
    eigvals: np.ndarray   # eigenvalues of the covariance
    eigvecs: np.ndarray   # columns are eigenvectors
    radius: float         # Mahalanobis radius

    def mahalanobis(self, x) -> float:
        v = self.eigvecs.T @ (x - self.center)
        return math.sqrt(max(float(np.sum(v * v / self.eigvals)), 0.0))

    def contains(self, x, tol: float) -> bool:
        return self.mahalanobis(x) <= self.radius + tol

    def project(self, z: np.ndarray) -> np.ndarray:
        v = self.eigvecs.T @ (z - self.center)
        if float(np.sum(v * v / self.eigvals)) <= self.radius ** 2 * (1.0 + 1e-14):
            return z
        # boundary projection: bisection on the single KKT multiplier
        lam, r2 = self.eigvals, self.radius ** 2
        weighted = lam * v * v
        lo = 0.0
        hi = math.sqrt(float(np.sum(weighted))) / self.radius
        while float(np.sum(weighted / (lam + hi) ** 2)) > r2:
            hi *= 2.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if float(np.sum(weighted / (lam + mid) ** 2)) > r2:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-11 * max(hi, 1.0):
                break
        theta = 0.5 * (lo + hi)
        u = lam * v / (lam + theta)
        return self.center + self.eigvecs @ u


def _gaussian_ellipsoid(g: ClassGaussian, radius: float) -> _Ellipsoid:
    eigvals, eigvecs = np.linalg.eigh(g.sigma)
    eigvals = np.clip(eigvals, 1e-300, None)
    return _Ellipsoid(center=g.mu, eigvals=eigvals, eigvecs=eigvecs, radius=radius)


def _dykstra(z, ellipsoids, max_cycles=300):
    """Dykstra alternating projections of z onto the intersection.

    Returns (point, feasible_to_tol). With a small cycle cap this doubles as
    the cheap approximate projection inside the ascent loop; the full cap
    delivers the projection itself (and detects empty intersections when no
    feasible point emerges).
    """
    x = np.asarray(z, dtype=float)
    corrections = [np.zeros_like(x) for _ in ellipsoids]
    scale = max(1.0, float(np.linalg.norm(x)))
    for _ in range(max_cycles):
        moved = 0.0
        for i, e in enumerate(ellipsoids):
            shifted = x + corrections[i]
            y = e.project(shifted)
            corrections[i] = shifted - y
            moved = max(moved, float(np.linalg.norm(x - y)))
            x = y
        if moved <= 1e-12 * scale:
            break
        if moved <= 1e-9 * scale and all(e.contains(x, 1e-10) for e in ellipsoids):
            break
    feasible = all(e.contains(x, 1e-8 * max(1.0, e.radius)) for e in ellipsoids)
    return x, feasible


def _max_linear_over_intersection(direction, start, ellipsoids, tol, max_iter=600):
    """Maximize direction.x over the intersection by projected gradient ascent.

    The objective is linear, so ascent with projections is monotone up to
    projection error. Inner projections run only a few Dykstra cycles (the
    iterate then tracks the feasible boundary); the best point is polished
    with a full-accuracy projection before reporting.
    """
    span = max(
        float(np.linalg.norm(e0.center - e1.center))
        for e0 in ellipsoids for e1 in ellipsoids
    )
    radius_scale = max(e.radius * math.sqrt(float(e.eigvals.max())) for e in ellipsoids)
    step = 0.5 * (span + 2.0 * radius_scale)
    x = np.asarray(start, dtype=float)
    best = float(direction @ x)
    best_x = x
    stall = 0
    for _ in range(max_iter):
        x, _ = _dykstra(x + step * direction, ellipsoids, max_cycles=3)
        value = float(direction @ x)
        if value > best + tol * max(1.0, abs(best)):
            stall = 0
        else:
            stall += 1
        if value > best:
            best, best_x = value, x
        if stall >= 10:
            if step > 1e-3 * radius_scale:
                # shrink the step to settle the boundary-tracking iterate
                step *= 0.25
                stall = 0
                x = best_x
            else:
                break
    polished, feasible = _dykstra(best_x, ellipsoids)
    if feasible:
        return polished, float(direction @ polished)
    return best_x, best


def svm_threshold(g0: ClassGaussian, g1: ClassGaussian, svm: LinearSvm,
                  p_th: float, tol: float = 1e-6) -> float:
    """Clarity threshold for the SVM round: the largest hyperplane distance
    attainable inside both classes' truncated Gaussian regions.

    Each class region is the Mahalanobis ball of radius
    sqrt(chi2_quantile(p_th, k)); the same radius serves both classes so the
    threshold is symmetric under label swap. Returns 0 when the regions do
    not intersect.
    """
    k = svm.depth
    if g0.mu.shape[0] != k or g1.mu.shape[0] != k:
        raise ValueError("class Gaussians must match the classifier depth")
    radius = math.sqrt(chi2_quantile(p_th, k))
    ellipsoids = (_gaussian_ellipsoid(g0, radius), _gaussian_ellipsoid(g1, radius))
    # canonical projection order: the result must not depend on which class
    # the caller labeled 0, so a label swap reproduces bitwise-identical math
    key = lambda e: (tuple(e.center), tuple(e.eigvals), tuple(map(tuple, e.eigvecs)))
    ellipsoids = tuple(sorted(ellipsoids, key=key))

    norm_w = float(np.linalg.norm(svm.weights))
    unit_w = svm.weights / norm_w
    offset = svm.offset / norm_w

    if k == 1:
        # intervals intersect exactly; no iterative solve needed
        half0 = radius * math.sqrt(float(ellipsoids[0].eigvals[0]))
        half1 = radius * math.sqrt(float(ellipsoids[1].eigvals[0]))
        lo = max(float(g0.mu[0]) - half0, float(g1.mu[0]) - half1)
        hi = min(float(g0.mu[0]) + half0, float(g1.mu[0]) + half1)
        if lo > hi:
            return 0.0
        return max(abs(unit_w[0] * lo + offset), abs(unit_w[0] * hi + offset))

    midpoint = 0.5 * (g0.mu + g1.mu)
    start, feasible = _dykstra(midpoint, ellipsoids)
    if not feasible:
        return 0.0

    _, value_pos = _max_linear_over_intersection(unit_w, start, ellipsoids, tol)
    _, value_neg = _max_linear_over_intersection(-unit_w, start, ellipsoids, tol)
    return max(value_pos + offset, value_neg - offset, 0.0)


# ---------------------------------------------------------------------------
# MLP threshold: sweep of the joint error / clarity distribution
# ---------------------------------------------------------------------------

def dnn_threshold(moc_values, correct_flags, z_th: float) -> float:
    """Largest observed MoC whose tail error mass still reaches z_th.

    z(beta) = #(wrong prediction AND moc >= beta) / |candidates|, swept over
    observed MoC values in descending order. Returns -inf when no observed
    value qualifies (the candidate set then empties).
    """
    values = np.asarray(moc_values, dtype=float)
    correct = np.asarray(correct_flags, dtype=bool)
    if values.size == 0:
        raise ValueError("empty candidate set")
    if values.shape != correct.shape:
        raise ValueError("moc values and correctness flags must align")
    errors = ~correct
    order = np.argsort(-values, kind="stable")
    sorted_vals = values[order]
    cum_errors = np.cumsum(errors[order])
    unique_desc = np.unique(values)[::-1]
    last_idx = np.searchsorted(-sorted_vals, -unique_desc, side="right") - 1
    z = cum_errors[last_idx] / values.size
    hits = np.nonzero(z >= z_th)[0]
    if hits.size == 0:
        return float("-inf")
    return float(unique_desc[hits[0]])


# ---------------------------------------------------------------------------
# Candidate-set chain
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AcsState:
    """Snapshot of the candidate chain entering round `round_index`.

    members        -- sample indices still ambiguous (S at this round)
    thresholds     -- clarity thresholds applied in rounds 1..round_index-1
    member_mocs    -- previous round's MoC for the surviving members
    frozen         -- sample index -> (prediction, depth at freeze)
    """

    round_index: int
    members: np.ndarray
    thresholds: tuple = ()
    member_mocs: np.ndarray | None = None
    frozen: dict = field(default_factory=dict)


def initial_state(num_samples: int) -> AcsState:
    return AcsState(round_index=1, members=np.arange(num_samples))


def partition(state: AcsState, moc_values, threshold: float,
              predictions=None) -> AcsState:
    """Split candidates on the clarity threshold (inclusive: moc == threshold
    stays ambiguous). Dropped members freeze their current-round prediction."""
    values = np.asarray(moc_values, dtype=float)
    if values.shape[0] != state.members.shape[0]:
        raise ValueError("moc values must cover exactly the current members")
    keep = values <= threshold
    frozen = dict(state.frozen)
    if predictions is not None:
        predictions = np.asarray(predictions)
        for idx, pred in zip(state.members[~keep], predictions[~keep]):
            frozen[int(idx)] = (int(pred), state.round_index)
    else:
        for idx in state.members[~keep]:
            frozen[int(idx)] = (None, state.round_index)
    return AcsState(
        round_index=state.round_index + 1,
        members=state.members[keep],
        thresholds=state.thresholds + (float(threshold),),
        member_mocs=values[keep],
        frozen=frozen,
    )


# ---------------------------------------------------------------------------
# Round loop
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DeepeningParams:
    """Knobs for one deepening run."""

    classifier: str = "svm"                 # "svm" | "mlp"
    moc_kind: MocKind = MocKind.SVM_DISTANCE
    p_th: float = 0.98                      # SVM clarity mass
    z_th: float = 0.03                      # MLP allowable tail error
    strategy: int = 2                       # 1: candidates only, 2: everything received
    train: TrainSpec = TrainSpec()
    mlp_hidden: tuple = (256, 128, 64, 32)

    def __post_init__(self):
        if self.classifier not in ("svm", "mlp"):
            raise ValueError(f"unknown classifier {self.classifier!r}")
        if self.strategy not in (1, 2):
            raise ValueError("strategy must be 1 or 2")
        if self.classifier == "svm" and self.moc_kind is not MocKind.SVM_DISTANCE:
            raise ValueError("SVM deepening uses the distance MoC")
        if self.classifier == "mlp" and self.moc_kind is MocKind.SVM_DISTANCE:
            raise ValueError("MLP deepening uses an entropy or posterior-gap MoC")


@dataclass(frozen=True)
class DepthStage:
    depth: int
    classifier: object
    threshold: float
    moc_kind: MocKind


@dataclass(frozen=True)
class HierarchicalClassifier:
    """Depth classifiers 1..K with their clarity thresholds, walked in order."""

    stages: tuple
    embedding: EmbeddingModel | None = None

    def __post_init__(self):
        depths = [s.depth for s in self.stages]
        if depths != sorted(set(depths)) or (depths and depths[0] != 1):
            raise ValueError("stage depths must strictly increase from 1")


@dataclass(frozen=True)
class RoundLog:
    round_index: int
    acs_size: int
    threshold: float
    train_accuracy: float
    holdout_accuracy: float | None
    epoch_losses: tuple = ()


@dataclass(frozen=True)
class DeepeningResult:
    hierarchy: HierarchicalClassifier
    chain: tuple            # AcsState snapshots, rounds 1..last+1
    logs: tuple             # RoundLog per executed round
    termination: str        # "completed" | "empty-acs" | "untrainable"

    @property
    def acs_sizes(self):
        return [log.acs_size for log in self.logs]


def _masked_features(features, depths):
    mask = np.arange(features.shape[1])[None, :] < depths[:, None]
    return features * mask


def _stage_inputs(features, model, classifier_kind, depth):
    if classifier_kind == "svm":
        return features[:, :depth]
    return reconstruct(model, features[:, :depth], depth)


def run_deepening(features, labels, rounds: int, params: DeepeningParams,
                  model: EmbeddingModel | None = None, holdout=None,
                  num_classes: int | None = None) -> DeepeningResult:
    """Run the full deepening loop for up to `rounds` rounds.

    features is the (M, F) embedded training matrix with F >= rounds; the
    embedding model is required for MLP runs (depth-k inputs are
    reconstructed to raw space). Strategy 1 trains each round on the current
    candidates only; strategy 2 reuses everything received so far, with
    zero-padding (SVM) or partial reconstruction (MLP) for frozen samples.
    Terminates early once the candidate set empties or can no longer train.
    """
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=int)
    m, f = features.shape
    if rounds > f:
        raise ValueError(f"rounds K={rounds} exceeds embedded dimension F={f}")
    if params.classifier == "mlp" and model is None:
        raise ValueError("MLP deepening needs the embedding model for reconstruction")
    if num_classes is None:
        num_classes = int(labels.max()) + 1

    round_seeds = np.random.SeedSequence(params.train.seed).generate_state(rounds)
    depth_received = np.zeros(m, dtype=int)
    state = initial_state(m)
    chain = [state]
    stages, logs = [], []
    termination = "completed"

    for k in range(1, rounds + 1):
        members = state.members
        if members.size == 0:
            termination = "empty-acs"
            break
        depth_received[members] = k
        member_labels = labels[members]

        if params.classifier == "svm":
            counts = np.bincount(member_labels, minlength=2)
            if np.count_nonzero(counts) < 2 or counts[counts > 0].min() < 2:
                termination = "untrainable"
                break

        spec = TrainSpec(
            slack_weight=params.train.slack_weight,
            epochs=params.train.epochs,
            batch_size=params.train.batch_size,
            learning_rate=params.train.learning_rate,
            seed=int(round_seeds[k - 1]),
        )

        if params.strategy == 1:
            train_feats = features[members]
            train_labels = member_labels
            train_depths = np.full(members.size, k)
        else:
            train_feats = features
            train_labels = labels
            train_depths = depth_received.copy()

        if params.classifier == "svm":
            masked = _masked_features(train_feats[:, :k], np.minimum(train_depths, k))
            clf = train_svm(masked, train_labels, spec)
            train_pred = svm_predict(clf, masked)
            member_inputs = features[members, :k]
            member_pred = svm_predict(clf, member_inputs)
            mocs = moc(params.moc_kind, clf, member_inputs)
            g0 = fit_class_gaussian(member_inputs[member_labels == 0], class_id=0)
            g1 = fit_class_gaussian(member_inputs[member_labels == 1], class_id=1)
            threshold = svm_threshold(g0, g1, clf, params.p_th)
            epoch_losses = clf.objective_history
        else:
            masked = _masked_features(train_feats, train_depths)
            recon = model.mean + masked @ model.components
            clf = train_mlp(recon, train_labels, spec, hidden=params.mlp_hidden,
                            num_classes=num_classes)
            train_pred = np.argmax(mlp_posterior(clf, recon), axis=-1)
            member_inputs = reconstruct(model, features[members, :k], k)
            posterior = mlp_posterior(clf, member_inputs)
            member_pred = np.argmax(posterior, axis=-1)
            mocs = (_entropy_moc(posterior) if params.moc_kind is MocKind.NEG_ENTROPY
                    else _gap_moc(posterior))
            threshold = dnn_threshold(mocs, member_pred == member_labels, params.z_th)
            epoch_losses = clf.epoch_losses

        holdout_accuracy = None
        if holdout is not None:
            h_feats, h_labels = holdout
            h_inputs = _stage_inputs(np.asarray(h_feats, dtype=float), model,
                                     params.classifier, k)
            if params.classifier == "svm":
                h_pred = svm_predict(clf, h_inputs)
            else:
                h_pred = np.argmax(mlp_posterior(clf, h_inputs), axis=-1)
            holdout_accuracy = float(np.mean(h_pred == np.asarray(h_labels)))

        stages.append(DepthStage(depth=k, classifier=clf, threshold=float(threshold),
                                 moc_kind=params.moc_kind))
        logs.append(RoundLog(
            round_index=k,
            acs_size=int(members.size),
            threshold=float(threshold),
            train_accuracy=float(np.mean(train_pred == train_labels)),
            holdout_accuracy=holdout_accuracy,
            epoch_losses=tuple(epoch_losses),
        ))
        state = partition(state, mocs, threshold, predictions=member_pred)
        chain.append(state)

    hierarchy = HierarchicalClassifier(stages=tuple(stages),
                                       embedding=model if params.classifier == "mlp" else None)
    return DeepeningResult(hierarchy=hierarchy, chain=tuple(chain), logs=tuple(logs),
                           termination=termination)


# ---------------------------------------------------------------------------
# Hierarchical inference
# ---------------------------------------------------------------------------

def infer_batch(hierarchy: HierarchicalClassifier, features):
    """Cascade a batch through the depth classifiers.

    Each sample stops at the first depth whose MoC exceeds that round's
    threshold; samples still ambiguous after the last stage keep the last
    stage's prediction and depth.
    """
    features = np.asarray(features, dtype=float)
    if not hierarchy.stages:
        raise ValueError("hierarchy has no stages")
    n = features.shape[0]
    predictions = np.zeros(n, dtype=int)
    depths = np.zeros(n, dtype=int)
    active = np.arange(n)
    for si, stage in enumerate(hierarchy.stages):
        if active.size == 0:
            break
        if isinstance(stage.classifier, LinearSvm):
            inputs = features[active, :stage.depth]
            pred = svm_predict(stage.classifier, inputs)
            scores = moc(stage.moc_kind, stage.classifier, inputs)
        else:
            inputs = reconstruct(hierarchy.embedding, features[active, :stage.depth],
                                 stage.depth)
            posterior = mlp_posterior(stage.classifier, inputs)
            pred = np.argmax(posterior, axis=-1)
            scores = (_entropy_moc(posterior)
                      if stage.moc_kind is MocKind.NEG_ENTROPY else _gap_moc(posterior))
        last = si == len(hierarchy.stages) - 1
        settled = (scores > stage.threshold) | last
        chosen = active[settled]
        predictions[chosen] = pred[settled]
        depths[chosen] = stage.depth
        active = active[~settled]
    return predictions, depths


def infer(hierarchy: HierarchicalClassifier, x):
    """Single-sample cascade; returns (predicted class, depth used)."""
    preds, depths = infer_batch(hierarchy, np.asarray(x, dtype=float)[None, :])
    return int(preds[0]), int(depths[0])
