"""Transmit-energy model, the closed-form prefetch policy, its exhaustive
oracle, and the expected-energy comparison against one-shot offloading.

Transmitting b bits in time t at gain h costs lam * b^ell / (h * t^(ell-1)).
Prefetching p of the s candidates' next features during the training window
trades possible waste (candidates that turn out clearly classified) against
the longer transmission time; the optimal continuous p has a closed form
derived from the binomial moment bound (mu + ell/2)^ell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .stats import binomial_moment


@dataclass(frozen=True)
class EnergyParams:
    """Monomial transmit-energy model parameters."""

    coefficient: float = 1e-17   # Joule * s^(order-1) / bit^order
    order: float = 3.0           # monomial order, typically 2..5
    bits_per_feature: float = 8.0

    def __post_init__(self):
        if self.coefficient <= 0 or self.bits_per_feature <= 0:
            raise ValueError("energy coefficient and bits per feature must be positive")
        if self.order < 2:
            raise ValueError("monomial order must be >= 2")


@dataclass(frozen=True)
class RoundTiming:
    """Fixed round structure: offloading happens in what training leaves over."""

    round_duration: float = 1.0   # t0, seconds
    train_duration: float = 0.5   # tau, seconds

    def __post_init__(self):
        if not 0.0 < self.train_duration < self.round_duration:
            raise ValueError("need 0 < train duration < round duration")

    @property
    def offload_duration(self) -> float:
        return self.round_duration - self.train_duration


@dataclass(frozen=True)
class PrefetchDecision:
    """One round's prefetch policy evaluation."""

    candidates: int          # current ambiguous-set size
    reduction_ratio: float   # probability a candidate stays ambiguous
    gain: float              # current channel gain
    inv_mean_gain: float     # E[1/h] of the next round's gain
    weight: float            # (gain * inv_mean_gain)^(1/(order-1)) * tau/t
    continuous: float        # unconstrained stationary point of the bound objective
    count: int               # clamped to [0, candidates] and rounded


def tx_energy(bits: float, duration: float, gain: float, params: EnergyParams) -> float:
    """Energy in Joules to push `bits` through the channel in `duration` seconds."""
    if duration <= 0.0:
        raise ValueError("transmission duration must be positive")
    if gain <= 0.0:
        raise ValueError("channel gain must be positive")
    if bits < 0.0:
        raise ValueError("bit count must be non-negative")
    return params.coefficient * bits ** params.order / (gain * duration ** (params.order - 1.0))


def prefetch_weight(gain: float, inv_mean_gain: float, timing: RoundTiming,
                    order: float) -> float:
    return (gain * inv_mean_gain) ** (1.0 / (order - 1.0)) * (
        timing.train_duration / timing.offload_duration
    )


def optimal_prefetch(candidates: int, reduction_ratio: float, gain: float,
                     inv_mean_gain: float, timing: RoundTiming,
                     params: EnergyParams) -> PrefetchDecision:
    """Closed-form minimizer of the moment-bound objective.

    `continuous` is the raw stationary point (it satisfies the first-order
    condition exactly whenever the reduction ratio is positive); `count` is
    the practical decision: clamped to [0, candidates] and rounded to the
    nearest integer.
    """
    if not 0.0 <= reduction_ratio <= 1.0:
        raise ValueError("reduction ratio must lie in [0, 1]")
    if candidates < 0:
        raise ValueError("candidate count must be non-negative")
    order = params.order
    weight = prefetch_weight(gain, inv_mean_gain, timing, order)
    if reduction_ratio == 0.0:
        continuous = 0.0
    else:
        ratio_lo = reduction_ratio ** (1.0 / (order - 1.0))
        ratio_hi = reduction_ratio ** (order / (order - 1.0))
        continuous = (weight * ratio_lo / (1.0 + weight * ratio_hi)) * (
            candidates * reduction_ratio + order / 2.0
        )
    count = int(round(min(max(continuous, 0.0), float(candidates))))
    return PrefetchDecision(
        candidates=candidates, reduction_ratio=reduction_ratio, gain=gain,
        inv_mean_gain=inv_mean_gain, weight=weight, continuous=continuous, count=count,
    )


def prefetch_objective(p: float, candidates: int, reduction_ratio: float, gain: float,
                       inv_mean_gain: float, timing: RoundTiming,
                       params: EnergyParams) -> float:
    """Moment-bound objective (coefficient * bits_per_feature^order factored out)."""
    if not 0.0 <= p <= candidates:
        raise ValueError("prefetch count must lie in [0, candidates]")
    order = params.order
    tau = timing.train_duration
    t = timing.offload_duration
    expected_left = (candidates - p) * reduction_ratio + order / 2.0
    return (p ** order / (gain * tau ** (order - 1.0))
            + inv_mean_gain / t ** (order - 1.0) * expected_left ** order)


def true_expected_objective(p: int, candidates: int, reduction_ratio: float, gain: float,
                            inv_mean_gain: float, timing: RoundTiming,
                            params: EnergyParams) -> float:
    """Exact expected objective at integer p, via the exact binomial moment."""
    order = params.order
    tau = timing.train_duration
    t = timing.offload_duration
    moment = binomial_moment(candidates - p, reduction_ratio, int(order))
    return (p ** order / (gain * tau ** (order - 1.0))
            + inv_mean_gain / t ** (order - 1.0) * moment)


def prefetch_oracle_exact(candidates: int, reduction_ratio: float, gain: float,
                          inv_mean_gain: float, timing: RoundTiming,
                          params: EnergyParams) -> int:
    """Integer prefetch count minimizing the exact expected objective.

    Exhaustive: every p in 0..candidates is scored with the exact binomial
    moment (ties break toward smaller p). Guard-railed to modest candidate
    counts; beyond that, use the closed form.
    """
    if candidates > 2000:
        raise ValueError("candidate set too large for the exact oracle: use closed form")
    best_p, best_value = 0, math.inf
    for p in range(candidates + 1):
        value = true_expected_objective(p, candidates, reduction_ratio, gain,
                                        inv_mean_gain, timing, params)
        if value < best_value:
            best_p, best_value = p, value
    return best_p


def expected_energy_osc(num_samples: int, rounds: int, timing: RoundTiming,
                        inv_mean_gain: float, params: EnergyParams) -> float:
    """Expected energy of one-shot offloading: every sample's features 1..K.

    The first K-1 rounds offload over the full round duration (training only
    happens once, at the end); the last round offloads in what the single
    training pass leaves over.
    """
    if rounds < 1:
        raise ValueError("need at least one round")
    volume = (params.bits_per_feature * num_samples) ** params.order
    per_round = params.coefficient * inv_mean_gain * volume
    full = per_round / timing.round_duration ** (params.order - 1.0)
    last = per_round / timing.offload_duration ** (params.order - 1.0)
    return (rounds - 1) * full + last


def jd2p_energy_bound(candidates: int, reduction_ratio: float, timing: RoundTiming,
                      inv_mean_gain: float, params: EnergyParams) -> float:
    """Closed-form upper bound on one round's expected deepening+prefetch energy."""
    order = params.order
    expected_next = candidates * reduction_ratio
    prefetch_term = expected_next ** order / timing.train_duration ** (order - 1.0)
    offload_term = ((expected_next * (1.0 - reduction_ratio)) ** order
                    / timing.offload_duration ** (order - 1.0))
    return (params.coefficient * inv_mean_gain * params.bits_per_feature ** order
            * (prefetch_term + offload_term))


def efficiency_condition(train_duration: float, round_duration: float,
                         reduction_ratio: float, order: float):
    """Whether the training-fraction inequality for an energy win holds.

    Returns (holds, margin): margin is the gap between the admissible
    training fraction and the actual tau/t0; positive means the condition
    is satisfied.
    """
    if not 0.0 <= reduction_ratio <= 1.0:
        raise ValueError("reduction ratio must lie in [0, 1]")
    if not 0.0 < train_duration < round_duration:
        raise ValueError("need 0 < train duration < round duration")
    rhs = 1.0 - (reduction_ratio * (1.0 - reduction_ratio)) ** (order / (order - 1.0))
    lhs = train_duration / round_duration
    return lhs < rhs, rhs - lhs
