"""Numerical checks of the delay-cost theory.

Two questions are answered by Monte Carlo rather than symbolically: how the
expected maximum of n normally distributed delays grows with n, mean, and
spread, and how much extra delay a centralized relay adds over direct
agent-to-agent exchange. A third helper evaluates the additive loss lower
bound from per-message gains, miss probabilities, and a delay cost, and a
fourth measures the reward gap between two trained checkpoints.

Negative draws are truncated at 0 by default (delays cannot be negative);
pass truncate=False for untruncated statistics, e.g. when comparing against
closed-form normal order statistics. With mean < 3*std the truncation bias
is material and is reported by `truncation_fraction`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "DelayModel",
    "MonteCarloEstimate",
    "ModeComparison",
    "GapEstimate",
    "sample_delays",
    "max_statistic",
    "expected_max_delay",
    "empirical_xi",
    "compare_modes",
    "prop1_bound",
    "empirical_gap",
    "bootstrap_mean_ci",
]


@dataclass(frozen=True)
class DelayModel:
    """Normal delay model: n agents, per-link delay ~ N(mean, std^2)."""

    mean: float
    std: float
    agents: int

    def __post_init__(self):
        if self.std < 0:
            raise ValueError("std must be >= 0")
        if self.agents < 1:
            raise ValueError("agents must be >= 1")


@dataclass(frozen=True)
class MonteCarloEstimate:
    value: float
    stderr: float
    trials: int

    def __str__(self):
        return f"{self.value:.6f} +/- {self.stderr:.2e} ({self.trials} trials)"


@dataclass(frozen=True)
class ModeComparison:
    decentralized: MonteCarloEstimate
    centralized: MonteCarloEstimate

    @property
    def gap(self) -> float:
        return self.centralized.value - self.decentralized.value

    @property
    def gap_stderr(self) -> float:
        return math.hypot(self.centralized.stderr, self.decentralized.stderr)


def sample_delays(model: DelayModel, trials: int, rng: np.random.Generator,
                  truncate: bool = True) -> np.ndarray:
    """(trials, n) matrix of per-link delay draws."""
    draws = rng.normal(model.mean, model.std, size=(trials, model.agents))
    if truncate:
        np.maximum(draws, 0.0, out=draws)
    return draws


def truncation_fraction(model: DelayModel, draws: np.ndarray) -> float:
    """Fraction of draws clipped at zero; nonzero means biased statistics."""
    return float((draws <= 0.0).mean()) if model.std > 0 else 0.0


def max_statistic(draws: np.ndarray) -> MonteCarloEstimate:
    """Mean and standard error of the per-trial row maximum."""
    maxima = draws.max(axis=1)
    trials = maxima.shape[0]
    se = float(maxima.std(ddof=1) / math.sqrt(trials)) if trials > 1 else float("inf")
    return MonteCarloEstimate(value=float(maxima.mean()), stderr=se, trials=trials)


def expected_max_delay(model: DelayModel, trials: int,
                       rng: np.random.Generator | None = None,
                       truncate: bool = True,
                       draws: np.ndarray | None = None) -> MonteCarloEstimate:
    """Monte Carlo estimate of E[max of n delay draws].

    Pass `draws` to reuse a common sample across calls (e.g. for exact
    per-trial monotonicity in n: slice columns of one wide draw).
    """
    if draws is None:
        if trials < 10_000:
            raise ValueError("trials must be >= 10000")
        if rng is None:
            raise ValueError("rng required when draws are not supplied")
        draws = sample_delays(model, trials, rng, truncate=truncate)
    return max_statistic(draws)


def empirical_xi(estimate: MonteCarloEstimate, model: DelayModel) -> float:
    """Empirical order-statistic coefficient (E[max] - mean) / std."""
    if model.std == 0:
        return 0.0
    return (estimate.value - model.mean) / model.std


def compare_modes(model: DelayModel, trials: int, rng: np.random.Generator,
                  truncate: bool = True) -> ModeComparison:
    """Expected worst-case delay: direct exchange vs a central relay.

    Decentralized: each of n peers sends directly; the receiver waits for
    the slowest, so the cost is E[max_j l_j]. Centralized: every message
    first travels to the relay (independent legs), then one shared leg
    carries the aggregate back, so the cost is E[max_j l_j + l_relay].
    For mean > 0 the centralized estimate must exceed the decentralized one
    and a violation raises (it would indicate a statistical anomaly).
    """
    dec = max_statistic(sample_delays(model, trials, rng, truncate=truncate))
    first_legs = sample_delays(model, trials, rng, truncate=truncate)
    back_leg = sample_delays(DelayModel(model.mean, model.std, 1), trials, rng,
                             truncate=truncate)[:, 0]
    cen_samples = first_legs.max(axis=1) + back_leg
    se = float(cen_samples.std(ddof=1) / math.sqrt(trials))
    cen = MonteCarloEstimate(value=float(cen_samples.mean()), stderr=se, trials=trials)
    if model.mean > 0 and cen.value <= dec.value:
        raise RuntimeError(
            "centralized estimate did not exceed decentralized despite positive mean")
    return ModeComparison(decentralized=dec, centralized=cen)


def prop1_bound(gain_per_message: Sequence[float], miss_prob: Sequence[float],
                delay_cost: float) -> float:
    """Loss lower bound: sum of per-pair gain x miss probability, plus delay cost.

    Monotone nondecreasing in every argument and linear in the delay cost
    and in each gain.
    """
    gains = np.asarray(gain_per_message, dtype=np.float64)
    probs = np.asarray(miss_prob, dtype=np.float64)
    if gains.shape != probs.shape:
        raise ValueError("gain and probability lists must have equal length")
    if np.any((probs < 0) | (probs > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    if np.any(gains < 0) or delay_cost < 0:
        raise ValueError("gains and delay cost must be >= 0")
    return float((gains * probs).sum() + delay_cost)


# ---------------------------------------------------------------------------
# empirical reward gap between two trained policies


@dataclass(frozen=True)
class GapEstimate:
    gap: float
    ci_low: float
    ci_high: float
    episodes: int

    def contains_zero(self) -> bool:
        return self.ci_low <= 0.0 <= self.ci_high


def bootstrap_mean_ci(values: np.ndarray, rng: np.random.Generator,
                      resamples: int = 10_000,
                      confidence: float = 0.95) -> tuple[float, float]:
    """Percentile bootstrap CI for the mean of `values`."""
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[0]
    if n == 0:
        raise ValueError("no values")
    idx = rng.integers(0, n, size=(resamples, n))
    means = values[idx].mean(axis=1)
    alpha = (1.0 - confidence) / 2.0
    return (float(np.quantile(means, alpha)), float(np.quantile(means, 1.0 - alpha)))


def empirical_gap(checkpoint_aware: str, checkpoint_blind: str, config,
                  episodes: int, seed: int = 0) -> GapEstimate:
    """Mean episodic reward difference (aware - blind) with a bootstrap 95% CI.

    Both checkpoints must have been trained on the scenario named in
    `config`; rollouts are paired by episode seed so evaluating a
    checkpoint against itself yields a gap of exactly zero.
    """
    from . import experiments  # local import: bounds stays importable standalone

    rows_a = experiments.evaluate_checkpoint(checkpoint_aware, config, episodes,
                                             seed=seed)
    rows_b = experiments.evaluate_checkpoint(checkpoint_blind, config, episodes,
                                             seed=seed)
    rewards_a = np.array([r.reward_mean for r in rows_a])
    rewards_b = np.array([r.reward_mean for r in rows_b])
    diffs = rewards_a - rewards_b
    rng = np.random.default_rng(seed + 90210)
    lo, hi = bootstrap_mean_ci(diffs, rng)
    return GapEstimate(gap=float(diffs.mean()), ci_low=lo, ci_high=hi,
                       episodes=episodes)
