"""Wireless channel model between agents.

Delays between agents are derived from geometry: a distance-dependent path
loss sets the SINR, the SINR sets a Shannon-style bitrate, and the bitrate
divides the message size into a one-way delay. A map-scale calibration
finds the geometry multiplier that hits a requested ratio of mean pairwise
delay to the step interval.

All functions are pure over their value inputs; the only state is a
caller-provided generator used when multiplicative SINR fading is enabled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "RadioParams",
    "ChannelState",
    "CalibrationError",
    "sinr",
    "bitrate",
    "delay",
    "channel_state",
    "mean_delay_ratio",
    "calibrate_scale",
]


@dataclass(frozen=True)
class RadioParams:
    """Radio-layer constants shared by every link in a scenario.

    bandwidth_hz         allocated bandwidth B (Hz)
    tx_power_w           transmission power (W)
    noise_power          receiver white-noise power
    interference         interference power
    pathloss_db_per_unit path loss in dB per unit distance
    message_bits         message size in bits
    """

    bandwidth_hz: float = 1e6
    tx_power_w: float = 1.0
    noise_power: float = 0.5
    interference: float = 0.5
    pathloss_db_per_unit: float = 1.0
    message_bits: int = 2_000

    def __post_init__(self):
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth_hz must be > 0")
        if self.tx_power_w <= 0:
            raise ValueError("tx_power_w must be > 0")
        if self.noise_power < 0 or self.interference < 0:
            raise ValueError("noise and interference powers must be >= 0")
        if self.pathloss_db_per_unit < 0:
            raise ValueError("pathloss_db_per_unit must be >= 0")
        if self.message_bits <= 0:
            raise ValueError("message_bits must be > 0")


@dataclass
class ChannelState:
    """Per-pair link quality for one step.

    delay_matrix[i, j] is the one-way delay (s) of a message from j to i;
    the diagonal is zero. bitrate_matrix holds the matching bitrates (bps).
    """

    delay_matrix: np.ndarray
    bitrate_matrix: np.ndarray

    @property
    def n_agents(self) -> int:
        return self.delay_matrix.shape[0]


class CalibrationError(RuntimeError):
    pass


def sinr(params: RadioParams, distance):
    """Signal-to-interference-plus-noise ratio at a given distance.

    Path loss is linear in distance (dB): phi = pathloss_db_per_unit * d,
    and the ratio is tx_power / (10^(phi/10) * (noise + interference)).
    """
    total = params.noise_power + params.interference
    if total <= 0:
        raise ValueError("noise_power + interference must be > 0")
    distance = np.asarray(distance, dtype=np.float64)
    if np.any(distance < 0):
        raise ValueError("distance must be >= 0")
    phi_db = params.pathloss_db_per_unit * distance
    # 10^(phi/10) may overflow to inf at extreme range; eta -> 0 is the
    # correct unreachable-peer limit
    with np.errstate(over="ignore"):
        eta = params.tx_power_w / (np.power(10.0, phi_db / 10.0) * total)
    return float(eta) if eta.ndim == 0 else eta


def bitrate(params: RadioParams, eta):
    """Achievable bitrate (bps): bandwidth * log2(1 + sinr)."""
    eta = np.asarray(eta, dtype=np.float64)
    if np.any(eta < 0):
        raise ValueError("sinr must be >= 0")
    x = params.bandwidth_hz * np.log2(1.0 + eta)
    return float(x) if x.ndim == 0 else x


def delay(params: RadioParams, rate):
    """One-way delay (s) of one message at bitrate `rate` (bps).

    A zero bitrate marks an unreachable peer: the delay is +inf and the
    message never arrives.
    """
    rate = np.asarray(rate, dtype=np.float64)
    if np.any(rate < 0):
        raise ValueError("bitrate must be >= 0")
    with np.errstate(divide="ignore"):
        l = np.where(rate > 0, params.message_bits / rate, np.inf)
    return float(l) if l.ndim == 0 else l


def channel_state(positions, params: RadioParams,
                  rng: np.random.Generator | None = None,
                  fading_sigma: float = 0.0) -> ChannelState:
    """Pairwise delays and bitrates from agent positions.

    With `fading_sigma` > 0 each directed link's SINR is multiplied by an
    independent log-normal factor drawn from `rng`; with the default 0 the
    result is a pure function of positions and params.
    """
    pos = np.asarray(positions, dtype=np.float64)
    if pos.ndim != 2 or pos.shape[0] < 2:
        raise ValueError("need at least 2 positions")
    n = pos.shape[0]
    diff = pos[:, None, :] - pos[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=-1))
    eta = sinr(params, dist)
    if fading_sigma > 0.0:
        if rng is None:
            raise ValueError("fading requires a generator")
        eta = eta * np.exp(rng.normal(0.0, fading_sigma, size=eta.shape))
    rates = bitrate(params, eta)
    delays = delay(params, rates)
    np.fill_diagonal(delays, 0.0)
    return ChannelState(delay_matrix=delays, bitrate_matrix=rates)


def _pair_delays(params: RadioParams, dists: np.ndarray) -> np.ndarray:
    return delay(params, bitrate(params, sinr(params, dists)))


def _placement_distances(map_sampler: Callable, trials: int,
                         rng: np.random.Generator) -> np.ndarray:
    """Flat array of all off-diagonal pairwise distances over sampled placements."""
    pos = np.asarray(map_sampler(rng, trials), dtype=np.float64)
    if pos.ndim != 3 or pos.shape[0] != trials:
        raise ValueError("map_sampler must return (trials, n_agents, 2)")
    diff = pos[:, :, None, :] - pos[:, None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=-1))
    n = pos.shape[1]
    iu = np.triu_indices(n, k=1)
    return dist[:, iu[0], iu[1]].reshape(-1)


def mean_delay_ratio(params: RadioParams, step_interval: float, scale: float,
                     map_sampler: Callable, trials: int,
                     rng: np.random.Generator) -> float:
    """Mean pairwise delay over random placements, divided by the step interval."""
    dists = _placement_distances(map_sampler, trials, rng)
    return float(_pair_delays(params, dists * scale).mean() / step_interval)


def calibrate_scale(target_ratio: float, step_interval: float, params: RadioParams,
                    map_sampler: Callable, trials: int = 2000,
                    rng: np.random.Generator | None = None,
                    bracket: tuple[float, float] = (1e-4, 1e5),
                    tolerance: float = 0.01) -> float:
    """Find the geometry scale whose mean delay ratio matches `target_ratio`.

    `map_sampler(rng, trials)` must return (trials, n_agents, 2) unscaled
    placements; the same draw is reused at every probed scale so the
    bisection target is a fixed, monotone function of the scale.
    """
    if not (0.0 < target_ratio < 1.0):
        raise ValueError("target_ratio must lie in (0, 1)")
    if step_interval <= 0:
        raise ValueError("step_interval must be > 0")
    if trials < 1000:
        raise ValueError("trials must be >= 1000")
    rng = rng if rng is not None else np.random.default_rng(0)
    dists = _placement_distances(map_sampler, trials, rng)

    def ratio_at(s: float) -> float:
        d = _pair_delays(params, dists * s)
        mean = d.mean() if np.all(np.isfinite(d)) else math.inf
        return mean / step_interval

    lo, hi = bracket
    f_lo = ratio_at(lo) - target_ratio
    f_hi = ratio_at(hi) - target_ratio
    if f_lo > 0 or f_hi < 0:
        raise CalibrationError(
            f"scale bracket {bracket} does not bracket target ratio {target_ratio}")
    for _ in range(200):
        mid = math.sqrt(lo * hi) if lo > 0 else 0.5 * (lo + hi)
        if ratio_at(mid) - target_ratio <= 0:
            lo = mid
        else:
            hi = mid
        if hi / lo < 1.0 + 1e-12:
            break
    s = lo
    achieved = ratio_at(s)
    if abs(achieved - target_ratio) > tolerance:
        raise CalibrationError(
            f"calibration achieved ratio {achieved:.4f}, target {target_ratio:.4f}")
    return s
