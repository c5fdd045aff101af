"""Shared kinematics for delay-aware environments.

A step integrates each entity over two sub-intervals: the previous action's
acceleration applies over [0, d) and the new action's over [d, dt), where d
is the agent's waiting time. A wait of zero reduces bit-exactly to an
ordinary single-interval step, and a wait of dt repeats the previous action
for the whole step.

Collision checks are continuous: each entity's motion within a sub-interval
is approximated by the chord between its endpoint positions, and pairs are
tested with a swept-circle minimum-distance solve on every common segment.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["ScenarioSpec", "WorldState", "two_phase_motion", "pair_contact",
           "contact_pairs"]


@dataclass
class ScenarioSpec:
    """Geometry, dynamics, and reward constants for one scenario."""

    scenario: str
    n_agents: int
    capabilities: list
    step_interval: float
    episode_len: int
    map_scale: float = 1.0
    constants: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.capabilities) != self.n_agents:
            raise ValueError("capability list length must equal the agent count")


@dataclass
class WorldState:
    positions: np.ndarray      # (E, 2)
    velocities: np.ndarray     # (E, 2)
    prev_actions: np.ndarray   # (E, act_dim), the previous step's actions
    step_index: int = 0


def _clamp_speed(vel: np.ndarray, vmax: float) -> np.ndarray:
    speed = np.sqrt((vel * vel).sum(axis=1, keepdims=True))
    factor = np.where(speed > vmax, vmax / np.where(speed > 0, speed, 1.0), 1.0)
    return vel * factor


def _clip_bounds(pos: np.ndarray, vel: np.ndarray, bound: float):
    clipped = np.clip(pos, -bound, bound)
    vel = np.where(clipped != pos, 0.0, vel)
    return clipped, vel


def _phase(pos, vel, acc, h, vmax, bound):
    """One constant-acceleration phase; zero-length phases pass state through
    untouched (the speed clamp is not float-idempotent, so re-running it on
    an already-clamped velocity would perturb bits)."""
    active = h > 0
    v_new = _clamp_speed(vel + acc * h, vmax)
    p_new = pos + 0.5 * (vel + v_new) * h
    p_new, v_new = _clip_bounds(p_new, v_new, bound)
    return np.where(active, p_new, pos), np.where(active, v_new, vel)


def two_phase_motion(pos: np.ndarray, vel: np.ndarray, acc_prev: np.ndarray,
                     acc_new: np.ndarray, waits: np.ndarray, dt: float,
                     vmax: float, damping: float, bound: float):
    """Integrate all entities through one delayed step.

    Returns (pos_mid, pos_end, vel_end): positions at each entity's own
    phase boundary and at the step end. Velocity damping applies once at the
    step start; within each phase the acceleration is constant, speed is
    clamped at the phase end, and positions advance by the trapezoid rule
    (which makes displacement from rest exactly a*h^2/2).
    """
    waits = np.asarray(waits, dtype=np.float64).reshape(-1, 1)
    vel = vel * (1.0 - damping)
    pos_mid, v_mid = _phase(pos, vel, acc_prev, waits, vmax, bound)
    pos_end, v_end = _phase(pos_mid, v_mid, acc_new, dt - waits, vmax, bound)
    return pos_mid, pos_end, v_end


def _position_at(p0, p_mid, p_end, d, dt, t):
    """Chord interpolation along an entity's two-phase trajectory."""
    if t <= d:
        alpha = t / d if d > 0 else 1.0
        return p0 + alpha * (p_mid - p0)
    span = dt - d
    alpha = (t - d) / span if span > 0 else 1.0
    return p_mid + alpha * (p_end - p_mid)


def _segment_min_dist_sq(r0: np.ndarray, r1: np.ndarray) -> float:
    """Minimum squared distance of the linear path r(s) = r0 + s (r1 - r0)."""
    dr = r1 - r0
    denom = float(dr @ dr)
    if denom == 0.0:
        return float(r0 @ r0)
    s = -float(r0 @ dr) / denom
    s = min(1.0, max(0.0, s))
    r = r0 + s * dr
    return float(r @ r)


def pair_contact(p0_i, pm_i, pe_i, d_i, p0_j, pm_j, pe_j, d_j, dt, contact_dist):
    """Whether two entities come within contact distance during the step."""
    times = sorted({0.0, float(d_i), float(d_j), float(dt)})
    limit = contact_dist * contact_dist
    for ta, tb in zip(times, times[1:]):
        a_i = _position_at(p0_i, pm_i, pe_i, d_i, dt, ta)
        b_i = _position_at(p0_i, pm_i, pe_i, d_i, dt, tb)
        a_j = _position_at(p0_j, pm_j, pe_j, d_j, dt, ta)
        b_j = _position_at(p0_j, pm_j, pe_j, d_j, dt, tb)
        if _segment_min_dist_sq(a_i - a_j, b_i - b_j) <= limit:
            return True
    return False


def contact_pairs(pos0, pos_mid, pos_end, waits, dt, radii, candidates):
    """Contact pairs among `candidates` (i, j) index tuples; symmetric by
    construction since each unordered pair is tested once."""
    hits = []
    for i, j in candidates:
        if pair_contact(pos0[i], pos_mid[i], pos_end[i], float(waits[i]),
                        pos0[j], pos_mid[j], pos_end[j], float(waits[j]),
                        dt, radii[i] + radii[j]):
            hits.append((i, j))
    return hits
