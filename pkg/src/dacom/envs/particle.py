"""Particle-world scenarios: cooperative navigation and predator-prey.

Both play out in a continuous [-bound, bound]^2 plane with discrete time.
Agents have heterogeneous observation ability: agent i sees only its
capability-count nearest landmarks/peers, zero-padded to a fixed width.
Actions are 2-D accelerations in [-1, 1]^2 scaled by the scenario gain.
"""

from __future__ import annotations

import numpy as np

from .core import ScenarioSpec, WorldState, contact_pairs, two_phase_motion

__all__ = ["CooperativeNavigationEnv", "PredatorPreyEnv", "cn_spec", "pp_spec"]


def cn_spec(**overrides) -> ScenarioSpec:
    constants = dict(
        bound=1.0, damping=0.25, accel_gain=4.0, vmax=1.5,
        agent_radius=0.05, landmark_radius=0.05,
        collision_penalty=1.0, cover_distance=0.1,
    )
    constants.update(overrides.pop("constants", {}))
    defaults = dict(scenario="cn", n_agents=6, capabilities=[0, 0, 1, 2, 4, 5],
                    step_interval=0.1, episode_len=25, constants=constants)
    defaults.update(overrides)
    return ScenarioSpec(**defaults)


def pp_spec(**overrides) -> ScenarioSpec:
    constants = dict(
        bound=1.0, damping=0.25,
        predator_accel=3.0, predator_vmax=1.0, predator_radius=0.075,
        prey_accel=4.0, prey_vmax=1.3, prey_radius=0.05,
        n_prey=4, n_landmarks=2, landmark_radius=0.2,
        collision_penalty=1.0, capture_bonus=10.0,
    )
    constants.update(overrides.pop("constants", {}))
    defaults = dict(scenario="pp", n_agents=4, capabilities=[0, 1, 2, 3],
                    step_interval=0.1, episode_len=25, constants=constants)
    defaults.update(overrides)
    return ScenarioSpec(**defaults)


def _nearest(deltas: np.ndarray, count: int, slots: int, width: int) -> np.ndarray:
    """First `count` rows of `deltas` sorted by distance, zero-padded to
    `slots` rows of `width` columns, flattened."""
    out = np.zeros((slots, width))
    if count > 0 and len(deltas) > 0:
        order = np.argsort((deltas[:, :2] ** 2).sum(axis=1), kind="stable")
        take = min(count, len(deltas))
        out[:take] = deltas[order[:take], :width]
    return out.reshape(-1)


class CooperativeNavigationEnv:
    """Six agents cooperatively cover six fixed landmarks.

    The shared per-step reward is minus the sum over landmarks of the
    distance to the nearest agent, minus a penalty per colliding agent pair.
    """

    def __init__(self, spec: ScenarioSpec | None = None):
        self.spec = spec if spec is not None else cn_spec()
        c = self.spec.constants
        self.n_agents = self.spec.n_agents
        self.n_landmarks = self.n_agents
        self.act_dim = 2
        self.dt = self.spec.step_interval
        self.episode_len = self.spec.episode_len
        self.obs_dim = 4 + 2 * (self.n_landmarks - 1) + 2 * (self.n_agents - 1)
        self._slots = (self.n_landmarks - 1, self.n_agents - 1)
        self._radii = np.full(self.n_agents, c["agent_radius"])
        self.clamp_warnings = 0
        self.state: WorldState | None = None
        self.landmarks: np.ndarray | None = None

    def sample_positions(self, rng: np.random.Generator, trials: int) -> np.ndarray:
        b = self.spec.constants["bound"]
        return rng.uniform(-b, b, size=(trials, self.n_agents, 2))

    def positions(self) -> np.ndarray:
        return self.state.positions.copy()

    def agent_kinematics(self) -> tuple[np.ndarray, np.ndarray]:
        return (self.state.positions[: self.n_agents].copy(),
                self.state.velocities[: self.n_agents].copy())

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        b = self.spec.constants["bound"]
        self.state = WorldState(
            positions=rng.uniform(-b, b, size=(self.n_agents, 2)),
            velocities=np.zeros((self.n_agents, 2)),
            prev_actions=np.zeros((self.n_agents, 2)),
        )
        self.landmarks = rng.uniform(-0.9 * b, 0.9 * b, size=(self.n_landmarks, 2))
        self.clamp_warnings = 0
        return self._observe_all()

    def observe(self, i: int) -> np.ndarray:
        st = self.state
        k = self.spec.capabilities[i]
        own = np.concatenate([st.positions[i], st.velocities[i]])
        lm_rel = self.landmarks - st.positions[i]
        lm_feat = _nearest(lm_rel, k, self._slots[0], 2)
        others = [j for j in range(self.n_agents) if j != i]
        ag_rel = st.positions[others] - st.positions[i]
        ag_feat = _nearest(ag_rel, k, self._slots[1], 2)
        return np.concatenate([own, lm_feat, ag_feat])

    def _observe_all(self) -> np.ndarray:
        return np.stack([self.observe(i) for i in range(self.n_agents)])

    def _covered(self) -> int:
        dist = np.sqrt(((self.landmarks[:, None, :] -
                         self.state.positions[None, :, :]) ** 2).sum(axis=-1))
        return int((dist.min(axis=1) <= self.spec.constants["cover_distance"]).sum())

    def delayed_step(self, actions: np.ndarray, waits: np.ndarray):
        """Advance one step; returns (obs, rewards, done, info)."""
        c = self.spec.constants
        st = self.state
        actions = np.clip(np.asarray(actions, dtype=np.float64), -1.0, 1.0)
        waits = np.asarray(waits, dtype=np.float64)
        if np.any((waits < 0) | (waits > self.dt)):
            self.clamp_warnings += int(((waits < 0) | (waits > self.dt)).sum())
            waits = np.clip(waits, 0.0, self.dt)
        acc_prev = st.prev_actions * c["accel_gain"]
        acc_new = actions * c["accel_gain"]
        pos0 = st.positions
        pos_mid, pos_end, vel_end = two_phase_motion(
            pos0, st.velocities, acc_prev, acc_new, waits, self.dt,
            c["vmax"], c["damping"], c["bound"])
        pairs = [(i, j) for i in range(self.n_agents) for j in range(i + 1, self.n_agents)]
        hits = contact_pairs(pos0, pos_mid, pos_end, waits, self.dt, self._radii, pairs)

        self.state = WorldState(positions=pos_end, velocities=vel_end,
                                prev_actions=actions, step_index=st.step_index + 1)
        dist = np.sqrt(((self.landmarks[:, None, :] - pos_end[None, :, :]) ** 2).sum(axis=-1))
        shared = -float(dist.min(axis=1).sum()) - c["collision_penalty"] * len(hits)
        rewards = np.full(self.n_agents, shared)
        done = self.state.step_index >= self.episode_len
        info = {
            "collisions": len(hits),
            "arrivals": self._covered(),
            "win": done and self._covered() == self.n_landmarks,
            "action_delay": waits.copy(),
        }
        return self._observe_all(), rewards, done, info

    step = delayed_step


class PredatorPreyEnv:
    """Four slower predators chase four faster prey around two obstacles.

    Predators are the trained agents; prey take seeded random accelerations.
    The shared component of the reward is minus the smallest
    predator-to-prey distance; captures add a shared bonus and
    predator-predator collisions penalize the agents involved.
    """

    def __init__(self, spec: ScenarioSpec | None = None):
        self.spec = spec if spec is not None else pp_spec()
        c = self.spec.constants
        self.n_agents = self.spec.n_agents
        self.n_prey = int(c["n_prey"])
        self.n_landmarks = int(c["n_landmarks"])
        self.act_dim = 2
        self.dt = self.spec.step_interval
        self.episode_len = self.spec.episode_len
        kmax = max(self.spec.capabilities)
        self._pred_slots = min(kmax, self.n_agents - 1)
        self._prey_slots = min(kmax, self.n_prey)
        self.obs_dim = 4 + 4 * self._pred_slots + 4 * self._prey_slots + 2 * self.n_landmarks
        self._radii = np.concatenate([
            np.full(self.n_agents, c["predator_radius"]),
            np.full(self.n_prey, c["prey_radius"]),
        ])
        self.clamp_warnings = 0
        self.state: WorldState | None = None
        self.landmarks: np.ndarray | None = None
        self._prey_rng: np.random.Generator | None = None

    @property
    def n_entities(self) -> int:
        return self.n_agents + self.n_prey

    def sample_positions(self, rng: np.random.Generator, trials: int) -> np.ndarray:
        b = self.spec.constants["bound"]
        return rng.uniform(-b, b, size=(trials, self.n_agents, 2))

    def positions(self) -> np.ndarray:
        return self.state.positions[: self.n_agents].copy()

    def agent_kinematics(self) -> tuple[np.ndarray, np.ndarray]:
        return (self.state.positions[: self.n_agents].copy(),
                self.state.velocities[: self.n_agents].copy())

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        b = self.spec.constants["bound"]
        self.state = WorldState(
            positions=rng.uniform(-b, b, size=(self.n_entities, 2)),
            velocities=np.zeros((self.n_entities, 2)),
            prev_actions=np.zeros((self.n_entities, 2)),
        )
        self.landmarks = rng.uniform(-0.5 * b, 0.5 * b, size=(self.n_landmarks, 2))
        self._prey_rng = np.random.default_rng(rng.integers(2 ** 63))
        self.clamp_warnings = 0
        return self._observe_all()

    def observe(self, i: int) -> np.ndarray:
        st = self.state
        k = self.spec.capabilities[i]
        own = np.concatenate([st.positions[i], st.velocities[i]])
        others = [j for j in range(self.n_agents) if j != i]
        pred_rel = np.concatenate([
            st.positions[others] - st.positions[i],
            st.velocities[others] - st.velocities[i],
        ], axis=1)
        prey_idx = list(range(self.n_agents, self.n_entities))
        prey_rel = np.concatenate([
            st.positions[prey_idx] - st.positions[i],
            st.velocities[prey_idx] - st.velocities[i],
        ], axis=1)
        pred_feat = _nearest(pred_rel, k, self._pred_slots, 4)
        prey_feat = _nearest(prey_rel, k, self._prey_slots, 4)
        lm_feat = (self.landmarks - st.positions[i]).reshape(-1)
        return np.concatenate([own, pred_feat, prey_feat, lm_feat])

    def _observe_all(self) -> np.ndarray:
        return np.stack([self.observe(i) for i in range(self.n_agents)])

    def _push_out_of_obstacles(self, pos: np.ndarray) -> np.ndarray:
        c = self.spec.constants
        for k in range(self.n_landmarks):
            delta = pos - self.landmarks[k]
            dist = np.sqrt((delta ** 2).sum(axis=1))
            min_dist = c["landmark_radius"] + self._radii
            inside = dist < min_dist
            if inside.any():
                safe = np.where(dist > 0, dist, 1.0)
                push = self.landmarks[k] + delta / safe[:, None] * min_dist[:, None]
                pos = np.where(inside[:, None], push, pos)
        return pos

    def delayed_step(self, actions: np.ndarray, waits: np.ndarray):
        """Advance one step; prey move with fresh random actions (wait 0)."""
        c = self.spec.constants
        st = self.state
        actions = np.clip(np.asarray(actions, dtype=np.float64), -1.0, 1.0)
        waits = np.asarray(waits, dtype=np.float64)
        if np.any((waits < 0) | (waits > self.dt)):
            self.clamp_warnings += int(((waits < 0) | (waits > self.dt)).sum())
            waits = np.clip(waits, 0.0, self.dt)
        prey_actions = self._prey_rng.uniform(-1.0, 1.0, size=(self.n_prey, 2))
        all_actions = np.concatenate([actions, prey_actions])
        all_waits = np.concatenate([waits, np.zeros(self.n_prey)])
        gains = np.concatenate([
            np.full((self.n_agents, 1), c["predator_accel"]),
            np.full((self.n_prey, 1), c["prey_accel"]),
        ])
        vmaxes = np.concatenate([
            np.full(self.n_agents, c["predator_vmax"]),
            np.full(self.n_prey, c["prey_vmax"]),
        ])
        acc_prev = st.prev_actions * gains
        acc_new = all_actions * gains
        pos0 = st.positions
        # two_phase_motion clamps against a single vmax; use the prey cap and
        # re-clamp predators afterwards so both species obey their own limit
        pos_mid, pos_end, vel_end = two_phase_motion(
            pos0, st.velocities, acc_prev, acc_new, all_waits, self.dt,
            float(vmaxes.max()), c["damping"], c["bound"])
        speed = np.sqrt((vel_end ** 2).sum(axis=1))
        over = speed > vmaxes
        if over.any():
            factor = np.where(over, vmaxes / np.where(speed > 0, speed, 1.0), 1.0)
            vel_end = vel_end * factor[:, None]
        pos_end = self._push_out_of_obstacles(pos_end)

        pred_pairs = [(i, j) for i in range(self.n_agents)
                      for j in range(i + 1, self.n_agents)]
        capture_pairs = [(i, j) for i in range(self.n_agents)
                         for j in range(self.n_agents, self.n_entities)]
        collisions = contact_pairs(pos0, pos_mid, pos_end, all_waits, self.dt,
                                   self._radii, pred_pairs)
        captures = contact_pairs(pos0, pos_mid, pos_end, all_waits, self.dt,
                                 self._radii, capture_pairs)

        self.state = WorldState(positions=pos_end, velocities=vel_end,
                                prev_actions=all_actions,
                                step_index=st.step_index + 1)
        pred_pos = pos_end[: self.n_agents]
        prey_pos = pos_end[self.n_agents:]
        dist = np.sqrt(((pred_pos[:, None, :] - prey_pos[None, :, :]) ** 2).sum(axis=-1))
        shared = -float(dist.min()) + c["capture_bonus"] * len(captures)
        rewards = np.full(self.n_agents, shared)
        for i, j in collisions:
            rewards[i] -= c["collision_penalty"]
            rewards[j] -= c["collision_penalty"]
        done = self.state.step_index >= self.episode_len
        info = {
            "collisions": len(collisions),
            "arrivals": len(captures),
            "win": len(captures) > 0,
            "action_delay": waits.copy(),
        }
        return self._observe_all(), rewards, done, info

    step = delayed_step
