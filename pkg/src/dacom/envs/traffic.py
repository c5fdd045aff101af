"""Simplified two-road intersection with four autonomous vehicles.

Vehicles follow fixed straight paths (two eastbound on the horizontal road,
two northbound on the vertical road) that conflict at the origin. The
action is a scalar acceleration along the path; speed stays in [0, vmax].
A collision removes the pair with a penalty, reaching the far side inside
the time budget pays a bonus, and a small per-step incentive rewards speed.

Observation ability is heterogeneous: each vehicle sees peers only inside
its ego-centered, heading-aligned rectangle, and the last vehicle's
20 m x 20 m window covers the whole junction area.
"""

from __future__ import annotations

import numpy as np

from .core import ScenarioSpec, pair_contact

__all__ = ["TrafficEnv", "traffic_spec"]


def traffic_spec(**overrides) -> ScenarioSpec:
    constants = dict(
        road_half_len=10.0, spawn_min=-10.0, spawn_max=-5.0,
        vmax=7.0, accel_gain=5.0, vehicle_radius=1.0,
        init_speed_min=2.5, init_speed_max=5.5,
        collision_penalty=10.0, arrival_bonus=5.0, speed_incentive=0.02,
        budget_factor=2.0, min_spawn_gap=3.0,
    )
    constants.update(overrides.pop("constants", {}))
    defaults = dict(scenario="traffic", n_agents=4,
                    capabilities=[(5.0, 3.0), (5.0, 3.0), (5.0, 3.0), (20.0, 20.0)],
                    step_interval=0.1, episode_len=50, constants=constants)
    defaults.update(overrides)
    return ScenarioSpec(**defaults)


# heading unit vectors: vehicles 0-1 eastbound, 2-3 northbound
_HEADINGS = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])


class TrafficEnv:
    def __init__(self, spec: ScenarioSpec | None = None):
        self.spec = spec if spec is not None else traffic_spec()
        c = self.spec.constants
        self.n_agents = self.spec.n_agents
        self.act_dim = 1
        self.dt = self.spec.step_interval
        self.episode_len = self.spec.episode_len
        self.obs_dim = 4 + 4 * (self.n_agents - 1)
        self.clamp_warnings = 0
        self._dest = c["road_half_len"]
        self._reset_arrays()

    def _reset_arrays(self):
        n = self.n_agents
        self.s = np.zeros(n)            # progress along own path
        self.v = np.zeros(n)            # speed along path
        self.prev_actions = np.zeros(n)
        self.active = np.ones(n, dtype=bool)
        self.arrived = np.zeros(n, dtype=bool)
        self.collided = np.zeros(n, dtype=bool)
        self.budget_steps = np.zeros(n)
        self.step_index = 0

    def _xy(self, s: np.ndarray) -> np.ndarray:
        return s[:, None] * _HEADINGS

    def positions(self) -> np.ndarray:
        return self._xy(self.s)

    def agent_kinematics(self) -> tuple[np.ndarray, np.ndarray]:
        return self._xy(self.s), self.v[:, None] * _HEADINGS

    def sample_positions(self, rng: np.random.Generator, trials: int) -> np.ndarray:
        c = self.spec.constants
        s = rng.uniform(-c["road_half_len"], c["road_half_len"],
                        size=(trials, self.n_agents))
        return s[:, :, None] * _HEADINGS[None, :, :]

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        c = self.spec.constants
        self._reset_arrays()
        for road in ((0, 1), (2, 3)):
            lead = rng.uniform(c["spawn_min"] + c["min_spawn_gap"], c["spawn_max"])
            trail = rng.uniform(c["spawn_min"], lead - c["min_spawn_gap"])
            self.s[road[0]], self.s[road[1]] = lead, trail
        self.v[:] = rng.uniform(c["init_speed_min"], c["init_speed_max"],
                                size=self.n_agents)
        free_flow = (self._dest - self.s) / c["vmax"]
        self.budget_steps = np.ceil(c["budget_factor"] * free_flow / self.dt)
        self.clamp_warnings = 0
        return self._observe_all()

    # -- observation ----------------------------------------------------

    def observe(self, i: int) -> np.ndarray:
        c = self.spec.constants
        half = c["road_half_len"]
        if not self.active[i]:
            return np.zeros(self.obs_dim)
        pos = self._xy(self.s)
        vel = self.v[:, None] * _HEADINGS
        own = np.array([pos[i, 0] / half, pos[i, 1] / half,
                        self.v[i] / c["vmax"], (self._dest - self.s[i]) / (2 * half)])
        length, width = self.spec.capabilities[i]
        heading = _HEADINGS[i]
        across = np.array([-heading[1], heading[0]])
        feats = []
        for j in range(self.n_agents):
            if j == i or not self.active[j]:
                continue
            rel = pos[j] - pos[i]
            along = float(rel @ heading)
            lateral = float(rel @ across)
            if abs(along) <= length / 2 and abs(lateral) <= width / 2:
                rel_v = vel[j] - vel[i]
                feats.append((along ** 2 + lateral ** 2,
                              [rel[0] / half, rel[1] / half,
                               rel_v[0] / c["vmax"], rel_v[1] / c["vmax"]]))
        feats.sort(key=lambda t: t[0])
        slots = np.zeros((self.n_agents - 1, 4))
        for k, (_, f) in enumerate(feats):
            slots[k] = f
        return np.concatenate([own, slots.reshape(-1)])

    def _observe_all(self) -> np.ndarray:
        return np.stack([self.observe(i) for i in range(self.n_agents)])

    # -- dynamics ---------------------------------------------------------

    def _integrate(self, a_prev, a_new, waits):
        """1-D two-phase motion along each path; speed clamped to [0, vmax].
        Zero-length phases pass state through untouched."""
        c = self.spec.constants
        vmax = c["vmax"]

        def phase(s, v, a, h):
            active = h > 0
            v_new = np.clip(v + a * h, 0.0, vmax)
            s_new = s + 0.5 * (v + v_new) * h
            return np.where(active, s_new, s), np.where(active, v_new, v)

        s_mid, v_mid = phase(self.s, self.v, a_prev, waits)
        s_end, v_end = phase(s_mid, v_mid, a_new, self.dt - waits)
        return s_mid, s_end, v_end

    def delayed_step(self, actions: np.ndarray, waits: np.ndarray):
        c = self.spec.constants
        actions = np.clip(np.asarray(actions, dtype=np.float64).reshape(-1), -1.0, 1.0)
        waits = np.asarray(waits, dtype=np.float64)
        if np.any((waits < 0) | (waits > self.dt)):
            self.clamp_warnings += int(((waits < 0) | (waits > self.dt)).sum())
            waits = np.clip(waits, 0.0, self.dt)
        a_prev = self.prev_actions * c["accel_gain"]
        a_new = actions * c["accel_gain"]
        a_prev = np.where(self.active, a_prev, 0.0)
        a_new = np.where(self.active, a_new, 0.0)
        s0 = self.s.copy()
        s_mid, s_end, v_end = self._integrate(a_prev, a_new, waits)
        keep = ~self.active
        s_mid = np.where(keep, s0, s_mid)
        s_end = np.where(keep, s0, s_end)
        v_end = np.where(keep, 0.0, v_end)

        pos0 = self._xy(s0)
        pos_mid = self._xy(s_mid)
        pos_end = self._xy(s_end)
        radius = c["vehicle_radius"]
        rewards = np.zeros(self.n_agents)
        collisions = 0
        for i in range(self.n_agents):
            for j in range(i + 1, self.n_agents):
                if not (self.active[i] and self.active[j]):
                    continue
                if pair_contact(pos0[i], pos_mid[i], pos_end[i], float(waits[i]),
                                pos0[j], pos_mid[j], pos_end[j], float(waits[j]),
                                self.dt, 2 * radius):
                    collisions += 1
                    for k in (i, j):
                        rewards[k] -= c["collision_penalty"]
                        self.collided[k] = True
                        self.active[k] = False
                        v_end[k] = 0.0

        self.step_index += 1
        arrivals = 0
        for i in range(self.n_agents):
            if not self.active[i]:
                continue
            rewards[i] += c["speed_incentive"] * v_end[i] / c["vmax"]
            if s_end[i] >= self._dest:
                self.active[i] = False
                if self.step_index <= self.budget_steps[i]:
                    rewards[i] += c["arrival_bonus"]
                    self.arrived[i] = True
                    arrivals += 1
        self.s = s_end
        self.v = v_end
        self.prev_actions = np.where(self.active, actions, 0.0)
        done = bool(self.step_index >= self.episode_len or not self.active.any())
        info = {
            "collisions": collisions,
            "arrivals": arrivals,
            "win": done and bool(self.arrived.all()),
            "action_delay": waits.copy(),
            "terminal": bool(not self.active.any()),
            "collided_total": int(self.collided.sum()),
            "arrived_total": int(self.arrived.sum()),
        }
        return self._observe_all(), rewards, done, info

    step = delayed_step
