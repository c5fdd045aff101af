# %% Delayed-action step semantics: the previous action applies until the
# agent's waiting time d, the new action after, and collisions are checked
# along the swept trajectory.

import numpy as np

from dacom.envs import two_phase_motion, pair_contact

dt, vmax, damping, bound = 0.1, 10.0, 0.0, 100.0

# %% From rest with zero previous action, waiting half the step leaves only
# the second half for the new acceleration: displacement = a (dt/2)^2 / 2.
a = np.array([[2.0, 0.0]])
_, pos_end, vel_end = two_phase_motion(
    np.zeros((1, 2)), np.zeros((1, 2)), np.zeros((1, 2)), a,
    np.array([dt / 2]), dt, vmax, damping, bound)
print("closed form:", 0.5 * 2.0 * (dt / 2) ** 2, " integrated:", pos_end[0, 0])

# %% d = 0 is an ordinary step with the new action; d = dt repeats the
# previous action and the new one only takes effect next step.
prev = np.array([[0.0, 3.0]])
new = np.array([[3.0, 0.0]])
for wait in [0.0, dt / 2, dt]:
    _, p, _ = two_phase_motion(np.zeros((1, 2)), np.zeros((1, 2)), prev, new,
                               np.array([wait]), dt, vmax, damping, bound)
    print(f"wait {wait:4.2f}: displacement {p[0]}")

# %% Swept-circle collision: two agents crossing paths make contact
# mid-step even though their endpoint positions are far apart.
p0_a, p0_b = np.array([-0.5, 0.0]), np.array([0.5, 0.0])
pe_a, pe_b = np.array([0.5, 0.0]), np.array([-0.5, 0.0])
hit = pair_contact(p0_a, p0_a, pe_a, 0.0, p0_b, p0_b, pe_b, 0.0, dt,
                   contact_dist=0.2)
endpoints_apart = np.linalg.norm(pe_a - pe_b) > 0.2
print(f"crossing paths: contact={hit}, endpoints apart={endpoints_apart}")

# %% The same machinery drives the environments end to end.
from dacom.envs import CooperativeNavigationEnv

env = CooperativeNavigationEnv()
obs = env.reset(np.random.default_rng(3))
actions = np.zeros((6, 2))
actions[:, 0] = 1.0
waits = np.linspace(0.0, env.dt, 6)
_, rewards, _, info = env.step(actions, waits)
print("per-agent waits:", np.round(waits, 3))
print("shared reward:", round(float(rewards[0]), 3),
      "| collisions this step:", info["collisions"])
