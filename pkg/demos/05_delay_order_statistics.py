# %% Order statistics of waiting: when an agent waits for the slowest of n
# peers, the expected cost grows like mean + xi_n * std. Relaying through a
# central aggregator pays an extra mean delay on top.

import numpy as np

from dacom.bounds import (DelayModel, compare_modes, empirical_xi,
                          expected_max_delay, prop1_bound, sample_delays)

rng = np.random.default_rng(0)

# %% The xi_n coefficient, estimated by Monte Carlo. xi_1 = 0, xi_2 = 1/sqrt(pi).
print(f"{'n':>3} {'E[max]':>10} {'xi_n':>8}")
for n in [1, 2, 3, 4, 6, 8]:
    model = DelayModel(mean=1.0, std=0.1, agents=n)
    est = expected_max_delay(model, 200_000, rng)
    print(f"{n:>3} {est.value:>10.5f} {empirical_xi(est, model):>8.4f}")

# %% Direct exchange vs central relay: the relay's return leg adds one full
# mean delay, so centralized communication is strictly worse for any
# positive mean.
for n in [2, 4, 8]:
    cmp = compare_modes(DelayModel(mean=1.0, std=0.1, agents=n), 200_000, rng)
    print(f"n={n}: direct {cmp.decentralized.value:.4f}  "
          f"relayed {cmp.centralized.value:.4f}  gap {cmp.gap:.4f}")

# %% Monotonicity under common random numbers: reusing one wide draw makes
# the growth in n exact per trial, not just in expectation.
model = DelayModel(mean=1.0, std=0.2, agents=8)
draws = sample_delays(model, 100_000, rng)
values = [expected_max_delay(model, 0, draws=draws[:, :n]).value
          for n in range(1, 9)]
print("E[max] vs n:", " ".join(f"{v:.4f}" for v in values))
print("nondecreasing:", all(b >= a for a, b in zip(values, values[1:])))

# %% The additive loss bound: per-pair message gains weighted by miss
# probability, plus the delay cost. Tuning the waiting time trades the two
# terms against each other.
gains = [2.0, 1.0, 0.5]
for wait_quality in [0.9, 0.5, 0.1]:  # probability a message is missed
    miss = [wait_quality] * 3
    delay_cost = 2.0 * (1.0 - wait_quality)  # waiting longer costs more
    print(f"miss={wait_quality:.1f} delay_cost={delay_cost:.1f} "
          f"-> bound {prop1_bound(gains, miss, delay_cost):.2f}")
