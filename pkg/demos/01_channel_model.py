# %% Wireless channel walkthrough: distance -> SINR -> bitrate -> delay,
# and calibrating map geometry to a target mean-delay ratio.

import numpy as np

from dacom.netchan import (RadioParams, bitrate, calibrate_scale, channel_state,
                           delay, mean_delay_ratio, sinr)

params = RadioParams()
print("radio parameters:", params)

# %% The link budget falls off with distance: path loss is linear in dB,
# so SINR decays geometrically and the Shannon bitrate follows.
print(f"\n{'distance':>9} {'sinr':>10} {'bitrate':>12} {'delay':>10}")
for d in [0.0, 2.0, 5.0, 10.0, 20.0, 40.0]:
    eta = sinr(params, d)
    x = bitrate(params, eta)
    l = delay(params, x)
    print(f"{d:>9.1f} {eta:>10.4f} {x:>12.0f} {l:>10.5f}")

# %% A full pairwise channel from agent positions. Delays are symmetric for
# symmetric geometry and zero on the diagonal.
positions = np.array([[0.0, 0.0], [3.0, 0.0], [0.0, 8.0], [6.0, 6.0]])
state = channel_state(positions, params)
print("\ndelay matrix (s):")
print(np.array_str(state.delay_matrix, precision=4, suppress_small=True))

# %% Scenario geometry lives in unit coordinates; a single scale factor maps
# it to meters. Calibration solves for the scale whose mean pairwise delay
# is a chosen fraction of the step interval.
def sampler(rng, trials):
    return rng.uniform(-1.0, 1.0, size=(trials, 4, 2))

dt = 0.1
for target in [0.10, 0.30, 0.50, 0.90]:
    scale = calibrate_scale(target, dt, params, sampler, trials=2000,
                            rng=np.random.default_rng(0))
    achieved = mean_delay_ratio(params, dt, scale, sampler, 20000,
                                np.random.default_rng(1))
    print(f"target ratio {target:.2f} -> scale {scale:9.3f} "
          f"(independent check: {achieved:.3f})")
