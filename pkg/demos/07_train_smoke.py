# %% A miniature end-to-end training run on cooperative navigation, small
# enough to watch finish. Full-scale settings live in the README.

import tempfile
from pathlib import Path

from dacom import experiments
from dacom.config import parse_config
from dacom.metrics import read_metrics_csv
from dacom.plotting import render_curves

out_dir = Path(tempfile.mkdtemp(prefix="dacom_demo_"))
config = parse_config({
    "scenario": "cn",
    "algorithm": "dacom",
    "mean_delay_ratio": 0.30,
    "seeds": [0],
    "episodes": 60,
    "out_dir": str(out_dir),
    "hyper": {"batch": 64, "warmup": 150, "update_every": 8,
              "noise_decay": 0.5, "reward_scale": 0.1},
})

print("training 60 episodes of cooperative navigation at 30% mean delay...")
artifacts = experiments.run_train(
    config,
    progress=lambda row: print(f"  episode {row.episode:3d} "
                               f"reward {row.reward_mean:8.2f} "
                               f"wait {row.wait_ratio:.3f}")
    if row.episode % 15 == 0 else None)

# %% Every run leaves a provenance-stamped metrics file, a checkpoint, and
# a rendered learning curve.
provenance, rows = read_metrics_csv(artifacts.metrics_paths[0])
print("\nprovenance:", {k: provenance[k] for k in ("seed", "algorithm",
                                                   "config_hash")})
print("episodes recorded:", len(rows))
print("curves:", artifacts.curves_path)

# %% Frozen-policy evaluation of the checkpoint.
summary = experiments.run_eval(artifacts.checkpoint_paths[0], config,
                               episodes=10, seed=123)
print("\neval:", summary.describe())
