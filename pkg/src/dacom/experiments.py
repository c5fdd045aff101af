"""Assembly of full experiments from a configuration.

Bridges the configuration to environments, teams, critics, channel
calibration, and artifact files (metrics CSVs, checkpoints, SVG curves).
Every run is a deterministic function of its config and seed; rerunning
with the same pair reproduces metrics files byte for byte.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, envs
from .agent import Team, TeamSpec
from .autodiff import load_checkpoint, save_checkpoint
from .baselines import parse_algorithm
from .config import ExperimentConfig, config_hash, serialize_config
from .metrics import EpisodeMetrics, write_metrics_csv
from .netchan import calibrate_scale
from .training import Critic, TrainingDiverged, evaluate, train

__all__ = ["build_env", "build_team", "build_critics", "calibrate_for",
           "run_train", "run_eval", "run_sweep", "evaluate_checkpoint",
           "EvalSummary", "TrainArtifacts", "worker_count"]

_CALIBRATION_SEED = 2718


def worker_count() -> int:
    """Sweep thread-pool size, from DACOM_WORKERS (default 1)."""
    raw = os.environ.get("DACOM_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def build_env(config: ExperimentConfig):
    spec = envs.default_spec(config.scenario,
                             constants=dict(config.scenario_constants))
    return envs.make_env(config.scenario, spec)


def team_spec_for(config: ExperimentConfig, env) -> TeamSpec:
    h = config.hyper
    return TeamSpec(
        n_agents=env.n_agents, obs_dim=env.obs_dim, act_dim=env.act_dim,
        step_interval=env.dt, msg_dim=h.msg_dim, heads=h.heads, hidden=h.hidden,
        ewma_alpha=h.ewma_alpha, kappa_fraction=h.kappa_fraction,
    )


def build_team(config: ExperimentConfig, env, seed: int) -> Team:
    kind = parse_algorithm(config.algorithm, config.mean_delay_ratio)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    return Team(team_spec_for(config, env), rng, kind=kind)


def build_critics(config: ExperimentConfig, env, seed: int) -> list:
    spec = team_spec_for(config, env)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    return [Critic(spec, rng, f"agent{i}") for i in range(env.n_agents)]


def calibrate_for(config: ExperimentConfig, env=None) -> float:
    """Geometry scale hitting the configured mean delay ratio.

    Deterministic per (scenario, ratio, radio, trials): the placement draw
    uses a fixed seed so repeated runs agree exactly.
    """
    env = env if env is not None else build_env(config)
    rng = np.random.default_rng(_CALIBRATION_SEED)
    return calibrate_scale(config.mean_delay_ratio, env.dt, config.radio,
                           env.sample_positions, trials=config.calibration_trials,
                           rng=rng)


# ---------------------------------------------------------------------------
# training runs


@dataclass
class TrainArtifacts:
    run_dir: Path
    metrics_paths: list[Path]
    checkpoint_paths: list[Path]
    curves_path: Path | None


def _run_dir(config: ExperimentConfig) -> Path:
    label = config.algorithm.replace(":", "-")
    name = f"{config.scenario}_{label}_w{int(round(config.mean_delay_ratio * 100))}"
    return Path(config.out_dir) / name


def _checkpoint_meta(config: ExperimentConfig, env, seed: int, map_scale: float) -> dict:
    return {
        "config_hash": config_hash(config),
        "scenario": config.scenario,
        "algorithm": config.algorithm,
        "mean_delay_ratio": repr(config.mean_delay_ratio),
        "n_agents": str(env.n_agents),
        "obs_dim": str(env.obs_dim),
        "act_dim": str(env.act_dim),
        "seed": str(seed),
        "map_scale": repr(map_scale),
        "code_version": __version__,
    }


def run_train(config: ExperimentConfig, progress=None, render: bool = True) -> TrainArtifacts:
    """One training run per configured seed; writes metrics, checkpoints,
    a config echo, and (optionally) learning curves."""
    run_dir = _run_dir(config)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.json").write_text(serialize_config(config), encoding="utf-8")
    env = build_env(config)
    map_scale = calibrate_for(config, env)
    metrics_paths = []
    checkpoint_paths = []
    for seed in config.seeds:
        team = build_team(config, env, seed)
        critics = build_critics(config, env, seed)
        try:
            result = train(env, team, critics, config.hyper,
                           config.resolved_episodes, seed, config.radio,
                           map_scale, progress=progress)
        except TrainingDiverged as exc:
            dump_path = run_dir / f"diverged_seed{seed}.bin"
            save_checkpoint(dump_path, getattr(exc, "dump", {}),
                            meta=_checkpoint_meta(config, env, seed, map_scale))
            exc.dump_path = dump_path
            raise
        provenance = config.provenance(seed, extra={"map_scale": repr(map_scale)})
        metrics_path = run_dir / f"metrics_seed{seed}.csv"
        write_metrics_csv(metrics_path, provenance, result.metrics)
        ckpt_path = run_dir / f"checkpoint_seed{seed}.bin"
        save_checkpoint(ckpt_path, result.checkpoint,
                        meta=_checkpoint_meta(config, env, seed, map_scale))
        metrics_paths.append(metrics_path)
        checkpoint_paths.append(ckpt_path)
    curves_path = None
    if render:
        from .plotting import render_curves
        curves_path = run_dir / "curves.svg"
        render_curves(metrics_paths, curves_path)
    return TrainArtifacts(run_dir=run_dir, metrics_paths=metrics_paths,
                          checkpoint_paths=checkpoint_paths, curves_path=curves_path)


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class EvalSummary:
    episodes: int
    reward_mean: float
    reward_ci: tuple | None      # None when undefined (single episode)
    ci_defined: bool
    wait_ratio_mean: float
    msg_delay_ratio_mean: float
    collisions_mean: float
    arrivals_mean: float
    win_rate: float

    def describe(self) -> str:
        ci = ("undefined (single episode)" if not self.ci_defined
              else f"[{self.reward_ci[0]:.3f}, {self.reward_ci[1]:.3f}]")
        return (f"episodes={self.episodes} reward={self.reward_mean:.3f} "
                f"ci95={ci} wait_ratio={self.wait_ratio_mean:.4f} "
                f"collisions={self.collisions_mean:.3f} "
                f"arrivals={self.arrivals_mean:.3f} win_rate={self.win_rate:.3f}")


def _rebuild_from_checkpoint(checkpoint_path, config: ExperimentConfig):
    arrays, meta = load_checkpoint(checkpoint_path)
    env = build_env(config)
    for key, expected in (("scenario", config.scenario),
                          ("n_agents", str(env.n_agents)),
                          ("obs_dim", str(env.obs_dim)),
                          ("act_dim", str(env.act_dim))):
        if key in meta and meta[key] != str(expected):
            raise ValueError(
                f"checkpoint incompatible with config: {key} is {meta[key]}, "
                f"expected {expected}")
    # the checkpoint knows which algorithm produced it; honor that so
    # checkpoints of different algorithms can be compared under one config
    if "algorithm" in meta and meta["algorithm"] != config.algorithm:
        config = config.replace(algorithm=meta["algorithm"])
    team = build_team(config, env, seed=0)
    team.load_arrays(arrays)
    map_scale = float(meta.get("map_scale", "1.0"))
    return env, team, map_scale


def evaluate_checkpoint(checkpoint_path, config: ExperimentConfig, episodes: int,
                        seed: int = 0, trajectory_path=None) -> list[EpisodeMetrics]:
    env, team, map_scale = _rebuild_from_checkpoint(checkpoint_path, config)
    if trajectory_path is None:
        return evaluate(env, team, episodes, seed, config.radio, map_scale)
    with open(trajectory_path, "w", encoding="utf-8") as fh:
        fh.write("step,entity,x,y,vx,vy,d\n")
        return evaluate(env, team, episodes, seed, config.radio, map_scale,
                        trajectory_writer=fh)


def summarize(rows: list[EpisodeMetrics]) -> EvalSummary:
    rewards = np.array([r.reward_mean for r in rows])
    n = len(rows)
    ci = None
    defined = n > 1
    if defined:
        half = 1.96 * rewards.std(ddof=1) / math.sqrt(n)
        ci = (float(rewards.mean() - half), float(rewards.mean() + half))
    return EvalSummary(
        episodes=n,
        reward_mean=float(rewards.mean()),
        reward_ci=ci,
        ci_defined=defined,
        wait_ratio_mean=float(np.mean([r.wait_ratio for r in rows])),
        msg_delay_ratio_mean=float(np.mean([r.msg_delay_ratio for r in rows])),
        collisions_mean=float(np.mean([r.collisions for r in rows])),
        arrivals_mean=float(np.mean([r.arrivals for r in rows])),
        win_rate=float(np.mean([r.win for r in rows])),
    )


def run_eval(checkpoint_path, config: ExperimentConfig, episodes: int,
             seed: int = 0) -> EvalSummary:
    return summarize(evaluate_checkpoint(checkpoint_path, config, episodes, seed))


# ---------------------------------------------------------------------------
# sweeps


def run_sweep(config: ExperimentConfig, ratios, algorithms=None,
              workers: int | None = None) -> list[TrainArtifacts]:
    """Train every (ratio, algorithm) cell; one metrics file per cell/seed.

    Cells run in a thread pool sized by `workers` (default: DACOM_WORKERS).
    """
    algorithms = list(algorithms) if algorithms else [config.algorithm]
    cells = [config.replace(mean_delay_ratio=float(r), algorithm=a)
             for r in ratios for a in algorithms]
    workers = workers if workers is not None else worker_count()
    if workers <= 1:
        return [run_train(cell) for cell in cells]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_train, cells))
