"""Experiment configuration: parsing, validation, canonical serialization.

Configs are plain JSON. Unknown keys are rejected by name, round-tripping
parse -> serialize -> parse is the identity, and the canonical serialized
form is hashed into every output file's provenance header. Hyperparameter
defaults are the reference settings; any override is recorded.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .netchan import RadioParams
from .training import Hyper

__all__ = ["ExperimentConfig", "ConfigError", "load_config", "parse_config",
           "serialize_config", "config_hash", "DEFAULT_EPISODES"]

DEFAULT_EPISODES = {"cn": 15_000, "pp": 15_000, "traffic": 10_000}

STANDARD_RATIOS = (0.10, 0.30, 0.50, 0.70, 0.90)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    scenario: str = "cn"
    algorithm: str = "dacom"
    mean_delay_ratio: float = 0.30
    seeds: tuple = (0,)
    episodes: int | None = None          # None -> scenario default
    eval_episodes: int = 50
    out_dir: str = "runs"
    calibration_trials: int = 2000
    hyper: Hyper = field(default_factory=Hyper)
    radio: RadioParams = field(default_factory=RadioParams)
    scenario_constants: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scenario not in DEFAULT_EPISODES:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if not (0.0 < self.mean_delay_ratio < 1.0):
            raise ConfigError("mean_delay_ratio must lie in (0, 1)")
        self.seeds = tuple(int(s) for s in self.seeds)
        if len(self.seeds) == 0:
            raise ConfigError("at least one seed is required")
        from .baselines import parse_algorithm  # validation only
        parse_algorithm(self.algorithm, self.mean_delay_ratio)

    @property
    def resolved_episodes(self) -> int:
        return self.episodes if self.episodes is not None \
            else DEFAULT_EPISODES[self.scenario]

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def provenance(self, seed: int, extra: dict | None = None) -> dict[str, str]:
        from . import __version__
        out = {
            "config_hash": config_hash(self),
            "seed": str(seed),
            "code_version": __version__,
            "scenario": self.scenario,
            "algorithm": self.algorithm,
            "mean_delay_ratio": repr(self.mean_delay_ratio),
            "overrides": ";".join(self.overrides()) or "(none)",
        }
        if extra:
            out.update({k: str(v) for k, v in extra.items()})
        return out

    def overrides(self) -> list[str]:
        """Non-default hyperparameter and radio settings, for provenance."""
        out = []
        for f in fields(Hyper):
            value = getattr(self.hyper, f.name)
            if value != f.default:
                out.append(f"hyper.{f.name}={value}")
        default_radio = RadioParams()
        for f in fields(RadioParams):
            value = getattr(self.radio, f.name)
            if value != getattr(default_radio, f.name):
                out.append(f"radio.{f.name}={value}")
        return out


def _check_keys(section: str, given: dict, allowed: set):
    unknown = sorted(set(given) - allowed)
    if unknown:
        raise ConfigError(f"unknown {section} keys: {', '.join(unknown)}")


def parse_config(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    top_allowed = {f.name for f in fields(ExperimentConfig)}
    _check_keys("config", data, top_allowed)
    kwargs = dict(data)
    if "hyper" in kwargs:
        hyper_data = kwargs.pop("hyper")
        _check_keys("hyper", hyper_data, {f.name for f in fields(Hyper)})
        kwargs["hyper"] = Hyper(**hyper_data)
    if "radio" in kwargs:
        radio_data = kwargs.pop("radio")
        _check_keys("radio", radio_data, {f.name for f in fields(RadioParams)})
        kwargs["radio"] = RadioParams(**radio_data)
    if "seeds" in kwargs:
        kwargs["seeds"] = tuple(kwargs["seeds"])
    try:
        return ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def serialize_config(config: ExperimentConfig) -> str:
    data = {
        "scenario": config.scenario,
        "algorithm": config.algorithm,
        "mean_delay_ratio": config.mean_delay_ratio,
        "seeds": list(config.seeds),
        "episodes": config.episodes,
        "eval_episodes": config.eval_episodes,
        "out_dir": config.out_dir,
        "calibration_trials": config.calibration_trials,
        "hyper": dataclasses.asdict(config.hyper),
        "radio": dataclasses.asdict(config.radio),
        "scenario_constants": config.scenario_constants,
    }
    return json.dumps(data, indent=2, sort_keys=True)


def load_config(path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return parse_config(data)


def config_hash(config: ExperimentConfig) -> str:
    return hashlib.sha256(serialize_config(config).encode("utf-8")).hexdigest()[:12]
