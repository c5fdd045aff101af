"""Delay-aware environments with two-phase step semantics."""

from .core import ScenarioSpec, WorldState, contact_pairs, pair_contact, two_phase_motion
from .particle import CooperativeNavigationEnv, PredatorPreyEnv, cn_spec, pp_spec
from .traffic import TrafficEnv, traffic_spec

__all__ = [
    "ScenarioSpec",
    "WorldState",
    "two_phase_motion",
    "pair_contact",
    "contact_pairs",
    "CooperativeNavigationEnv",
    "PredatorPreyEnv",
    "TrafficEnv",
    "cn_spec",
    "pp_spec",
    "traffic_spec",
    "make_env",
    "default_spec",
]

_FACTORIES = {
    "cn": (CooperativeNavigationEnv, cn_spec),
    "pp": (PredatorPreyEnv, pp_spec),
    "traffic": (TrafficEnv, traffic_spec),
}


def default_spec(scenario: str, **overrides) -> ScenarioSpec:
    if scenario not in _FACTORIES:
        raise ValueError(f"unknown scenario {scenario!r}; expected one of "
                         f"{sorted(_FACTORIES)}")
    return _FACTORIES[scenario][1](**overrides)


def make_env(scenario: str, spec: ScenarioSpec | None = None):
    if scenario not in _FACTORIES:
        raise ValueError(f"unknown scenario {scenario!r}; expected one of "
                         f"{sorted(_FACTORIES)}")
    cls, spec_fn = _FACTORIES[scenario]
    return cls(spec if spec is not None else spec_fn())
