"""Non-delay-aware baseline policies.

All baselines are built from the identical team machinery as the
delay-aware policy (same encoder/aggregator/actor code, same critics, same
replay), differing only in message topology and waiting-time rule:

  nocomm    actor on the local observation only, never waits (d = 0)
  fullcomm  waits for every inbound message up to the step interval;
            messages still missing at dt enter the aggregator zero-filled
  fixed     constant timer d = fraction * dt; message set is exactly the
            arrivals within the timer plus buffered leftovers
  central   every message is relayed through a central aggregator and
            arrives after a fixed round-trip fraction of dt
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .agent import Team, TeamSpec

__all__ = ["BaselineKind", "make_baseline", "parse_algorithm",
           "central_delay_for_ratio", "CENTRAL_DELAY_TABLE"]

# round-trip delay fraction of the central relay, keyed by the scenario's
# mean delay ratio (a discount below twice the one-way mean, reflecting the
# reduced traffic of scheduled communication)
CENTRAL_DELAY_TABLE = {0.10: 0.15, 0.30: 0.40, 0.50: 0.60, 0.70: 0.80, 0.90: 0.95}


@dataclass(frozen=True)
class BaselineKind:
    name: str
    fraction: float | None = None      # fixed-timer fraction of dt
    delay_ratio: float | None = None   # central relay round-trip fraction of dt

    def __post_init__(self):
        if self.name not in ("nocomm", "fullcomm", "fixed", "central"):
            raise ValueError(f"unknown baseline kind {self.name!r}")
        if self.name == "fixed":
            if self.fraction is None or not (0.0 <= self.fraction <= 1.0):
                raise ValueError("fixed timer fraction must lie in [0, 1]")
        if self.name == "central":
            if self.delay_ratio is None or not (0.0 < self.delay_ratio <= 1.0):
                raise ValueError("central delay ratio must lie in (0, 1]")

    def label(self) -> str:
        if self.name == "fixed":
            return f"fixed:{self.fraction:g}"
        if self.name == "central":
            return f"central:{self.delay_ratio:g}"
        return self.name


def central_delay_for_ratio(mean_delay_ratio: float) -> float:
    """Round-trip fraction for the central relay at a given delay regime."""
    if mean_delay_ratio in CENTRAL_DELAY_TABLE:
        return CENTRAL_DELAY_TABLE[mean_delay_ratio]
    keys = sorted(CENTRAL_DELAY_TABLE)
    nearest = min(keys, key=lambda k: abs(k - mean_delay_ratio))
    return CENTRAL_DELAY_TABLE[nearest]


def parse_algorithm(name: str, mean_delay_ratio: float | None = None):
    """Algorithm string from a config: 'dacom' (returns None) or a baseline.

    Baselines: 'nocomm', 'fullcomm', 'fixed:<fraction>', 'central' (relay
    delay looked up from the mean delay ratio) or 'central:<ratio>'.
    """
    name = name.strip().lower()
    if name == "dacom":
        return None
    if name in ("nocomm", "fullcomm"):
        return BaselineKind(name)
    if name.startswith("fixed:"):
        return BaselineKind("fixed", fraction=float(name.split(":", 1)[1]))
    if name == "central":
        if mean_delay_ratio is None:
            raise ValueError("central baseline needs a mean delay ratio")
        return BaselineKind("central",
                            delay_ratio=central_delay_for_ratio(mean_delay_ratio))
    if name.startswith("central:"):
        return BaselineKind("central", delay_ratio=float(name.split(":", 1)[1]))
    raise ValueError(f"unknown algorithm {name!r}")


def make_baseline(kind: BaselineKind, spec: TeamSpec,
                  rng: np.random.Generator) -> Team:
    """A team of baseline agents sharing the delay-aware training stack."""
    if not isinstance(kind, BaselineKind):
        raise ValueError("make_baseline requires a BaselineKind")
    return Team(spec, rng, kind=kind)
