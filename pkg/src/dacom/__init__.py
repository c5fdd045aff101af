"""Delay-aware multi-agent communication policies and baselines.

The package trains agents that decide how long to wait for peer messages
given a simulated wireless channel, and compares them against
non-delay-aware baselines in particle and traffic environments.
"""

__version__ = "0.1.0"

from . import autodiff, netchan, bounds, agent, envs, baselines, training
from . import metrics, config, experiments, plotting

__all__ = [
    "autodiff", "netchan", "bounds", "agent", "envs", "baselines",
    "training", "metrics", "config", "experiments", "plotting",
    "__version__",
]
