"""Energy-saving cell switching for a simulated base station.

A 15-cell station (3 sectors, 5 carriers) serves synthetic daily traffic in
15-minute steps.  Learned estimators predict the power, QoS, and handover
consequences of every carrier on/off action; an approximate dynamic program
turns them into a switching policy with an adaptive QoS threshold, evaluated
against always-on, rule-based, and random baselines.
"""

__version__ = "0.1.0"

from . import adp, baselines, estimators, harness, netmodel, simkernel
from .errors import ConfigError, EpisodeFinished, MissingArtifact, NotFittedError

__all__ = [
    "ConfigError",
    "EpisodeFinished",
    "MissingArtifact",
    "NotFittedError",
    "adp",
    "baselines",
    "estimators",
    "harness",
    "netmodel",
    "simkernel",
    "__version__",
]
