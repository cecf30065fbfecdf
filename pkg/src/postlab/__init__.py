"""Finite-dimensional measurement simulator with interchangeable projection rules."""

from .hilbert import (
    ProjectorDecomposition,
    commutator_norm,
    eigendecompose,
    evolve,
    joint_decomposition,
    random_unitary,
)
from .measurement import (
    APP,
    BORN,
    MeasurementRule,
    OutcomeDistribution,
    collapse,
    distribution,
    generalized,
    sample_outcome,
    support_count,
)
from .stats import RandomStream

__all__ = [
    "APP",
    "BORN",
    "MeasurementRule",
    "OutcomeDistribution",
    "ProjectorDecomposition",
    "RandomStream",
    "collapse",
    "commutator_norm",
    "distribution",
    "eigendecompose",
    "evolve",
    "generalized",
    "joint_decomposition",
    "random_unitary",
    "sample_outcome",
    "support_count",
]

__version__ = "0.1.0"
