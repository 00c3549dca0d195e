"""Resonant normal forms, periodic-orbit continuation and linear stability
for chains of weakly coupled oscillators."""

from .series import (
    MultiIndex,
    NormWeights,
    RationalComplex,
    TaylorFourierSeries,
    TruncationPolicy,
    lie_derivative,
    lie_transform,
    poisson_bracket,
)
from .model import (
    GradedHamiltonian,
    LatticeModel,
    ResonantChart,
    build_seagull,
    expand_around_torus,
    resonant_chart,
)

__all__ = [
    "MultiIndex",
    "NormWeights",
    "RationalComplex",
    "TaylorFourierSeries",
    "TruncationPolicy",
    "lie_derivative",
    "lie_transform",
    "poisson_bracket",
    "GradedHamiltonian",
    "LatticeModel",
    "ResonantChart",
    "build_seagull",
    "expand_around_torus",
    "resonant_chart",
]

__version__ = "0.1.0"
