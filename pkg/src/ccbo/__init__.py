"""Consensus-based optimization driven by a polynomial value-function feedback.

The package has two halves: an offline solver that approximates the value
function of a discounted infinite-horizon control problem on a box (and the
feedback law given by its gradient), and an online interacting-particle
optimizer that uses that feedback as an extra drift term.
"""
from ccbo.basis import (
    BasisFamily,
    BoxDomain,
    HyperbolicCross,
    MultiIndexBasis,
    TotalDegree,
)
from ccbo.objectives import Objective, ackley, double_well_1d, nonsmooth_1d, quadratic, rastrigin

__all__ = [
    "BasisFamily",
    "BoxDomain",
    "HyperbolicCross",
    "MultiIndexBasis",
    "TotalDegree",
    "Objective",
    "ackley",
    "rastrigin",
    "double_well_1d",
    "nonsmooth_1d",
    "quadratic",
]

__version__ = "0.1.0"
