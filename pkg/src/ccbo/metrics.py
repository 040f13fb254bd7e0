"""Ensemble statistics used to judge convergence of a particle run."""
from __future__ import annotations

import numpy as np

__all__ = ["w2_to_dirac", "ensemble_variance", "ensemble_mean"]


def ensemble_mean(positions: np.ndarray) -> np.ndarray:
    return np.asarray(positions, dtype=np.float64).mean(axis=0)


def ensemble_variance(positions: np.ndarray) -> float:
    """Half the mean squared distance to the ensemble mean.

    The factor 1/2 is kept so plotted curves are directly comparable to the
    reference experiments, which define the variance with it.
    """
    positions = np.asarray(positions, dtype=np.float64)
    mean = positions.mean(axis=0)
    return 0.5 * float(np.mean(np.sum((positions - mean) ** 2, axis=1)))


def w2_to_dirac(positions: np.ndarray, x_star) -> float:
    """Squared 2-Wasserstein distance from the empirical measure to a point
    mass: the mean squared distance of the particles to ``x_star``."""
    positions = np.asarray(positions, dtype=np.float64)
    x_star = np.asarray(x_star, dtype=np.float64)
    if positions.shape[-1] != x_star.shape[-1]:
        raise ValueError("dimension mismatch between positions and target point")
    return float(np.mean(np.sum((positions - x_star) ** 2, axis=1)))
