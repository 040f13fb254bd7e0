import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from ccbo.metrics import ensemble_mean, ensemble_variance, w2_to_dirac


def test_w2_all_particles_at_target():
    X = np.tile([0.3, -0.7], (5, 1))
    assert w2_to_dirac(X, [0.3, -0.7]) == 0.0


def test_w2_two_particle_example():
    X = np.array([[0.0], [2.0]])
    assert w2_to_dirac(X, [1.0]) == pytest.approx(1.0)


def test_w2_matches_direct_sum():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(4, 2))
    x_star = np.array([0.5, -0.25])
    direct = sum(np.sum((X[i] - x_star) ** 2) for i in range(4)) / 4
    assert w2_to_dirac(X, x_star) == pytest.approx(direct, rel=1e-14)


def test_variance_single_particle():
    assert ensemble_variance(np.array([[1.0, 2.0]])) == 0.0


def test_variance_two_particle_example():
    # (1/2) * (1/2) * (1 + 1) with the explicit one-half factor
    assert ensemble_variance(np.array([[-1.0], [1.0]])) == pytest.approx(0.5)


def test_variance_translation_invariant():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(20, 3))
    shift = np.array([5.0, -2.0, 0.5])
    assert ensemble_variance(X) == pytest.approx(ensemble_variance(X + shift), abs=1e-12)


@given(hnp.arrays(np.float64, (7, 2), elements=st.floats(-10, 10)))
@settings(max_examples=50, deadline=None)
def test_decomposition_identity(X):
    # mean squared distance to any point splits into spread plus bias
    x_star = np.array([0.25, -1.5])
    lhs = w2_to_dirac(X, x_star)
    rhs = 2.0 * ensemble_variance(X) + float(np.sum((ensemble_mean(X) - x_star) ** 2))
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_permutation_invariance():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(9, 2))
    perm = rng.permutation(9)
    # reordering permutes the reduction, so equality holds to rounding
    assert ensemble_variance(X) == pytest.approx(ensemble_variance(X[perm]), rel=1e-12)
    assert w2_to_dirac(X, [0, 0]) == pytest.approx(w2_to_dirac(X[perm], [0, 0]), rel=1e-12)


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        w2_to_dirac(np.zeros((3, 2)), [0.0, 0.0, 0.0])
