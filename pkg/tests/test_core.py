import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lowrank import (
    DegenerateRank,
    FactorPoint,
    GroundTruth,
    LowRankError,
    NonFiniteUpdate,
    spectral_stats,
)
from lowrank.core import as_matrix, norm_2inf, norm_inf1, op_norm


def test_as_matrix_rejects_bad_input():
    with pytest.raises(ValueError):
        as_matrix(np.zeros(3))
    with pytest.raises(ValueError):
        as_matrix([[1.0, np.nan]])
    a = as_matrix([[1, 2]])
    assert a.dtype == float and not a.flags.writeable


def test_norms_on_small_matrix():
    M = np.array([[3.0, -4.0], [1.0, 1.0]])
    assert norm_2inf(M) == 5.0
    assert norm_inf1(M) == 7.0
    assert op_norm(np.diag([2.0, -7.0])) == pytest.approx(7.0)


def test_factor_point_shapes_and_flat_round_trip():
    rng = np.random.default_rng(0)
    p = FactorPoint(rng.standard_normal((5, 2)), rng.standard_normal((4, 2)))
    assert p.shape == (5, 4) and p.rank == 2 and p.mode == "asymmetric"
    q = p.with_flat(p.flat())
    np.testing.assert_array_equal(q.U, p.U)
    np.testing.assert_array_equal(q.V, p.V)
    # row-major stacking: first r entries are row 0 of U
    np.testing.assert_array_equal(p.flat()[:2], p.U[0])
    s = FactorPoint.symmetric(p.U)
    assert s.is_symmetric and s.shape == (5, 5)
    np.testing.assert_allclose(s.product(), p.U @ p.U.T)
    with pytest.raises(AttributeError):
        p.Z


def test_factor_point_validation():
    with pytest.raises(ValueError):
        FactorPoint(np.ones((3, 2)), np.ones((3, 1)))
    with pytest.raises(ValueError):
        FactorPoint(np.ones((2, 3)))


def test_spectral_stats_scaling():
    X = np.diag([6.0, 3.0, 0.0])
    st_sym = spectral_stats(X, 2)
    assert st_sym.sigma_min_scaled == pytest.approx(1.0)
    assert st_sym.kappa == pytest.approx(2.0)
    st_asym = spectral_stats(X, 2, "asymmetric")
    assert st_asym.sigma_min_scaled == pytest.approx(1.0)
    with pytest.raises(DegenerateRank):
        spectral_stats(X, 3)
    with pytest.raises(DegenerateRank):
        spectral_stats(np.zeros((3, 3)), 1)
    with pytest.raises(ValueError):
        spectral_stats(X, 4)


def test_ground_truth_constants():
    Z = np.array([[2.0, 0.0], [0.0, 1.0], [0.0, 0.0], [0.0, 0.0]])
    gt = GroundTruth(FactorPoint(Z))
    assert gt.sigma_min == pytest.approx(0.25)
    assert gt.kappa == pytest.approx(4.0)
    assert gt.tau_star == pytest.approx(np.sqrt(5.0) / 2)
    assert gt.omega_star == pytest.approx(2.0)
    assert gt.scale == pytest.approx(np.sqrt(5.0))


def test_ground_truth_rejects_unbalanced_pair():
    U = np.array([[2.0], [0.0]])
    V = np.array([[1.0], [0.0]])
    with pytest.raises(ValueError):
        GroundTruth(FactorPoint(U, V))


def test_error_hierarchy():
    err = NonFiniteUpdate("boom", iteration=7)
    assert isinstance(err, LowRankError) and err.iteration == 7


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 10_000))
def test_norm_inequalities(n, q, seed):
    M = np.random.default_rng(seed).standard_normal((n, q))
    # ||M||_{2->inf} <= ||M||_op <= ||M||_F and ||M||_{2->inf} <= ||M||_{inf->1}
    assert norm_2inf(M) <= op_norm(M) + 1e-12
    assert op_norm(M) <= np.linalg.norm(M) + 1e-12
    assert norm_2inf(M) <= norm_inf1(M) + 1e-12
