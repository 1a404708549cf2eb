import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import nnls as scipy_nnls

from mobilecontrol.synthesis.nnls import nnls_bb, nnls_enumerate


@given(st.integers(0, 2 ** 31 - 1))
def test_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(30, 10)) * rng.uniform(0.01, 10, size=10)
    b = rng.normal(size=30)
    res = nnls_bb(A, b, max_iter=20000, tol=1e-12)
    x_ref, r_ref = nnls_enumerate(A, b)
    assert np.all(res.x >= 0)
    assert res.rnorm == pytest.approx(r_ref, rel=1e-7, abs=1e-10)
    np.testing.assert_allclose(res.x, x_ref, atol=1e-6 * max(1.0, np.abs(x_ref).max()))


def test_exact_nonnegative_solution_recovered():
    rng = np.random.default_rng(3)
    A = rng.uniform(size=(40, 8))
    x = rng.uniform(0, 2, size=8)
    res = nnls_bb(A, A @ x, max_iter=20000, tol=1e-13)
    assert res.converged
    np.testing.assert_allclose(res.x, x, atol=1e-6)


def test_agrees_with_active_set_on_larger_problem():
    rng = np.random.default_rng(11)
    A = rng.normal(size=(120, 60))
    b = rng.normal(size=120)
    ours = nnls_bb(A, b, max_iter=20000, tol=1e-12)
    _, r_ref = scipy_nnls(A, b)
    assert ours.rnorm == pytest.approx(r_ref, rel=1e-6)


def test_degenerate_inputs():
    assert nnls_bb(np.zeros((3, 0)), np.ones(3)).rnorm == pytest.approx(np.sqrt(3))
    res = nnls_bb(np.array([[1.0, 0.0], [0.0, 0.0]]), np.array([-1.0, 2.0]))
    np.testing.assert_array_equal(res.x, [0.0, 0.0])
