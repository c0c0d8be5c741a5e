import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from drivebrake.tridiag import TridiagonalSolver


def random_dominant(n, rng):
    lower = rng.uniform(-1, 1, n)
    upper = rng.uniform(-1, 1, n)
    diag = 2.5 + rng.random(n)
    lower[0] = upper[-1] = 0.0
    return lower, diag, upper


@given(st.integers(2, 60), st.integers(0, 2**32 - 1))
def test_solve_matches_dense(n, seed):
    rng = np.random.default_rng(seed)
    lower, diag, upper = random_dominant(n, rng)
    s = TridiagonalSolver(lower, diag, upper)
    rhs = rng.normal(size=n)
    dense = np.diag(diag) + np.diag(lower[1:], -1) + np.diag(upper[:-1], 1)
    np.testing.assert_allclose(s.solve(rhs), np.linalg.solve(dense, rhs), atol=1e-12)
    np.testing.assert_array_equal(s.dense(), dense)
    np.testing.assert_allclose(s.matvec(rhs), dense @ rhs, atol=1e-14)


def test_solve_into_buffer():
    s = TridiagonalSolver(np.array([0, 1.0, 1.0]), np.array([4.0, 4.0, 4.0]), np.array([1.0, 1.0, 0]))
    out = np.empty(3)
    res = s.solve(np.array([5.0, 6.0, 5.0]), out=out)
    assert res is out
    np.testing.assert_allclose(out, [1.0, 1.0, 1.0])


def test_shape_mismatch_and_zero_pivot():
    with pytest.raises(ValueError):
        TridiagonalSolver(np.zeros(3), np.ones(4), np.zeros(3))
    with pytest.raises(np.linalg.LinAlgError):
        TridiagonalSolver(np.zeros(3), np.array([0.0, 1.0, 1.0]), np.zeros(3))
