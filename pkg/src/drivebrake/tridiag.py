"""Thomas algorithm for constant tridiagonal systems.

The implicit diffusion matrix never changes during a run, so the forward
elimination coefficients are computed once and each solve is a single
O(N) forward/backward sweep.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _factor(lower, diag, upper):
    n = diag.shape[0]
    cprime = np.empty(n)
    denom = np.empty(n)
    denom[0] = diag[0]
    cprime[0] = upper[0] / denom[0]
    for i in range(1, n):
        denom[i] = diag[i] - lower[i] * cprime[i - 1]
        cprime[i] = upper[i] / denom[i] if i < n - 1 else 0.0
    return cprime, denom


@njit(cache=True)
def _sweep(lower, cprime, denom, rhs, out):
    n = rhs.shape[0]
    out[0] = rhs[0] / denom[0]
    for i in range(1, n):
        out[i] = (rhs[i] - lower[i] * out[i - 1]) / denom[i]
    for i in range(n - 2, -1, -1):
        out[i] -= cprime[i] * out[i + 1]


class TridiagonalSolver:
    """Pre-factored solver for ``M x = d``.

    ``lower[i]`` multiplies ``x[i-1]`` in row ``i`` (``lower[0]`` unused),
    ``upper[i]`` multiplies ``x[i+1]`` (``upper[-1]`` unused).
    """

    def __init__(self, lower, diag, upper):
        self.lower = np.ascontiguousarray(lower, dtype=float)
        self.diag = np.ascontiguousarray(diag, dtype=float)
        self.upper = np.ascontiguousarray(upper, dtype=float)
        if not (self.lower.shape == self.diag.shape == self.upper.shape):
            raise ValueError("band arrays must share one length")
        try:
            self._cprime, self._denom = _factor(self.lower, self.diag, self.upper)
        except ZeroDivisionError:
            raise np.linalg.LinAlgError("zero pivot in tridiagonal elimination") from None
        if not np.all(np.isfinite(self._denom)) or np.any(self._denom == 0.0):
            raise np.linalg.LinAlgError("zero pivot in tridiagonal elimination")

    @property
    def size(self) -> int:
        return self.diag.shape[0]

    def solve(self, rhs, out=None):
        rhs = np.ascontiguousarray(rhs, dtype=float)
        if out is None:
            out = np.empty_like(rhs)
        _sweep(self.lower, self._cprime, self._denom, rhs, out)
        return out

    def matvec(self, x):
        y = self.diag * x
        y[1:] += self.lower[1:] * x[:-1]
        y[:-1] += self.upper[:-1] * x[1:]
        return y

    def dense(self):
        n = self.size
        m = np.diag(self.diag)
        m[np.arange(1, n), np.arange(n - 1)] = self.lower[1:]
        m[np.arange(n - 1), np.arange(1, n)] = self.upper[:-1]
        return m
