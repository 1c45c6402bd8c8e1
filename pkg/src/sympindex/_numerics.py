"""Small numerical helpers: finite differences, Hermite curves, RK4 steps."""

from __future__ import annotations

import numpy as np


def central_difference(f, t: float, h: float):
    """Five-point central difference of ``f`` at ``t`` (fourth order)."""
    return (-f(t + 2 * h) + 8 * f(t + h) - 8 * f(t - h) + f(t - 2 * h)) / (12.0 * h)


def table_derivative(values: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order derivative of samples on a uniform grid (axis 0).

    Central five-point stencils inside, one-sided five-point stencils at
    the two nodes nearest each end.
    """
    f = np.asarray(values, dtype=float)
    if f.shape[0] < 5:
        return np.gradient(f, h, axis=0)
    d = np.empty_like(f)
    d[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * h)
    d[0] = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * h)
    d[1] = (-3 * f[0] - 10 * f[1] + 18 * f[2] - 6 * f[3] + f[4]) / (12 * h)
    d[-1] = (25 * f[-1] - 48 * f[-2] + 36 * f[-3] - 16 * f[-4] + 3 * f[-5]) / (12 * h)
    d[-2] = (3 * f[-1] + 10 * f[-2] - 18 * f[-3] + 6 * f[-4] - f[-5]) / (12 * h)
    return d


def omega_matrix(n: int) -> np.ndarray:
    """Gram matrix of the canonical symplectic form on ``R^n + R^n*``.

    ``omega((v1, a1), (v2, a2)) = a2(v1) - a1(v2) = x^T J y``.
    """
    j = np.zeros((2 * n, 2 * n))
    j[:n, n:] = np.eye(n)
    j[n:, :n] = -np.eye(n)
    return j


def positive_qr(m: np.ndarray) -> np.ndarray:
    """Orthonormal factor of ``m`` with a positive-diagonal triangular factor.

    The orientation of the column basis is preserved, so determinants of
    sub-blocks keep their sign.
    """
    q, r = np.linalg.qr(m)
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    return q * d


def positive_qr_batch(ms: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(ms)
    d = np.sign(np.diagonal(r, axis1=-2, axis2=-1))
    d[d == 0] = 1.0
    return q * d[..., None, :]


class HermiteCurve:
    """Piecewise cubic Hermite interpolant of a matrix-valued curve.

    ``values[i]`` and ``derivs[i]`` are the curve and its derivative at
    ``times[i]``; nodes need not be uniform.
    """

    def __init__(self, times, values, derivs):
        self.times = np.asarray(times, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.derivs = np.asarray(derivs, dtype=float)

    def _locate(self, t):
        i = int(np.searchsorted(self.times, t, side="right") - 1)
        return min(max(i, 0), len(self.times) - 2)

    def __call__(self, t: float) -> np.ndarray:
        i = self._locate(t)
        t0, t1 = self.times[i], self.times[i + 1]
        h = t1 - t0
        s = (t - t0) / h
        if s == 0.0:
            return self.values[i].copy()
        if s == 1.0:
            return self.values[i + 1].copy()
        h00 = 2 * s**3 - 3 * s**2 + 1
        h10 = s**3 - 2 * s**2 + s
        h01 = -2 * s**3 + 3 * s**2
        h11 = s**3 - s**2
        return (h00 * self.values[i] + h10 * h * self.derivs[i]
                + h01 * self.values[i + 1] + h11 * h * self.derivs[i + 1])

    def derivative(self, t: float) -> np.ndarray:
        i = self._locate(t)
        t0, t1 = self.times[i], self.times[i + 1]
        h = t1 - t0
        s = (t - t0) / h
        d00 = (6 * s**2 - 6 * s) / h
        d10 = 3 * s**2 - 4 * s + 1
        d01 = (-6 * s**2 + 6 * s) / h
        d11 = 3 * s**2 - 2 * s
        return (d00 * self.values[i] + d10 * self.derivs[i]
                + d01 * self.values[i + 1] + d11 * self.derivs[i + 1])


def rk4_step(rhs, t: float, y: np.ndarray, h: float) -> np.ndarray:
    k1 = rhs(t, y)
    k2 = rhs(t + h / 2, y + (h / 2) * k1)
    k3 = rhs(t + h / 2, y + (h / 2) * k2)
    k4 = rhs(t + h, y + h * k3)
    return y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4_linear_step(x0, xm, x1, y, h):
    """RK4 step for ``y' = X(t) y`` given ``X`` at start, midpoint and end."""
    k1 = x0 @ y
    k2 = xm @ (y + (h / 2) * k1)
    k3 = xm @ (y + (h / 2) * k2)
    k4 = x1 @ (y + h * k3)
    return y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
