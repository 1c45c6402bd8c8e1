"""Distributions ``t -> D_t``: frames of maximal ``B^{-1}``-negative subspaces."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.interpolate

from ._numerics import central_difference
from .errors import InvalidDistribution
from .forms import inertia

_FD_FRACTION = 1e-3


@dataclass(frozen=True)
class Distribution:
    """A ``C^2`` frame ``t -> Y(t)`` of shape ``n x k``.

    Parameters
    ----------
    n, k : int
        Ambient dimension and rank.
    frame_fn : callable
        ``t -> Y(t)``.
    d1, d2 : callable, optional
        First and second derivatives; five-point central differences with
        ``fd_step`` otherwise.
    """

    n: int
    k: int
    frame_fn: Callable[[float], np.ndarray] = field(repr=False)
    d1: Callable[[float], np.ndarray] | None = field(default=None, repr=False)
    d2: Callable[[float], np.ndarray] | None = field(default=None, repr=False)
    kind: str = "callable"
    fd_step: float = 1e-3
    source: dict | None = field(default=None, repr=False, compare=False)

    @classmethod
    def constant(cls, Y):
        Y = np.asarray(Y, dtype=float)
        if Y.ndim == 1:
            Y = Y.reshape(-1, 1)
        z = np.zeros_like(Y)
        return cls(Y.shape[0], Y.shape[1], lambda t: Y, lambda t: z, lambda t: z, "constant",
                   source={"kind": "constant", "frame": Y.tolist()})

    @classmethod
    def interpolated(cls, times, frames):
        times = np.asarray(times, dtype=float)
        frames = np.asarray(frames, dtype=float)
        if frames.ndim != 3 or frames.shape[0] != times.size:
            raise InvalidDistribution("interpolated frames must have shape (len(times), n, k)")
        sp = scipy.interpolate.PchipInterpolator(times, frames, axis=0)
        s1, s2 = sp.derivative(1), sp.derivative(2)
        return cls(frames.shape[1], frames.shape[2], sp, s1, s2, "interpolated",
                   fd_step=_FD_FRACTION * (times[-1] - times[0]),
                   source={"kind": "interpolated", "times": times.tolist(),
                           "frame": frames.tolist()})

    @classmethod
    def from_callable(cls, frame_fn, n, k, d1=None, d2=None, fd_step=1e-3):
        return cls(n, k, frame_fn, d1, d2, "callable", fd_step)

    @classmethod
    def negative_eigenspace(cls, B):
        """Constant distribution spanned by the negative eigenvectors of ``B``."""
        lam, U = np.linalg.eigh(np.asarray(B, dtype=float))
        return cls.constant(U[:, lam < 0])

    def __call__(self, t: float) -> np.ndarray:
        return np.asarray(self.frame_fn(t), dtype=float).reshape(self.n, self.k)

    def derivative(self, t: float) -> np.ndarray:
        if self.d1 is not None:
            return np.asarray(self.d1(t), dtype=float).reshape(self.n, self.k)
        return central_difference(self, t, self.fd_step)

    def second_derivative(self, t: float) -> np.ndarray:
        if self.d2 is not None:
            return np.asarray(self.d2(t), dtype=float).reshape(self.n, self.k)
        return central_difference(self.derivative, t, self.fd_step)

    def scaled(self, M) -> "Distribution":
        """Frame ``Y(t) M(t)`` for a constant matrix or a callable ``M``."""
        fn = M if callable(M) else (lambda t, M=np.asarray(M, float): M)
        return Distribution.from_callable(lambda t: self(t) @ fn(t), self.n,
                                          np.atleast_2d(fn(0.0)).shape[1], fd_step=self.fd_step)

    def check(self, coefficients, times, sign: int = -1, tol: float = 1e-9) -> None:
        """Require ``Y^T B^{-1} Y`` definite of the given sign and maximal.

        ``sign=-1`` asks for negative definiteness with ``k = n_-(B)``;
        ``sign=+1`` asks for positive definiteness with ``k = n_+(B)``.

        Raises
        ------
        InvalidDistribution
        """
        if coefficients.n != self.n:
            raise InvalidDistribution(f"distribution lives in R^{self.n}, "
                                      f"coefficients in R^{coefficients.n}")
        for t in times:
            _, B, _ = coefficients(t)
            Y = self(t)
            inb = inertia(B, tol)
            target = inb.n_minus if sign < 0 else inb.n_plus
            if target != self.k:
                raise InvalidDistribution(
                    f"rank {self.k} is not maximal: B has {target} "
                    f"{'negative' if sign < 0 else 'positive'} directions at t={t:.6g}")
            if self.k == 0:
                continue
            G = Y.T @ np.linalg.solve(B, Y)
            ing = inertia(G, tol)
            good = ing.n_minus == self.k if sign < 0 else ing.n_plus == self.k
            if not good:
                raise InvalidDistribution(
                    f"B^-1 is not {'negative' if sign < 0 else 'positive'} definite on the "
                    f"distribution at t={t:.6g}")
