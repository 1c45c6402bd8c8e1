"""Symmetric bilinear forms, subspaces and inertia.

Forms and subspaces are plain dense matrices wrapped in small immutable
containers.  Every rank or sign decision goes through a relative tolerance:
a quantity counts as zero when it is below ``tol`` times the largest one of
its kind.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DegenerateRestriction, DimensionMismatch

DEFAULT_TOL = 1e-9
_SYMMETRY_TOL = 1e-12


def _as_matrix(a) -> np.ndarray:
    m = np.array(a, dtype=float)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    return m


@dataclass(frozen=True)
class SymBilinearForm:
    """Symmetric bilinear form on ``R^dim`` given by its Gram matrix."""

    entries: np.ndarray

    def __post_init__(self):
        m = _as_matrix(self.entries)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatch(f"form matrix must be square, got shape {m.shape}")
        m = 0.5 * (m + m.T)
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @classmethod
    def checked(cls, entries, name="form", tol=_SYMMETRY_TOL):
        """Build a form, refusing matrices that are not symmetric to ``tol``."""
        m = _as_matrix(entries)
        scale = max(np.abs(m).max(initial=0.0), 1.0)
        if m.ndim == 2 and m.shape[0] == m.shape[1]:
            if np.abs(m - m.T).max(initial=0.0) > tol * scale:
                raise ValueError(f"{name} symmetric: asymmetry exceeds tolerance")
        return cls(m)

    @classmethod
    def empty(cls):
        return cls(np.zeros((0, 0)))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __call__(self, v, w) -> float:
        return float(np.asarray(v) @ self.entries @ np.asarray(w))

    def __neg__(self):
        return SymBilinearForm(-self.entries)


@dataclass(frozen=True)
class Subspace:
    """Column span of ``frame`` inside ``R^ambient_dim``.

    The frame is kept as given (it need not be orthonormal) but it must have
    full column rank.
    """

    frame: np.ndarray
    tol: float = field(default=DEFAULT_TOL, compare=False)

    def __post_init__(self):
        f = np.array(self.frame, dtype=float)
        if f.ndim == 1:
            f = f.reshape(-1, 1)
        if f.ndim != 2:
            raise DimensionMismatch("subspace frame must be a matrix")
        if f.shape[1] > 0:
            s = np.linalg.svd(f, compute_uv=False)
            if s[-1] <= self.tol * s[0]:
                raise ValueError("subspace frame does not have full column rank")
        f.setflags(write=False)
        object.__setattr__(self, "frame", f)

    @classmethod
    def zero(cls, ambient_dim: int):
        return cls(np.zeros((ambient_dim, 0)))

    @classmethod
    def full(cls, ambient_dim: int):
        return cls(np.eye(ambient_dim))

    @classmethod
    def span(cls, vectors, ambient_dim=None, tol=DEFAULT_TOL):
        """Subspace spanned by possibly dependent columns, via SVD."""
        a = np.array(vectors, dtype=float)
        if a.ndim == 1:
            a = a.reshape(-1, 1)
        if ambient_dim is None:
            ambient_dim = a.shape[0]
        if a.size == 0:
            return cls.zero(ambient_dim)
        u, s, _ = np.linalg.svd(a, full_matrices=False)
        if s[0] == 0.0:
            return cls.zero(ambient_dim)
        r = int(np.sum(s > tol * s[0]))
        return cls(u[:, :r])

    @property
    def ambient_dim(self) -> int:
        return self.frame.shape[0]

    @property
    def dim(self) -> int:
        return self.frame.shape[1]

    def orthonormal(self) -> np.ndarray:
        if self.dim == 0:
            return self.frame.copy()
        q, _ = np.linalg.qr(self.frame)
        return q

    def contains(self, v, tol=1e-8) -> bool:
        v = np.asarray(v, dtype=float)
        nv = np.linalg.norm(v)
        if nv == 0.0:
            return True
        q = self.orthonormal()
        r = v - q @ (q.T @ v)
        return np.linalg.norm(r) <= tol * nv

    def equals(self, other: "Subspace", tol=1e-8) -> bool:
        if self.dim != other.dim or self.ambient_dim != other.ambient_dim:
            return False
        if self.dim == 0:
            return True
        q1, q2 = self.orthonormal(), other.orthonormal()
        # sines of the principal angles
        return np.linalg.norm(q2 - q1 @ (q1.T @ q2), 2) <= tol


@dataclass(frozen=True)
class Inertia:
    n_minus: int
    n_zero: int
    n_plus: int
    tol_used: float = field(default=DEFAULT_TOL, compare=False)

    @property
    def dim(self) -> int:
        return self.n_minus + self.n_zero + self.n_plus

    @property
    def signature(self) -> int:
        return self.n_plus - self.n_minus

    def as_tuple(self):
        return (self.n_minus, self.n_zero, self.n_plus)

    def __add__(self, other: "Inertia"):
        return Inertia(self.n_minus + other.n_minus, self.n_zero + other.n_zero,
                       self.n_plus + other.n_plus, max(self.tol_used, other.tol_used))


def _entries(M) -> np.ndarray:
    if isinstance(M, SymBilinearForm):
        return M.entries
    m = _as_matrix(M)
    return 0.5 * (m + m.T)


def _frame(W) -> np.ndarray:
    if isinstance(W, Subspace):
        return W.frame
    f = np.asarray(W, dtype=float)
    return f.reshape(-1, 1) if f.ndim == 1 else f


def eigenvalues(M) -> np.ndarray:
    m = _entries(M)
    if m.shape[0] == 0:
        return np.zeros(0)
    return scipy.linalg.eigh(m, eigvals_only=True)


def inertia(M, tol: float = DEFAULT_TOL, scale: float | None = None) -> Inertia:
    """Count negative, null and positive eigenvalues of a symmetric form.

    An eigenvalue is null when its modulus is at most ``tol`` times
    ``scale``; by default ``scale`` is the largest eigenvalue modulus, so
    the zero form has only null eigenvalues.  Pass an external ``scale``
    (for instance the norm of an ambient form) when small forms must be
    judged against something other than themselves.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    lam = eigenvalues(M)
    if lam.size == 0:
        return Inertia(0, 0, 0, tol)
    cut = tol * (np.abs(lam).max() if scale is None else scale)
    n_minus = int(np.sum(lam < -cut))
    n_plus = int(np.sum(lam > cut))
    return Inertia(n_minus, lam.size - n_minus - n_plus, n_plus, tol)


def restrict(M, W) -> SymBilinearForm:
    """Pull the form back to the frame coordinates of ``W``: ``F^T M F``."""
    m = _entries(M)
    f = _frame(W)
    if f.shape[0] != m.shape[0]:
        raise DimensionMismatch(
            f"subspace lives in R^{f.shape[0]} but the form acts on R^{m.shape[0]}")
    return SymBilinearForm(f.T @ m @ f)


def null_space(a: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal basis of ``ker a`` with a relative singular-value cut."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    ncols = a.shape[1]
    if a.shape[0] == 0:
        return np.eye(ncols)
    u, s, vt = np.linalg.svd(a, full_matrices=True)
    if s.size == 0 or s[0] == 0.0:
        return np.eye(ncols)
    rank = int(np.sum(s > tol * s[0]))
    return vt[rank:].T.copy()


def annihilator(P) -> Subspace:
    """Covectors vanishing on ``P``, identified with columns of ``R^n``."""
    f = _frame(P)
    n = f.shape[0]
    if f.shape[1] == 0:
        return Subspace.full(n)
    return Subspace(null_space(f.T))


def form_orthogonal_complement(G, S, tol: float = DEFAULT_TOL) -> Subspace:
    """``{v : G(v, s) = 0 for all s in S}``.

    Raises
    ------
    DegenerateRestriction
        If ``G`` restricted to ``S`` is degenerate, in which case the
        complement would intersect ``S``.
    """
    g = _entries(G)
    f = _frame(S)
    if f.shape[0] != g.shape[0]:
        raise DimensionMismatch("subspace and form dimensions differ")
    if f.shape[1] == 0:
        return Subspace.full(g.shape[0])
    inner = inertia(f.T @ g @ f, tol)
    if inner.n_zero > 0:
        raise DegenerateRestriction(
            f"form restricted to the subspace has {inner.n_zero} null direction(s)")
    return Subspace(null_space(f.T @ g, tol))
