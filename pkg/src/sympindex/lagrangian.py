"""Lagrangian subspaces of ``R^n + R^n*`` and their intersections with ``{0} + R^n*``.

Vectors of the 2n-dimensional space are stacked as ``(v, alpha)``.  The
vertical Lagrangian ``L0 = {0} + R^n*`` is the only reference subspace used.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._numerics import omega_matrix, positive_qr
from .errors import DimensionMismatch, EmptyIntersection
from .forms import DEFAULT_TOL, Subspace, SymBilinearForm, annihilator

ISOTROPY_TOL = 1e-10


@dataclass(frozen=True)
class PSPair:
    """Initial data ``{(v, alpha): v in P, alpha|_P + S v = 0}``.

    ``S`` is expressed in the coordinates of ``P.frame``.
    """

    P: Subspace
    S: SymBilinearForm

    def __post_init__(self):
        if not isinstance(self.P, Subspace):
            object.__setattr__(self, "P", Subspace(self.P))
        if not isinstance(self.S, SymBilinearForm):
            s = np.asarray(self.S, dtype=float)
            object.__setattr__(self, "S", SymBilinearForm(s.reshape(self.P.dim, self.P.dim)))
        if self.S.dim != self.P.dim:
            raise DimensionMismatch(f"S has dimension {self.S.dim} but P has dimension {self.P.dim}")

    @classmethod
    def vertical(cls, n: int):
        """``P = {0}``: the initial Lagrangian is ``L0`` itself."""
        return cls(Subspace.zero(n), SymBilinearForm.empty())

    @classmethod
    def full(cls, S):
        """``P = R^n`` with the given form ``S``."""
        s = np.atleast_2d(np.asarray(S, dtype=float))
        return cls(Subspace.full(s.shape[0]), SymBilinearForm(s))

    @property
    def n(self) -> int:
        return self.P.ambient_dim


def isotropy_residual(frame: np.ndarray) -> float:
    n = frame.shape[0] // 2
    q = positive_qr(frame)
    return float(np.abs(q.T @ omega_matrix(n) @ q).max(initial=0.0))


@dataclass(frozen=True)
class LagrangianFrame:
    """A ``2n x n`` frame of a Lagrangian subspace."""

    frame: np.ndarray
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        f = np.array(self.frame, dtype=float)
        if f.ndim != 2 or f.shape[0] != 2 * f.shape[1]:
            raise DimensionMismatch(f"Lagrangian frame must be 2n x n, got {f.shape}")
        if self.check:
            r = isotropy_residual(f)
            if r > ISOTROPY_TOL:
                raise ValueError(f"frame is not isotropic (residual {r:.3e})")
        f.setflags(write=False)
        object.__setattr__(self, "frame", f)

    @property
    def n(self) -> int:
        return self.frame.shape[1]

    @property
    def v_part(self) -> np.ndarray:
        return self.frame[: self.n]

    @property
    def alpha_part(self) -> np.ndarray:
        return self.frame[self.n:]

    def orthonormal(self) -> np.ndarray:
        return positive_qr(self.frame)

    def equals(self, other: "LagrangianFrame", tol=1e-8) -> bool:
        return Subspace(self.frame).equals(Subspace(other.frame), tol)


def frame_from_ps(ps: PSPair) -> LagrangianFrame:
    """Frame of the Lagrangian encoded by ``(P, S)``.

    The covector attached to a basis vector of ``P`` vanishes on the
    Euclidean orthogonal complement of ``P``; the annihilator of ``P``
    contributes the columns ``(0, beta)``.
    """
    n = ps.n
    F = ps.P.frame
    po = annihilator(ps.P).frame
    cols_p = np.zeros((2 * n, F.shape[1]))
    if F.shape[1]:
        cols_p[:n] = F
        cols_p[n:] = -F @ np.linalg.solve(F.T @ F, ps.S.entries)
    cols_o = np.vstack([np.zeros((n, po.shape[1])), po])
    return LagrangianFrame(np.hstack([cols_p, cols_o]))


def ps_from_frame(L, tol: float = DEFAULT_TOL) -> PSPair:
    """Recover ``(P, S)`` from a Lagrangian frame.

    ``P`` is the projection of the span on ``R^n``, returned with an
    orthonormal frame, and ``S(p, .) = -alpha|_P`` for ``(p, alpha)`` in the
    span.
    """
    f = L.frame if isinstance(L, LagrangianFrame) else np.asarray(L, dtype=float)
    n = f.shape[1]
    V, Lam = f[:n], f[n:]
    u, s, wt = np.linalg.svd(V)
    if s.size == 0 or s[0] == 0.0:
        return PSPair.vertical(n)
    r = int(np.sum(s > tol * max(s[0], np.linalg.norm(f, 2))))
    U = u[:, :r]
    alphas = Lam @ wt[:r].T / s[:r]
    S = -(alphas.T @ U)
    return PSPair(Subspace(U), SymBilinearForm(S))


@dataclass(frozen=True)
class LagrangianPath:
    """Orthonormal frames of ``l(t_i) = Psi(t_i) l0`` on the integration grid."""

    times: np.ndarray = field(repr=False)
    frames: np.ndarray = field(repr=False)
    fundamental: object = field(repr=False)
    max_isotropy_residual: float = 0.0

    @property
    def n(self) -> int:
        return self.frames.shape[2]

    def frame_at(self, t: float) -> np.ndarray:
        """Orthonormal frame at an arbitrary ``t``, one RK4 step from a node."""
        fm = self.fundamental
        i = fm.node_index(t)
        if t == self.times[i]:
            return self.frames[i]
        return positive_qr(fm.propagate(self.frames[i], i, t))


def evolve(problem, Psi=None) -> LagrangianPath:
    """Transport the initial Lagrangian along the fundamental matrix.

    Raises
    ------
    SympDrift
        If the evolved frames lose isotropy beyond ``problem.symp_tol``.
    """
    from .errors import SympDrift
    from .system import fundamental_matrix

    if Psi is None:
        Psi = fundamental_matrix(problem)
    f0 = frame_from_ps(problem.ell0).frame
    raw = Psi.values @ f0
    q, r = np.linalg.qr(raw)
    d = np.sign(np.diagonal(r, axis1=1, axis2=2))
    d[d == 0] = 1.0
    frames = q * d[:, None, :]
    n = problem.n
    j = omega_matrix(n)
    iso = np.abs(np.einsum("kai,ab,kbj->kij", frames, j, frames)).max()
    if iso > problem.symp_tol:
        raise SympDrift(f"evolved Lagrangian lost isotropy (residual {iso:.3e})")
    return LagrangianPath(Psi.times, frames, Psi, float(iso))


def _vertical_basis(frame: np.ndarray, tol: float):
    q = positive_qr(frame)
    n = q.shape[1]
    _, s, wt = np.linalg.svd(q[:n])
    small = s <= tol
    return q @ wt[small].T, s


def vertical_intersection(L, tol: float = DEFAULT_TOL) -> Subspace:
    """Covector parts of a basis of ``L`` intersected with ``{0} + R^n*``.

    A direction of the frame counts as vertical when the corresponding
    singular value of the (orthonormalized) position block is at most
    ``tol``.
    """
    f = L.frame if isinstance(L, LagrangianFrame) else np.asarray(L, dtype=float)
    w, _ = _vertical_basis(f, tol)
    n = f.shape[1]
    return Subspace(w[n:])


def crossing_form(problem, t: float, L, tol: float = DEFAULT_TOL) -> SymBilinearForm:
    """``omega(X(t) w, w')`` on a basis of ``L`` meets ``{0} + R^n*``.

    The basis is the one whose covector parts are returned by
    :func:`vertical_intersection`, so the result can be compared entrywise
    with ``B(t)`` restricted to that subspace.

    Raises
    ------
    EmptyIntersection
        If ``L`` is transverse to the vertical space.
    """
    coeffs = getattr(problem, "coefficients", problem)
    f = L.frame if isinstance(L, LagrangianFrame) else np.asarray(L, dtype=float)
    w, _ = _vertical_basis(f, tol)
    if w.shape[1] == 0:
        raise EmptyIntersection(f"no vertical directions at t={t:.6g}")
    X = coeffs.X(t)
    n = f.shape[1]
    return SymBilinearForm((X @ w).T @ omega_matrix(n) @ w)
