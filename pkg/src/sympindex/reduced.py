"""The reduced system attached to a distribution of ``B^{-1}``-negative spaces.

For a frame ``Y = (Y_1, ..., Y_k)`` of the distribution with covectors
``alpha_Y = B^{-1}(Y' - A Y)`` define the ``k x k`` matrices

    calB = Y^T B^{-1} Y,   calC = Y^T alpha_Y,
    calI = alpha_Y^T B alpha_Y + Y^T C Y,

and the symmetric and antisymmetric parts ``Cs``, ``Ca`` of ``calC``.  The
reduced system has coefficients

    A_red = -calB^{-1} Ca,  B_red = calB^{-1},
    C_red = calI - Cs' + Ca calB^{-1} Ca,

and its index form on curves ``f`` with ``f(a) = f(b) = 0`` is the index form
of the original problem on ``v = Y f``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distribution import Distribution
from .errors import FrameRankLoss, FramesSpanDiffer
from .forms import Subspace, inertia
from .lagrangian import PSPair
from .system import CoefficientField, SymplecticProblem

SUFFICIENT_TOL = 1e-8


@dataclass(frozen=True)
class ReducedSystem:
    k: int
    problem: SymplecticProblem = field(repr=False)
    distribution: Distribution = field(repr=False)
    parent: SymplecticProblem = field(repr=False)

    def blocks(self, t: float):
        """``(calB, calC, calI)`` at ``t``."""
        return _blocks(self.parent.coefficients, self.distribution, t)

    @property
    def coefficients(self) -> CoefficientField:
        return self.problem.coefficients

    def alternative(self) -> SymplecticProblem:
        """Isomorphic system ``(-calB^{-1} calC, calB^{-1}, calI - calC^T calB^{-1} calC)``."""
        def ev(t):
            bB, bC, bI = self.blocks(t)
            Bi = np.linalg.inv(bB)
            return -Bi @ bC, Bi, bI - bC.T @ Bi @ bC

        c = CoefficientField(self.k, self.parent.interval, ev, "builtin")
        return self.problem.replace(coefficients=c)


def _blocks(coeffs, D, t):
    A, B, C = coeffs(t)
    Y = D(t)
    dY = D.derivative(t)
    alpha = np.linalg.solve(B, dY - A @ Y)
    bB = Y.T @ np.linalg.solve(B, Y)
    bC = Y.T @ alpha
    bI = alpha.T @ B @ alpha + Y.T @ C @ Y
    return 0.5 * (bB + bB.T), bC, 0.5 * (bI + bI.T)


def build_reduced(problem: SymplecticProblem, D: Distribution,
                  rank_tol: float = 1e-9) -> ReducedSystem:
    """Reduced system of ``problem`` along ``D``.

    Raises
    ------
    FrameRankLoss
        If the frame loses rank at a grid node.
    """
    if D.k == 0:
        raise ValueError("the reduced system needs a distribution of positive rank")
    for t in problem.times[:: max(1, problem.grid_steps // 256)]:
        s = np.linalg.svd(D(t), compute_uv=False)
        if s[-1] <= rank_tol * max(s[0], 1.0):
            raise FrameRankLoss(f"distribution frame loses rank at t={t:.6g}")
    coeffs = problem.coefficients

    def ev(t):
        A, B, C = coeffs(t)
        dA, dB, _ = coeffs.derivative(t)
        Y, dY, ddY = D(t), D.derivative(t), D.second_derivative(t)
        r = dY - A @ Y
        alpha = np.linalg.solve(B, r)
        bB = Y.T @ np.linalg.solve(B, Y)
        bC = Y.T @ alpha
        bI = alpha.T @ B @ alpha + Y.T @ C @ Y
        # derivative of alpha from those of B, A and the frame
        d_alpha = np.linalg.solve(B, ddY - dA @ Y - A @ dY - dB @ alpha)
        d_bC = dY.T @ alpha + Y.T @ d_alpha
        Ca = 0.5 * (bC - bC.T)
        Bi = np.linalg.inv(0.5 * (bB + bB.T))
        return -Bi @ Ca, Bi, 0.5 * (bI + bI.T) - 0.5 * (d_bC + d_bC.T) + Ca @ Bi @ Ca

    red = CoefficientField(D.k, problem.interval, ev, "builtin")
    rp = SymplecticProblem(red, PSPair.vertical(D.k), problem.grid_steps,
                           problem.symp_tol, problem.tol)
    return ReducedSystem(D.k, rp, D, problem)


@dataclass(frozen=True)
class AssumptionVerdict:
    holds: bool
    fails_at: tuple[float, ...]
    sufficient_condition: bool
    sufficient_condition_alt: bool
    alternative_holds: bool | None = None

    def as_dict(self) -> dict:
        return {"holds": self.holds, "fails_at": list(self.fails_at),
                "sufficient_condition": self.sufficient_condition,
                "sufficient_condition_alt": self.sufficient_condition_alt,
                "alternative_holds": self.alternative_holds}


def _negative_semidefinite(M, scale) -> bool:
    return inertia(M, SUFFICIENT_TOL, scale=max(scale, 1.0)).n_plus == 0


def _focal_times(problem):
    from .maslov import focal_scan

    return tuple(c.t for c in focal_scan(problem, degenerate="flag").instants)


def check_assumption(reduced: ReducedSystem, alternative: bool = False) -> AssumptionVerdict:
    """Whether the reduced problem with ``f(a) = 0`` has no focal instants.

    Also scans two sufficient conditions node by node: ``C_red <= 0`` and
    ``calI - calC^T calB^{-1} calC <= 0``.  With ``alternative=True`` the
    alternative system is integrated as well.
    """
    fails = _focal_times(reduced.problem)
    suff = suff_alt = True
    for t in reduced.problem.times[:: max(1, reduced.problem.grid_steps // 512)]:
        bB, bC, bI = reduced.blocks(t)
        Bi = np.linalg.inv(bB)
        scale = max(np.linalg.norm(bI, 2), np.linalg.norm(bB, 2))
        if suff:
            _, _, Cred = reduced.coefficients(t)
            suff = _negative_semidefinite(Cred, scale)
        if suff_alt:
            suff_alt = _negative_semidefinite(bI - bC.T @ Bi @ bC, scale)
    alt = None
    if alternative:
        alt = not _focal_times(reduced.alternative())
    return AssumptionVerdict(not fails, fails, suff, suff_alt, alt)


def restriction_identity_check(problem: SymplecticProblem, D: Distribution, mesh=None) -> dict:
    """Compare the reduced index form with the full one on ``v = Y f``.

    Both forms are assembled on the same mesh; curves ``f`` are mapped by
    nodal evaluation ``v(t_j) = Y(t_j) f(t_j)``.

    Returns
    -------
    dict
        ``residual`` (max entry difference) and ``relative`` (divided by the
        largest entry of the reduced matrix).
    """
    from .indexform import as_mesh, assemble, build_S_subspace

    mesh = as_mesh(problem, mesh)
    red = build_reduced(problem, D)
    full = assemble(problem, mesh)
    S = build_S_subspace(full, D).frame
    lhs = S.T @ full.matrix.entries @ S
    rhs = assemble(red.problem, mesh).matrix.entries
    res = float(np.abs(lhs - rhs).max())
    return {"residual": res, "relative": res / float(np.abs(rhs).max()), "mesh": mesh.N}


@dataclass(frozen=True)
class IsomorphicVerdict:
    equal: bool
    instants: tuple
    instants_other: tuple
    max_time_difference: float


def frames_isomorphic_check(problem: SymplecticProblem, D: Distribution, D2: Distribution,
                            time_tol: float = 1e-8) -> IsomorphicVerdict:
    """Reduced systems for two frames of the same distribution share focal data.

    Raises
    ------
    FramesSpanDiffer
        If the frames span different subspaces at some grid node.
    """
    from .maslov import focal_scan

    if D.k != D2.k:
        raise FramesSpanDiffer("frames have different ranks")
    for t in problem.times[:: max(1, problem.grid_steps // 256)]:
        if not Subspace.span(D(t)).equals(Subspace.span(D2(t)), 1e-8):
            raise FramesSpanDiffer(f"frames span different subspaces at t={t:.6g}")
    f1 = focal_scan(build_reduced(problem, D).problem, degenerate="flag").instants
    f2 = focal_scan(build_reduced(problem, D2).problem, degenerate="flag").instants
    key = lambda c: (c.multiplicity, c.signature)
    equal = len(f1) == len(f2) and all(key(x) == key(y) for x, y in zip(f1, f2))
    dt = max((abs(x.t - y.t) for x, y in zip(f1, f2)), default=0.0)
    equal = equal and dt <= time_tol
    return IsomorphicVerdict(equal, f1, f2, float(dt))
