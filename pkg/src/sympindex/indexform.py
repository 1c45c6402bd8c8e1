"""Piecewise-linear discretization of the index form and the index identity.

The index form of a problem with initial data ``(P, S)`` is

    I(v, w) = int B^{-1}(v' - A v, w' - A w) + C(v, w) dt - S(v(a), w(a))

on curves with ``v(a) in P`` and ``v(b) = 0``.  With endpoint data
``(Q, S_Q)`` the condition at ``b`` becomes ``v(b) in Q`` and the term
``+ S_Q(v(b), w(b))`` is added.

Degrees of freedom are ordered as: coordinates of ``v(a)`` in the frame of
``P``, then the nodal values at interior nodes (node-major), then the
coordinates of ``v(b)`` in the frame of ``Q``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distribution import Distribution
from .errors import DegenerateRestriction, DimensionMismatch, QNotContained, SympIndexError
from .forms import (DEFAULT_TOL, Inertia, Subspace, SymBilinearForm,
                    form_orthogonal_complement, inertia, restrict)

DEFAULT_MESH = 256
_GAUSS = (0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0))


@dataclass(frozen=True)
class Mesh:
    nodes: np.ndarray

    def __post_init__(self):
        x = np.array(self.nodes, dtype=float)
        if x.ndim != 1 or x.size < 3:
            raise ValueError("a mesh needs at least two elements")
        if np.any(np.diff(x) <= 0):
            raise ValueError("mesh nodes must be strictly increasing")
        x.setflags(write=False)
        object.__setattr__(self, "nodes", x)

    @classmethod
    def uniform(cls, a: float, b: float, N: int):
        return cls(np.linspace(a, b, int(N) + 1))

    @property
    def N(self) -> int:
        return self.nodes.size - 1

    def refined(self) -> "Mesh":
        mids = 0.5 * (self.nodes[1:] + self.nodes[:-1])
        return Mesh(np.sort(np.concatenate([self.nodes, mids])))


@dataclass(frozen=True)
class EndpointData:
    """Variable endpoint ``v(b) in Q`` with boundary form ``S_Q``."""

    Q: Subspace
    S_Q: SymBilinearForm

    def __post_init__(self):
        if not isinstance(self.Q, Subspace):
            object.__setattr__(self, "Q", Subspace(self.Q))
        if not isinstance(self.S_Q, SymBilinearForm):
            s = np.asarray(self.S_Q, dtype=float).reshape(self.Q.dim, self.Q.dim)
            object.__setattr__(self, "S_Q", SymBilinearForm(s))
        if self.S_Q.dim != self.Q.dim:
            raise DimensionMismatch("S_Q and Q dimensions differ")


@dataclass(frozen=True)
class DiscreteIndexForm:
    mesh: Mesh
    matrix: SymBilinearForm = field(repr=False)
    n: int
    dim_P: int
    dim_Q: int
    variable_endpoint: bool
    prolongation: np.ndarray = field(repr=False)

    @property
    def dof(self) -> int:
        return self.matrix.dim

    def interior_offset(self, j: int) -> int:
        """Index of the first coordinate of interior node ``j`` (1-based)."""
        return self.dim_P + (j - 1) * self.n

    def nodal_values(self, x) -> np.ndarray:
        """Values at all mesh nodes of the trial function with coordinates ``x``."""
        return (self.prolongation @ np.asarray(x, float)).reshape(self.mesh.N + 1, self.n)


def as_mesh(problem, mesh) -> Mesh:
    if isinstance(mesh, Mesh):
        return mesh
    a, b = problem.interval
    return Mesh.uniform(a, b, DEFAULT_MESH if mesh is None else int(mesh))


def _element_matrices(coeffs, nodes):
    """Stiffness blocks ``(E, 2n, 2n)`` by two-point Gauss quadrature."""
    n = coeffs.n
    h = np.diff(nodes)
    E = h.size
    eye = np.eye(n)
    ke = np.zeros((E, 2 * n, 2 * n))
    for s in _GAUSS:
        ts = nodes[:-1] + s * h
        ABC = [coeffs(t) for t in ts]
        A = np.array([m[0] for m in ABC])
        Binv = np.linalg.inv(np.array([m[1] for m in ABC]))
        C = np.array([m[2] for m in ABC])
        phi_l, phi_r = 1.0 - s, s
        # v' - A v on the element, as a map of the two nodal values
        G = np.concatenate([-eye / h[:, None, None] - phi_l * A,
                            eye / h[:, None, None] - phi_r * A], axis=2)
        Phi = np.concatenate([phi_l * eye, phi_r * eye], axis=1)
        w = 0.5 * h[:, None, None]
        ke += w * (np.einsum("eij,ejk,ekl->eil", G.transpose(0, 2, 1), Binv, G)
                   + np.einsum("ij,ejk,kl->eil", Phi.T, C, Phi))
    return ke


def assemble(problem, mesh=None, endpoint: EndpointData | None = None) -> DiscreteIndexForm:
    """Assemble the index form on continuous piecewise-linear curves."""
    mesh = as_mesh(problem, mesh)
    coeffs = problem.coefficients
    n, N = coeffs.n, mesh.N
    ke = _element_matrices(coeffs, mesh.nodes)
    full = np.zeros(((N + 1) * n, (N + 1) * n))
    for e in range(N):
        sl = slice(e * n, (e + 2) * n)
        full[sl, sl] += ke[e]
    FP = problem.ell0.P.frame
    dim_p = FP.shape[1]
    FQ = endpoint.Q.frame if endpoint is not None else np.zeros((n, 0))
    dim_q = FQ.shape[1]
    dof = dim_p + n * (N - 1) + dim_q
    T = np.zeros(((N + 1) * n, dof))
    T[:n, :dim_p] = FP
    T[n:N * n, dim_p:dim_p + n * (N - 1)] = np.eye(n * (N - 1))
    T[N * n:, dim_p + n * (N - 1):] = FQ
    M = T.T @ full @ T
    M[:dim_p, :dim_p] -= problem.ell0.S.entries
    if dim_q:
        M[dof - dim_q:, dof - dim_q:] += endpoint.S_Q.entries
    return DiscreteIndexForm(mesh, SymBilinearForm(M), n, dim_p, dim_q, endpoint is not None, T)


def build_S_subspace(form: DiscreteIndexForm, D: Distribution | None) -> Subspace:
    """Trial curves vanishing at both ends with nodal values in ``D``."""
    if D is None or D.k == 0:
        return Subspace.zero(form.dof)
    if D.n != form.n:
        raise DimensionMismatch("distribution and form dimensions differ")
    N, k = form.mesh.N, D.k
    F = np.zeros((form.dof, k * (N - 1)))
    for j in range(1, N):
        off = form.interior_offset(j)
        F[off:off + form.n, (j - 1) * k:j * k] = D(form.mesh.nodes[j])
    return Subspace(F)


def build_K_subspace(form: DiscreteIndexForm, S: Subspace, tol: float = DEFAULT_TOL) -> Subspace:
    """Form-orthogonal complement of ``S`` in the trial space.

    Raises
    ------
    DegenerateRestriction
        When the form is degenerate on ``S``: either the reduced system has
        focal instants or the mesh is too coarse.
    """
    try:
        return form_orthogonal_complement(form.matrix, S, tol)
    except DegenerateRestriction as exc:
        raise DegenerateRestriction(
            f"{exc}; the reduced system has focal instants or the mesh is too coarse") from exc


@dataclass(frozen=True)
class IndexOnK:
    inertia_K: Inertia
    inertia_full: Inertia
    inertia_S: Inertia
    cross_check: int
    intersection_trivial: bool
    dof: int
    dim_S: int
    dim_K: int

    @property
    def n_minus(self) -> int:
        return self.inertia_K.n_minus

    @property
    def additivity_holds(self) -> bool:
        total = self.inertia_K + self.inertia_S
        return total.as_tuple() == self.inertia_full.as_tuple()

    def as_dict(self) -> dict:
        return {"n_minus_K": self.inertia_K.n_minus, "inertia_K": self.inertia_K.as_tuple(),
                "n_minus_full": self.inertia_full.n_minus,
                "n_minus_S": self.inertia_S.n_minus, "cross_check": self.cross_check,
                "additivity_holds": self.additivity_holds,
                "intersection_trivial": self.intersection_trivial,
                "dof": self.dof, "dim_S": self.dim_S, "dim_K": self.dim_K}


def index_on_form(form: DiscreteIndexForm, D: Distribution | None,
                  tol: float = DEFAULT_TOL) -> IndexOnK:
    S = build_S_subspace(form, D)
    K = build_K_subspace(form, S, tol)
    G = form.matrix
    in_k = inertia(restrict(G, K), tol)
    in_full = inertia(G, tol)
    in_s = inertia(restrict(G, S), tol)
    if S.dim:
        joint = np.hstack([K.orthonormal(), S.orthonormal()])
        sv = np.linalg.svd(joint, compute_uv=False)
        trivial = joint.shape[1] == form.dof and sv[-1] > 1e-8
    else:
        trivial = True
    return IndexOnK(in_k, in_full, in_s, in_full.n_minus - in_s.n_minus, bool(trivial),
                    form.dof, S.dim, K.dim)


def index_on_K(problem, D: Distribution | None = None, mesh=None,
               endpoint: EndpointData | None = None, tol: float = DEFAULT_TOL) -> IndexOnK:
    """Inertia of the discrete index form on the complement of ``S``."""
    return index_on_form(assemble(problem, mesh, endpoint), D, tol)


def endpoint_form(problem, endpoint: EndpointData, Psi=None,
                  tol: float = 1e-8) -> SymBilinearForm:
    """``S_Q - S_b`` on ``Q``, with ``S_b(v(b), w(b)) = -alpha_v(b)(w(b))``.

    Raises
    ------
    QNotContained
        If some vector of ``Q`` is not the value at ``b`` of a solution
        starting in the initial Lagrangian.
    """
    from .lagrangian import frame_from_ps
    from .system import fundamental_matrix

    if endpoint.Q.dim == 0:
        return SymBilinearForm.empty()
    if Psi is None:
        Psi = fundamental_matrix(problem)
    n = problem.n
    Lb, _ = np.linalg.qr(Psi.values[-1] @ frame_from_ps(problem.ell0).frame)
    Vb, Lamb = Lb[:n], Lb[n:]
    Q = endpoint.Q.frame
    # the frame is orthonormal, so singular values of Vb are judged absolutely
    u, sv, wt = np.linalg.svd(Vb)
    r = int(np.sum(sv > tol))
    Xq = wt[:r].T @ ((u[:, :r].T @ Q) / sv[:r, None])
    res = np.linalg.norm(Vb @ Xq - Q) / max(np.linalg.norm(Q), 1.0)
    if res > tol:
        raise QNotContained(f"Q is not contained in the space of final values "
                            f"(residual {res:.3e})")
    Sb = -(Lamb @ Xq).T @ Q
    return SymBilinearForm(endpoint.S_Q.entries - 0.5 * (Sb + Sb.T))


VARIANTS = ("fixed", "variable", "opposite", "b_focal")


@dataclass
class VerificationReport:
    variant: str
    verdict: str
    lhs: int | None = None
    rhs: int | None = None
    terms: dict = field(default_factory=dict)
    lhs_refined: int | None = None
    mesh: int | None = None
    refined_mesh: int | None = None
    index: IndexOnK | None = None
    maslov: object = None
    assumption: object = None
    settings: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def equation(self) -> str:
        if self.lhs is None:
            return "n/a"
        parts = " + ".join(str(v) if v >= 0 else f"({v})" for v in self.terms.values())
        return f"{self.lhs} = {parts}"

    def as_dict(self) -> dict:
        return {
            "variant": self.variant, "verdict": self.verdict, "lhs": self.lhs, "rhs": self.rhs,
            "equation": self.equation, "terms": dict(self.terms),
            "lhs_refined": self.lhs_refined, "mesh": self.mesh,
            "refined_mesh": self.refined_mesh,
            "index": None if self.index is None else self.index.as_dict(),
            "maslov": None if self.maslov is None else self.maslov.as_dict(),
            "assumption": None if self.assumption is None else self.assumption.as_dict(),
            "settings": dict(self.settings), "notes": list(self.notes),
        }


def _default_distribution(problem, notes):
    _, Ba, _ = problem.coefficients(problem.interval[0])
    D = Distribution.negative_eigenspace(Ba)
    if D.k:
        notes.append("no distribution given; using the negative eigenspace of B(a)")
    return D


def verify_index_theorem(problem, D: Distribution | None = None, mesh=None,
                         variant: str = "fixed", endpoint: EndpointData | None = None,
                         refine: bool = True, perturb_magnitude: float | None = None,
                         seed: int = 0, tol: float = DEFAULT_TOL) -> VerificationReport:
    """Check ``n_-(I|K) = n_-(B(a)^{-1}|P) + i_maslov`` and its variants.

    Parameters
    ----------
    variant
        ``"fixed"`` (both ends fixed), ``"variable"`` (endpoint data,
        adds ``n_-`` of the endpoint form), ``"opposite"`` (co-index of the
        opposite problem) or ``"b_focal"`` (``b`` may be a focal instant).
    refine
        Also compute the left side on the refined mesh; disagreement makes
        the verdict ``"inconclusive"``.
    perturb_magnitude
        When given, degenerate crossings trigger perturbation retries.

    Returns
    -------
    VerificationReport
        Verdict is one of ``verified``, ``violated``, ``inconclusive`` or
        ``assumption_failed``.
    """
    from .lagrangian import evolve, vertical_intersection
    from .maslov import maslov_index, maslov_index_robust
    from .reduced import build_reduced, check_assumption
    from .system import fundamental_matrix, opposite as make_opposite

    variant = variant.replace("-", "_")
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if variant == "variable" and endpoint is None:
        raise ValueError("variable variant needs endpoint data")
    mesh = as_mesh(problem, mesh)
    rep = VerificationReport(variant, "inconclusive", mesh=mesh.N)
    rep.settings = {"mesh": mesh.N, "grid_steps": problem.grid_steps, "tol": tol,
                    "symp_tol": problem.symp_tol}
    if D is None:
        D = _default_distribution(problem, rep.notes)

    try:
        D.check(problem.coefficients, problem.times[:: max(1, problem.grid_steps // 256)])
        if D.k:
            rep.assumption = check_assumption(build_reduced(problem, D))
            if not rep.assumption.holds:
                rep.verdict = "assumption_failed"
                rep.notes.append("reduced system has focal instants at "
                                 + ", ".join(f"{t:.6g}" for t in rep.assumption.fails_at))
                return rep
    except SympIndexError as exc:
        rep.verdict = "assumption_failed"
        rep.notes.append(f"{type(exc).__name__}: {exc}")
        return rep

    target = make_opposite(problem) if variant == "opposite" else problem
    Psi = fundamental_matrix(target)
    path = evolve(target, Psi)
    if perturb_magnitude:
        rep.maslov, used = maslov_index_robust(target, perturb_magnitude, seed)
        if used is not target:
            rep.notes.append(f"Maslov index computed on a perturbed problem "
                             f"(magnitude {rep.maslov.perturbation:g})")
    else:
        rep.maslov = maslov_index(target, path)

    _, Ba, _ = target.coefficients(problem.interval[0])
    in_p = inertia(restrict(np.linalg.inv(Ba), target.ell0.P), tol)
    if rep.maslov.b_is_focal and variant != "b_focal":
        rep.verdict = "assumption_failed"
        rep.notes.append("t = b is a focal instant; use the b_focal variant")
        return rep

    endpoint_used = endpoint if variant == "variable" else None

    def lhs_of(m):
        idx = index_on_K(target, D, m, endpoint_used, tol)
        if not idx.intersection_trivial:
            rep.notes.append(f"discrete K and S intersect at mesh {m.N}")
        if not idx.additivity_holds:
            rep.notes.append(f"inertia additivity fails at mesh {m.N}")
        value = idx.inertia_K.n_plus if variant == "opposite" else idx.n_minus
        return value, idx

    try:
        rep.lhs, rep.index = lhs_of(mesh)
        if refine:
            rep.refined_mesh = 2 * mesh.N
            rep.lhs_refined, _ = lhs_of(mesh.refined())
    except DegenerateRestriction as exc:
        rep.verdict = "assumption_failed"
        rep.notes.append(str(exc))
        return rep

    if variant == "opposite":
        rep.terms = {"n_plus_Binv_P": in_p.n_plus, "minus_i_maslov": -rep.maslov.maslov_index}
    else:
        rep.terms = {"n_minus_Binv_P": in_p.n_minus}
        if variant == "variable":
            rep.terms["n_minus_endpoint_form"] = inertia(endpoint_form(target, endpoint, Psi),
                                                         tol).n_minus
        if variant == "b_focal":
            corr = 0
            if rep.maslov.b_is_focal:
                Vo = vertical_intersection(path.frames[-1], 1e-7)
                _, Bb, _ = target.coefficients(problem.interval[1])
                corr = inertia(restrict(Bb, Vo), tol).n_minus
            rep.terms["minus_n_minus_B_b"] = -corr
        rep.terms["i_maslov"] = rep.maslov.maslov_index
    rep.rhs = int(sum(rep.terms.values()))
    if refine and rep.lhs_refined != rep.lhs:
        rep.verdict = "inconclusive"
        rep.notes.append(f"left side changes under refinement: {rep.lhs} vs {rep.lhs_refined}")
    else:
        rep.verdict = "verified" if rep.lhs == rep.rhs else "violated"
    return rep
