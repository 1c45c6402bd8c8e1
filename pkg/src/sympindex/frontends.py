"""Builders of symplectic problems: geodesics, Hamiltonians and a test catalog."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .distribution import Distribution
from .errors import (BlowUp, DegenerateMetricOnP, DegenerateVerticalHessian,
                     InvalidDistribution, UnknownName)
from .forms import Subspace, SymBilinearForm, inertia, restrict
from .indexform import EndpointData
from .lagrangian import PSPair
from .system import CoefficientField, SymplecticProblem

# geodesics ----------------------------------------------------------------


@dataclass(frozen=True)
class GeodesicData:
    """Metric and curvature operator ``R(t) = R(gamma', .)gamma'`` in a parallel frame.

    ``R`` may be a constant matrix or a callable; ``dR`` is its optional
    derivative.
    """

    g: np.ndarray
    R: object
    interval: tuple[float, float] = (0.0, 1.0)
    dR: Callable | None = field(default=None, repr=False)

    def __post_init__(self):
        g = np.atleast_2d(np.asarray(self.g, dtype=float))
        if np.abs(g - g.T).max() > 1e-12 * max(1.0, np.abs(g).max()):
            raise ValueError("g symmetric: metric matrix is not symmetric")
        if inertia(g).n_zero:
            raise ValueError("metric is degenerate")
        object.__setattr__(self, "g", g)

    @property
    def n(self) -> int:
        return self.g.shape[0]

    def curvature(self, t: float) -> np.ndarray:
        return np.atleast_2d(np.asarray(self.R(t) if callable(self.R) else self.R, float))


@dataclass(frozen=True)
class SubmanifoldData:
    """Tangent space ``P`` of the initial submanifold and its second fundamental form.

    ``SP`` is the form ``g(S^P v, w)`` in the coordinates of ``P.frame``.
    """

    P: Subspace
    SP: SymBilinearForm

    @classmethod
    def point(cls, n: int):
        return cls(Subspace.zero(n), SymBilinearForm.empty())


def geodesic_problem(gd: GeodesicData, sd: SubmanifoldData | None = None,
                     gamma_prime=None, grid_steps: int = 4096) -> SymplecticProblem:
    """Jacobi equation ``v'' = R v`` as ``A = 0``, ``B = g^{-1}``, ``C = g R``.

    Raises
    ------
    DegenerateMetricOnP
        If ``g`` restricted to ``P`` is degenerate.
    """
    n, g = gd.n, gd.g
    sd = sd or SubmanifoldData.point(n)
    for t in np.linspace(*gd.interval, 17):
        gR = g @ gd.curvature(t)
        if np.abs(gR - gR.T).max() > 1e-10 * max(1.0, np.abs(gR).max()):
            raise ValueError(f"g R is not symmetric at t={t:.6g}")
    if sd.P.dim and inertia(restrict(g, sd.P), 1e-9, scale=np.linalg.norm(g, 2)).n_zero:
        raise DegenerateMetricOnP("g is degenerate on the tangent space of the submanifold")
    if gamma_prime is not None and sd.P.dim:
        if np.abs(sd.P.frame.T @ g @ np.asarray(gamma_prime, float)).max() > 1e-9:
            raise ValueError("gamma'(a) is not orthogonal to P")
    ginv = np.linalg.inv(g)
    zero = np.zeros((n, n))

    def ev(t):
        return zero, ginv, g @ gd.curvature(t)

    dev = None
    if not callable(gd.R):
        dev = lambda t: (zero, zero, zero)
    elif gd.dR is not None:
        dev = lambda t: (zero, zero, g @ np.atleast_2d(gd.dR(t)))
    kind = "builtin" if callable(gd.R) else "constant"
    src = None if callable(gd.R) else {"kind": "constant", "A": zero.tolist(),
                                       "B": ginv.tolist(), "C": (g @ gd.curvature(0)).tolist()}
    coeffs = CoefficientField(n, gd.interval, ev, kind, dev, src)
    return SymplecticProblem(coeffs, PSPair(sd.P, sd.SP), grid_steps)


def timelike_distribution(gd: GeodesicData, gamma_prime) -> Distribution:
    """``D = span(gamma')`` along a timelike geodesic of a Lorentzian metric.

    The tangent is parallel, so the frame is constant; ``R gamma' = 0`` and
    ``g(gamma', gamma') < 0`` are checked.
    """
    u = np.asarray(gamma_prime, dtype=float).reshape(-1)
    if inertia(gd.g).n_minus != 1:
        raise InvalidDistribution("metric is not Lorentzian")
    if u @ gd.g @ u >= 0:
        raise InvalidDistribution("gamma' is not timelike")
    for t in np.linspace(*gd.interval, 17):
        if np.linalg.norm(gd.curvature(t) @ u) > 1e-9 * max(1.0, np.linalg.norm(u)):
            raise InvalidDistribution(f"R(t) gamma' does not vanish at t={t:.6g}")
    return Distribution.constant(u.reshape(-1, 1))


# Hamiltonians -------------------------------------------------------------


@dataclass(frozen=True)
class ChartHamiltonian:
    """Hamiltonian ``H(t, q, p)`` in a chart with optional derivative callbacks.

    Missing gradients fall back to central differences of ``H``; missing
    Hessian blocks fall back to central differences of the gradient (or
    second differences of ``H``), with step ``fd_step`` relative to the
    size of the point, and are symmetrized.

    ``d2qp(t, q, p)[i, j]`` is ``d^2 H / dq_i dp_j``.
    """

    n: int
    H: Callable | None = None
    dHdq: Callable | None = None
    dHdp: Callable | None = None
    d2q: Callable | None = None
    d2qp: Callable | None = None
    d2p: Callable | None = None
    time_dependent: bool = False
    fd_step: float = 1e-5

    def _h(self, x, t):
        if self.H is None:
            raise ValueError("this Hamiltonian has no value callback")
        n = self.n
        return float(self.H(t, x[:n], x[n:]))

    def _step(self, x):
        return self.fd_step * max(1.0, float(np.abs(x).max()))

    def gradient(self, t, q, p) -> np.ndarray:
        q, p = np.atleast_1d(np.asarray(q, float)), np.atleast_1d(np.asarray(p, float))
        if self.dHdq is not None and self.dHdp is not None:
            return np.concatenate([np.atleast_1d(self.dHdq(t, q, p)),
                                   np.atleast_1d(self.dHdp(t, q, p))]).astype(float)
        x = np.concatenate([q, p])
        h = self._step(x)
        g = np.empty(2 * self.n)
        for i in range(2 * self.n):
            e = np.zeros_like(x)
            e[i] = h
            g[i] = (self._h(x + e, t) - self._h(x - e, t)) / (2 * h)
        return g

    def hessian(self, t, q, p) -> np.ndarray:
        """Full ``2n x 2n`` Hessian in the ``(q, p)`` ordering."""
        q, p = np.atleast_1d(np.asarray(q, float)), np.atleast_1d(np.asarray(p, float))
        n = self.n
        if self.d2q is not None and self.d2qp is not None and self.d2p is not None:
            hq = np.atleast_2d(self.d2q(t, q, p))
            hqp = np.atleast_2d(self.d2qp(t, q, p))
            hp = np.atleast_2d(self.d2p(t, q, p))
            return np.block([[hq, hqp], [hqp.T, hp]]).astype(float)
        x = np.concatenate([q, p])
        h = self._step(x)
        hs = np.empty((2 * n, 2 * n))
        if self.dHdq is not None and self.dHdp is not None:
            for i in range(2 * n):
                e = np.zeros_like(x)
                e[i] = h
                hs[:, i] = (self.gradient(t, (x + e)[:n], (x + e)[n:])
                            - self.gradient(t, (x - e)[:n], (x - e)[n:])) / (2 * h)
        else:
            f0 = self._h(x, t)
            for i in range(2 * n):
                ei = np.zeros_like(x)
                ei[i] = h
                hs[i, i] = (self._h(x + ei, t) - 2 * f0 + self._h(x - ei, t)) / h**2
                for j in range(i):
                    ej = np.zeros_like(x)
                    ej[j] = h
                    hs[i, j] = hs[j, i] = (self._h(x + ei + ej, t) - self._h(x + ei - ej, t)
                                           - self._h(x - ei + ej, t)
                                           + self._h(x - ei - ej, t)) / (4 * h**2)
        return 0.5 * (hs + hs.T)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray = field(repr=False)
    q: np.ndarray = field(repr=False)
    p: np.ndarray = field(repr=False)
    energy_drift: float | None = None


def integrate_hamilton(h: ChartHamiltonian, q0, p0, interval, steps: int = 4096,
                       blowup: float = 1e12) -> Trajectory:
    """RK4 for ``q' = dH/dp``, ``p' = -dH/dq``.

    Raises
    ------
    BlowUp
        If the state norm exceeds ``blowup``.
    """
    n = h.n
    times = np.linspace(interval[0], interval[1], steps + 1)
    dt = times[1] - times[0]

    def rhs(t, y):
        g = h.gradient(t, y[:n], y[n:])
        return np.concatenate([g[n:], -g[:n]])

    y = np.concatenate([np.atleast_1d(q0), np.atleast_1d(p0)]).astype(float)
    ys = np.empty((steps + 1, 2 * n))
    ys[0] = y
    for i in range(steps):
        t = times[i]
        k1 = rhs(t, y)
        k2 = rhs(t + dt / 2, y + dt / 2 * k1)
        k3 = rhs(t + dt / 2, y + dt / 2 * k2)
        k4 = rhs(t + dt, y + dt * k3)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y)) or np.linalg.norm(y) > blowup:
            raise BlowUp(f"trajectory blew up near t={times[i + 1]:.6g}")
        ys[i + 1] = y
    drift = None
    if h.H is not None and not h.time_dependent:
        e = np.array([h._h(s, t) for s, t in zip(ys, times)])
        drift = float(np.abs(e - e[0]).max())
    return Trajectory(times, ys[:, :n], ys[:, n:], drift)


def linearize_hamiltonian(h: ChartHamiltonian, traj: Trajectory, ell0: PSPair,
                          grid_steps: int = 4096) -> SymplecticProblem:
    """Linearized Hamilton equations along ``traj`` as an interpolated problem.

    ``A = d^2H/dp dq``, ``B = d^2H/dp^2``, ``C = -d^2H/dq^2``.

    Raises
    ------
    DegenerateVerticalHessian
        If ``d^2H/dp^2`` is singular somewhere along the trajectory.
    """
    n = h.n
    As, Bs, Cs = [], [], []
    for t, q, p in zip(traj.times, traj.q, traj.p):
        hs = h.hessian(t, q, p)
        Bp = hs[n:, n:]
        s = np.linalg.svd(Bp, compute_uv=False)
        if s[-1] <= 1e-9 * max(s[0], 1e-300):
            raise DegenerateVerticalHessian(f"d2H/dp2 is singular at t={t:.6g}")
        As.append(hs[n:, :n])
        Bs.append(Bp)
        Cs.append(-hs[:n, :n])
    coeffs = CoefficientField.interpolated(traj.times, As, Bs, Cs)
    return SymplecticProblem(coeffs, ell0, grid_steps)


# builtin coefficient families -----------------------------------------------


def _rot(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def _family_diagonal(params, interval):
    b = np.asarray(params["b_diag"], dtype=float)
    c = np.asarray(params["c_diag"], dtype=float)
    A = np.asarray(params.get("A", np.zeros((b.size, b.size))), dtype=float)
    return CoefficientField.constant(A, np.diag(b), np.diag(c), interval)


def _family_flat(params, interval):
    n = int(params.get("n", 2))
    z = np.zeros((n, n))
    return CoefficientField.constant(z, np.eye(n), z, interval)


def _family_oscillator(params, interval):
    k = float(params.get("kappa", 1.5 * np.pi))
    return CoefficientField.constant([[0.0]], [[1.0]], [[-k * k]], interval)


def _family_twisted(params, interval):
    """Two-dimensional system with ``A != 0`` and a rotating indefinite ``B``.

    ``B(t) = R(w t) diag(-(1 + t/2), 1 + t^2/4) R(w t)^T``,
    ``A(t) = rho [[0, 1], [-1, 0]] + sigma t I`` and
    ``C(t) = -kappa^2 R(w t) diag(0, 1) R(w t)^T``.
    """
    w = float(params.get("omega", 0.7))
    rho = float(params.get("rho", 0.4))
    sigma = float(params.get("sigma", 0.3))
    kappa = float(params.get("kappa", 1.5 * np.pi))
    J = np.array([[0.0, 1.0], [-1.0, 0.0]])

    def ev(t):
        R = _rot(w * t)
        A = rho * J + sigma * t * np.eye(2)
        B = R @ np.diag([-(1 + t / 2), 1 + t * t / 4]) @ R.T
        C = -kappa**2 * R @ np.diag([0.0, 1.0]) @ R.T
        return A, B, C

    def dev(t):
        R = _rot(w * t)
        dR = w * np.array([[-np.sin(w * t), -np.cos(w * t)], [np.cos(w * t), -np.sin(w * t)]])
        Dg = np.diag([-(1 + t / 2), 1 + t * t / 4])
        dDg = np.diag([-0.5, t / 2])
        dB = dR @ Dg @ R.T + R @ dDg @ R.T + R @ Dg @ dR.T
        E = np.diag([0.0, 1.0])
        dC = -kappa**2 * (dR @ E @ R.T + R @ E @ dR.T)
        return sigma * np.eye(2), dB, dC

    return CoefficientField(2, interval, ev, "builtin", dev,
                            {"kind": "builtin", "name": "twisted", "params": dict(params)})


BUILTIN_FAMILIES = {
    "diagonal": _family_diagonal,
    "flat": _family_flat,
    "oscillator": _family_oscillator,
    "twisted": _family_twisted,
}


def builtin_coefficients(name: str, params: dict | None = None,
                         interval=(0.0, 1.0)) -> CoefficientField:
    """Named parametric coefficient family."""
    try:
        fam = BUILTIN_FAMILIES[name]
    except KeyError:
        raise UnknownName(f"unknown builtin family {name!r}; known: "
                          f"{', '.join(sorted(BUILTIN_FAMILIES))}") from None
    c = fam(dict(params or {}), interval)
    if c.kind != "builtin" or c.source is None or c.source.get("kind") != "builtin":
        c = CoefficientField(c.n, c.interval, c.evaluator, "builtin", c.derivative_fn,
                             {"kind": "builtin", "name": name, "params": dict(params or {})})
    return c


# catalog ------------------------------------------------------------------


@dataclass(frozen=True)
class CatalogEntry:
    """A problem with closed-form expectations.

    ``expected`` holds ``focal_instants`` (list of ``(t, multiplicity,
    signature)``), ``i_maslov``, ``n_minus_K`` and, when relevant,
    ``n_minus_Binv_P`` and ``n_minus_endpoint_form``.
    """

    name: str
    problem: SymplecticProblem
    expected: dict
    distribution: Distribution | None = None
    endpoint: EndpointData | None = None


def _oscillator_zeros(kappa, shift=0.0, b=1.0):
    """Zeros in ``]0, b]`` of ``sin(kappa t + shift)``."""
    out = []
    j = 1 if shift == 0.0 else 0
    while True:
        t = (j * np.pi - shift) / kappa
        if t > b + 1e-12:
            return out
        if t > 0:
            out.append(t)
        j += 1


def _oracle_a(kappa=1.5 * np.pi):
    p = SymplecticProblem(_family_oscillator({"kappa": kappa}, (0.0, 1.0)), PSPair.vertical(1))
    zeros = _oscillator_zeros(kappa)
    return p, {"focal_instants": [(t, 1, 1) for t in zeros], "i_maslov": len(zeros),
               "n_minus_Binv_P": 0, "n_minus_K": len(zeros)}, None, None


def _oracle_b(n=2):
    p = SymplecticProblem(_family_flat({"n": n}, (0.0, 1.0)), PSPair.vertical(int(n)))
    return p, {"focal_instants": [], "i_maslov": 0, "n_minus_Binv_P": 0, "n_minus_K": 0}, \
        None, None


def _oracle_c(kappa=1.5 * np.pi):
    c = CoefficientField.constant(np.zeros((2, 2)), np.diag([-1.0, 1.0]),
                                  np.diag([0.0, -kappa**2]))
    zeros = _oscillator_zeros(kappa)
    return SymplecticProblem(c, PSPair.vertical(2)), \
        {"focal_instants": [(t, 1, 1) for t in zeros], "i_maslov": len(zeros),
         "n_minus_Binv_P": 0, "n_minus_K": len(zeros)}, \
        Distribution.constant([[1.0], [0.0]]), None


def _oracle_c_free(kappa=1.25 * np.pi):
    c = CoefficientField.constant(np.zeros((2, 2)), np.diag([-1.0, 1.0]),
                                  np.diag([0.0, -kappa**2]))
    # v_1 is constant and v_2 = cos(kappa t) for the solutions leaving P = R^2
    zeros = _oscillator_zeros(kappa, shift=np.pi / 2)
    return SymplecticProblem(c, PSPair.full(np.zeros((2, 2)))), \
        {"focal_instants": [(t, 1, 1) for t in zeros], "i_maslov": len(zeros),
         "n_minus_Binv_P": 1, "n_minus_K": 1 + len(zeros)}, \
        Distribution.constant([[1.0], [0.0]]), None


def _oracle_d(s=2.0):
    p = SymplecticProblem(CoefficientField.constant([[0.0]], [[1.0]], [[0.0]]),
                          PSPair.full([[s]]))
    # solutions are v = 1 - s t
    zeros = [1.0 / s] if s > 0 and 1.0 / s <= 1.0 else []
    return p, {"focal_instants": [(t, 1, 1) for t in zeros], "i_maslov": len(zeros),
               "n_minus_Binv_P": 0, "n_minus_K": len(zeros)}, None, None


def _oracle_e(q=-0.5):
    p = SymplecticProblem(CoefficientField.constant([[0.0]], [[1.0]], [[0.0]]),
                          PSPair.full([[0.0]]))
    e = EndpointData(Subspace.full(1), SymBilinearForm([[q]]))
    nq = 1 if q < 0 else 0
    return p, {"focal_instants": [], "i_maslov": 0, "n_minus_Binv_P": 0,
               "n_minus_endpoint_form": nq, "n_minus_K": nq}, None, e


def _oracle_f(kappa=3.5 * np.pi):
    return _oracle_a(kappa)


CATALOG = {
    "oracle_a": _oracle_a,
    "oracle_b": _oracle_b,
    "oracle_c": _oracle_c,
    "oracle_c_free": _oracle_c_free,
    "oracle_d": _oracle_d,
    "oracle_e": _oracle_e,
    "oracle_f": _oracle_f,
}


def catalog(name: str, **params) -> CatalogEntry:
    """Catalog problem by name, with its closed-form expectations.

    Raises
    ------
    UnknownName
    """
    try:
        build = CATALOG[name]
    except KeyError:
        raise UnknownName(f"unknown catalog entry {name!r}; known: "
                          f"{', '.join(sorted(CATALOG))}") from None
    problem, expected, D, endpoint = build(**params)
    return CatalogEntry(name, problem, expected, D, endpoint)
