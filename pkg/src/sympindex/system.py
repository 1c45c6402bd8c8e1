"""Symplectic differential systems: coefficients, integration, transformations.

A system on ``[a, b]`` is ``v' = A v + B alpha``, ``alpha' = C v - A^T alpha``
with ``B`` and ``C`` symmetric and ``B`` invertible.  Its generator is the
``2n x 2n`` matrix ``X = [[A, B], [C, -A^T]]``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.interpolate
import scipy.optimize

from ._numerics import (HermiteCurve, central_difference, omega_matrix,
                        rk4_linear_step, rk4_step, table_derivative)
from .errors import (AssumptionViolation, ContinuationBreakdown, DimensionMismatch,
                     InvalidCoefficients, SingularIsomorphism, SympDrift)
from .forms import DEFAULT_TOL, annihilator, inertia, restrict
from .lagrangian import PSPair, frame_from_ps, ps_from_frame

Triple = tuple[np.ndarray, np.ndarray, np.ndarray]

DEFAULT_GRID_STEPS = 4096
DEFAULT_SYMP_TOL = 1e-6
_FD_FRACTION = 1e-3


def _sym(m):
    return 0.5 * (m + m.T)


@dataclass(frozen=True)
class CoefficientField:
    """The curve ``t -> (A(t), B(t), C(t))`` on ``interval``.

    Parameters
    ----------
    n : int
        Dimension of the configuration space.
    interval : tuple of float
        ``(a, b)`` with ``a < b``.
    evaluator : callable
        ``t -> (A, B, C)``.  ``B`` and ``C`` are symmetrized on evaluation;
        :func:`validate` inspects the raw output for asymmetry.
    kind : str
        ``"constant"``, ``"interpolated"`` or ``"builtin"``.
    derivative : callable, optional
        ``t -> (A', B', C')``.  When absent, five-point central differences
        are used.
    source : dict, optional
        Serializable description used when writing problem files.
    """

    n: int
    interval: tuple[float, float]
    evaluator: Callable[[float], Triple] = field(repr=False)
    kind: str = "builtin"
    derivative_fn: Callable[[float], Triple] | None = field(default=None, repr=False)
    source: dict | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        a, b = (float(x) for x in self.interval)
        if not a < b:
            raise InvalidCoefficients(f"interval must satisfy a < b, got {self.interval}")
        object.__setattr__(self, "interval", (a, b))
        if self.kind not in ("constant", "interpolated", "builtin"):
            raise InvalidCoefficients(f"unknown coefficient kind {self.kind!r}")

    # constructors -------------------------------------------------------

    @classmethod
    def constant(cls, A, B, C, interval=(0.0, 1.0)):
        A, B, C = (np.atleast_2d(np.asarray(m, dtype=float)) for m in (A, B, C))
        n = A.shape[0]
        for name, m in (("A", A), ("B", B), ("C", C)):
            if m.shape != (n, n):
                raise DimensionMismatch(f"{name} has shape {m.shape}, expected {(n, n)}")
        z = np.zeros((n, n))
        raw = (A.copy(), B.copy(), C.copy())
        return cls(n, interval, lambda t: raw, "constant", lambda t: (z, z, z),
                   {"kind": "constant", "A": A.tolist(), "B": B.tolist(), "C": C.tolist()})

    @classmethod
    def interpolated(cls, times, A, B, C):
        """Monotone cubic (PCHIP) interpolation of nodal samples."""
        times = np.asarray(times, dtype=float)
        A, B, C = (np.asarray(m, dtype=float) for m in (A, B, C))
        if times.ndim != 1 or times.size < 2 or np.any(np.diff(times) <= 0):
            raise InvalidCoefficients("sample times must be strictly increasing, at least two")
        n = A.shape[1]
        for name, m in (("A", A), ("B", B), ("C", C)):
            if m.shape != (times.size, n, n):
                raise DimensionMismatch(
                    f"{name} samples have shape {m.shape}, expected {(times.size, n, n)}")
        splines = [scipy.interpolate.PchipInterpolator(times, m, axis=0) for m in (A, B, C)]
        derivs = [s.derivative() for s in splines]

        def ev(t):
            return tuple(s(t) for s in splines)

        def dev(t):
            return tuple(d(t) for d in derivs)

        src = {"kind": "interpolated", "times": times.tolist(),
               "A": A.tolist(), "B": B.tolist(), "C": C.tolist()}
        return cls(n, (times[0], times[-1]), ev, "interpolated", dev, src)

    # evaluation ---------------------------------------------------------

    def raw(self, t: float) -> Triple:
        A, B, C = self.evaluator(t)
        return (np.asarray(A, dtype=float), np.asarray(B, dtype=float),
                np.asarray(C, dtype=float))

    def __call__(self, t: float) -> Triple:
        A, B, C = self.raw(t)
        return A, _sym(B), _sym(C)

    def X(self, t: float) -> np.ndarray:
        A, B, C = self(t)
        n = self.n
        x = np.empty((2 * n, 2 * n))
        x[:n, :n], x[:n, n:], x[n:, :n], x[n:, n:] = A, B, C, -A.T
        return x

    @property
    def fd_step(self) -> float:
        a, b = self.interval
        return _FD_FRACTION * (b - a)

    def derivative(self, t: float) -> Triple:
        """``(A'(t), B'(t), C'(t))``, analytic when available."""
        if self.derivative_fn is not None:
            dA, dB, dC = self.derivative_fn(t)
            return np.asarray(dA, float), _sym(np.asarray(dB, float)), _sym(np.asarray(dC, float))
        h = self.fd_step
        return tuple(central_difference(lambda s, i=i: self(s)[i], t, h) for i in range(3))

    def samples(self, times) -> dict:
        """Nodal samples in the interpolated-file layout."""
        vals = [self(t) for t in times]
        return {"kind": "interpolated", "times": [float(t) for t in times],
                "A": [v[0].tolist() for v in vals], "B": [v[1].tolist() for v in vals],
                "C": [v[2].tolist() for v in vals]}

    def restricted(self, a: float, b: float) -> "CoefficientField":
        """The same curve on a subinterval ``[a, b]`` of the interval."""
        lo, hi = self.interval
        if not lo <= a < b <= hi:
            raise InvalidCoefficients(f"[{a}, {b}] is not a subinterval of {self.interval}")
        src = self.source if self.kind == "constant" else None
        return dataclasses.replace(self, interval=(a, b), source=src)

    def mapped(self, fn, dfn=None, kind=None, source=None):
        """New field with ``fn(t, (A, B, C))`` as evaluator."""
        ev = lambda t: fn(t, self(t))
        dev = None if dfn is None else (lambda t: dfn(t, self(t), self.derivative(t)))
        return CoefficientField(self.n, self.interval, ev, kind or self.kind, dev, source)


@dataclass(frozen=True)
class Diagnostics:
    passed: bool
    max_asymmetry_B: float
    max_asymmetry_C: float
    min_normalized_sigma_B: float
    inertia_B: tuple[tuple[int, int, int], ...] = field(repr=False)
    constant_inertia: bool
    messages: tuple[str, ...] = ()


def grid(interval, steps: int) -> np.ndarray:
    a, b = interval
    return np.linspace(a, b, steps + 1)


def validate(coeffs: CoefficientField, grid_steps: int = DEFAULT_GRID_STEPS,
             tol: float = DEFAULT_TOL) -> Diagnostics:
    """Check symmetry, invertibility and constant inertia of ``B`` on the grid.

    Failures are reported in the returned diagnostics, never raised.
    """
    if grid_steps < 2:
        raise ValueError("grid_steps must be at least 2")
    asym_b = asym_c = 0.0
    min_sigma = np.inf
    inertias = []
    for t in grid(coeffs.interval, grid_steps):
        _, B, C = coeffs.raw(t)
        sb = max(np.abs(B).max(initial=0.0), 1.0)
        sc = max(np.abs(C).max(initial=0.0), 1.0)
        asym_b = max(asym_b, np.abs(B - B.T).max(initial=0.0) / sb)
        asym_c = max(asym_c, np.abs(C - C.T).max(initial=0.0) / sc)
        s = np.linalg.svd(_sym(B), compute_uv=False)
        min_sigma = min(min_sigma, s[-1] / s[0] if s[0] > 0 else 0.0)
        inertias.append(inertia(_sym(B), tol).as_tuple())
    msgs = []
    if asym_b > 1e-12:
        msgs.append(f"B symmetric: asymmetry {asym_b:.3e}")
    if asym_c > 1e-12:
        msgs.append(f"C symmetric: asymmetry {asym_c:.3e}")
    if min_sigma <= tol:
        msgs.append(f"B invertible: normalized smallest singular value {min_sigma:.3e}")
    constant = len(set(inertias)) == 1
    if not constant:
        msgs.append("B constant inertia: inertia of B changes along the grid")
    return Diagnostics(not msgs, asym_b, asym_c, min_sigma, tuple(inertias), constant,
                       tuple(msgs))


@dataclass(frozen=True)
class SymplecticProblem:
    """Coefficients together with the initial Lagrangian ``(P, S)``.

    The constructor enforces that ``B(a)`` restricted to the annihilator of
    ``P`` is nondegenerate (equivalently ``B(a)^{-1}`` is nondegenerate on
    ``P``).
    """

    coefficients: CoefficientField
    ell0: PSPair
    grid_steps: int = DEFAULT_GRID_STEPS
    symp_tol: float = DEFAULT_SYMP_TOL
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        if self.ell0.n != self.coefficients.n:
            raise DimensionMismatch(
                f"initial data live in R^{self.ell0.n}, coefficients in R^{self.coefficients.n}")
        if self.grid_steps < 2:
            raise ValueError("grid_steps must be at least 2")
        _, Ba, _ = self.coefficients(self.interval[0])
        po = annihilator(self.ell0.P)
        scale = np.linalg.norm(Ba, 2)
        if inertia(restrict(Ba, po), self.tol, scale=scale).n_zero > 0:
            raise AssumptionViolation("B(a) is degenerate on the annihilator of P")

    @property
    def n(self) -> int:
        return self.coefficients.n

    @property
    def interval(self) -> tuple[float, float]:
        return self.coefficients.interval

    @property
    def times(self) -> np.ndarray:
        return grid(self.interval, self.grid_steps)

    def restricted(self, b: float) -> "SymplecticProblem":
        """The problem on ``[a, b]`` with the same initial data."""
        return self.replace(coefficients=self.coefficients.restricted(self.interval[0], b))

    def replace(self, **kw) -> "SymplecticProblem":
        d = dict(coefficients=self.coefficients, ell0=self.ell0, grid_steps=self.grid_steps,
                 symp_tol=self.symp_tol, tol=self.tol)
        d.update(kw)
        return SymplecticProblem(**d)


def symplectic_residual(psi: np.ndarray):
    """``|Psi^T J Psi - J|`` relative to ``max(1, |Psi|^2)`` (spectral norms).

    Accepts a single matrix or a stack of matrices.
    """
    psi = np.asarray(psi, dtype=float)
    n = psi.shape[-1] // 2
    j = omega_matrix(n)
    dev = np.swapaxes(psi, -1, -2) @ j @ psi - j
    r = np.linalg.svd(dev, compute_uv=False)[..., 0]
    size = np.linalg.svd(psi, compute_uv=False)[..., 0]
    return r / np.maximum(1.0, size**2)


@dataclass(frozen=True)
class FundamentalMatrix:
    """Samples of ``Psi`` with ``Psi' = X Psi``, ``Psi(a) = I`` on a uniform grid."""

    times: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    residuals: np.ndarray = field(repr=False)
    coefficients: CoefficientField = field(repr=False)

    @property
    def max_residual(self) -> float:
        return float(self.residuals.max())

    @property
    def step(self) -> float:
        return float(self.times[1] - self.times[0])

    def node_index(self, t: float) -> int:
        i = int(np.floor((t - self.times[0]) / self.step + 1e-12))
        return min(max(i, 0), len(self.times) - 2)

    def propagate(self, y: np.ndarray, i: int, t: float) -> np.ndarray:
        """Advance ``y`` given at node ``i`` to time ``t`` with one RK4 step."""
        t0 = self.times[i]
        h = t - t0
        if h == 0.0:
            return y.copy()
        X = self.coefficients.X
        return rk4_linear_step(X(t0), X(t0 + h / 2), X(t), y, h)

    def __call__(self, t: float) -> np.ndarray:
        i = self.node_index(t)
        return self.propagate(self.values[i], i, t)


def fundamental_matrix(problem: SymplecticProblem, check: bool = True) -> FundamentalMatrix:
    """Integrate ``Psi`` by classical RK4 on ``problem.grid_steps`` steps.

    Raises
    ------
    SympDrift
        If the symplecticity residual exceeds ``problem.symp_tol`` at a node
        and ``check`` is true.
    """
    coeffs = problem.coefficients
    times = problem.times
    h = times[1] - times[0]
    n2 = 2 * problem.n
    xs = [coeffs.X(t) for t in times]
    psi = np.empty((len(times), n2, n2))
    psi[0] = np.eye(n2)
    for i in range(len(times) - 1):
        xm = coeffs.X(times[i] + h / 2)
        psi[i + 1] = rk4_linear_step(xs[i], xm, xs[i + 1], psi[i], h)
    res = symplectic_residual(psi)
    if check and res.max() > problem.symp_tol:
        k = int(np.argmax(res > problem.symp_tol))
        raise SympDrift(f"symplecticity residual {res[k]:.3e} at t={times[k]:.6g} exceeds "
                        f"{problem.symp_tol:g}; refine the integration grid")
    return FundamentalMatrix(times, psi, res, coeffs)


def alpha_from_v(coeffs: CoefficientField, t: float, v, v_prime) -> np.ndarray:
    """Covector ``B(t)^{-1} (v' - A(t) v)`` attached to a curve ``v``."""
    A, B, _ = coeffs(t)
    return np.linalg.solve(B, np.asarray(v_prime, float) - A @ np.asarray(v, float))


def opposite(problem: SymplecticProblem) -> SymplecticProblem:
    """Conjugate by ``(v, alpha) -> (v, -alpha)``: ``(A, -B, -C)`` and ``(P, -S)``."""
    c = problem.coefficients

    def ev(t, abc):
        A, B, C = abc
        return A, -B, -C

    def dev(t, abc, d):
        return d[0], -d[1], -d[2]

    src = None
    if c.source is not None:
        if c.source["kind"] == "constant":
            src = {k: (v if k in ("kind", "A") else (-np.asarray(v)).tolist())
                   for k, v in c.source.items()}
        elif c.source["kind"] == "interpolated":
            src = {k: (v if k in ("kind", "A", "times") else (-np.asarray(v)).tolist())
                   for k, v in c.source.items()}
    new = c.mapped(ev, dev, source=src)
    return problem.replace(coefficients=new, ell0=PSPair(problem.ell0.P, -problem.ell0.S))


@dataclass(frozen=True)
class Isomorphism:
    """Pair ``(Z, W)`` defining ``(v, alpha) -> (Z v, Z^{-T}(W v + alpha))``.

    ``dZ`` and ``dW`` default to five-point central differences with step
    ``fd_step``.
    """

    Z: Callable[[float], np.ndarray] = field(repr=False)
    W: Callable[[float], np.ndarray] = field(repr=False)
    dZ: Callable[[float], np.ndarray] | None = field(default=None, repr=False)
    dW: Callable[[float], np.ndarray] | None = field(default=None, repr=False)
    fd_step: float = 1e-4

    @classmethod
    def identity(cls, n: int):
        eye, z = np.eye(n), np.zeros((n, n))
        return cls(lambda t: eye, lambda t: z, lambda t: z, lambda t: z)

    def z(self, t):
        return np.atleast_2d(np.asarray(self.Z(t), dtype=float))

    def w(self, t):
        return _sym(np.atleast_2d(np.asarray(self.W(t), dtype=float)))

    def z_prime(self, t):
        if self.dZ is not None:
            return np.atleast_2d(np.asarray(self.dZ(t), dtype=float))
        return central_difference(self.z, t, self.fd_step)

    def w_prime(self, t):
        if self.dW is not None:
            return _sym(np.atleast_2d(np.asarray(self.dW(t), dtype=float)))
        return central_difference(self.w, t, self.fd_step)

    def matrix(self, t: float) -> np.ndarray:
        """The linear map ``[[Z, 0], [Z^{-T} W, Z^{-T}]]`` at ``t``."""
        Z, W = self.z(t), self.w(t)
        zit = np.linalg.inv(Z).T
        return np.block([[Z, np.zeros_like(Z)], [zit @ W, zit]])


def transform_initial(ell0: PSPair, iso: Isomorphism, a: float, tol=DEFAULT_TOL) -> PSPair:
    """Image of the initial Lagrangian under the isomorphism at ``a``."""
    frame = iso.matrix(a) @ frame_from_ps(ell0).frame
    return ps_from_frame(frame, tol)


def apply_isomorphism(problem: SymplecticProblem, iso: Isomorphism,
                      cond_limit: float = 1e12) -> SymplecticProblem:
    """Transport the problem through ``(Z, W)``.

    Raises
    ------
    SingularIsomorphism
        If ``Z`` is singular (condition number above ``cond_limit``) at a
        grid node.
    """
    for t in problem.times[:: max(1, problem.grid_steps // 256)]:
        if np.linalg.cond(iso.z(t)) > cond_limit:
            raise SingularIsomorphism(f"Z is singular at t={t:.6g}")

    def ev(t, abc):
        A, B, C = abc
        Z, W = iso.z(t), iso.w(t)
        Zi = np.linalg.inv(Z)
        At = (Z @ A - Z @ B @ W + iso.z_prime(t)) @ Zi
        Bt = Z @ B @ Z.T
        Ct = Zi.T @ (W @ A + C - W @ B @ W + A.T @ W + iso.w_prime(t)) @ Zi
        return At, Bt, Ct

    new = problem.coefficients.mapped(ev, None, kind="builtin")
    ell0 = transform_initial(problem.ell0, iso, problem.interval[0], problem.tol)
    return problem.replace(coefficients=new, ell0=ell0)


def congruence_frame(coeffs: CoefficientField, times, min_overlap: float = 0.5):
    """Frames ``E(t_i)`` with ``E^T B E = diag(-I_k, I_{n-k})`` along ``times``.

    Eigenvectors of ``B`` are matched to the previous node by maximal
    overlap (within the negative and positive blocks separately) and sign
    aligned, then rescaled by ``1 / sqrt(|lambda|)``.

    Raises
    ------
    ContinuationBreakdown
        If the inertia of ``B`` changes or no eigenvector has enough
        overlap with its predecessor.
    """
    frames = []
    prev = None
    k = None
    for t in times:
        _, B, _ = coeffs(t)
        lam, U = np.linalg.eigh(B)
        kt = int(np.sum(lam < 0))
        if k is None:
            k = kt
        elif kt != k:
            raise ContinuationBreakdown(f"inertia of B changes at t={t:.6g}")
        if np.any(lam == 0):
            raise ContinuationBreakdown(f"B singular at t={t:.6g}")
        if prev is not None:
            for block in (slice(0, k), slice(k, None)):
                ov = np.abs(prev[:, block].T @ U[:, block])
                if ov.size == 0:
                    continue
                rows, cols = scipy.optimize.linear_sum_assignment(-ov)
                if ov[rows, cols].min() < min_overlap:
                    raise ContinuationBreakdown(f"eigenvector continuation lost at t={t:.6g}")
                order = np.empty_like(cols)
                order[rows] = cols
                U[:, block] = U[:, block][:, order]
                lam[block] = lam[block][order]
            signs = np.sign(np.sum(prev * U, axis=0))
            signs[signs == 0] = 1.0
            U = U * signs
        prev = U
        frames.append(U / np.sqrt(np.abs(lam)))
    return np.array(frames)


def _tabulated(fn, times):
    """Cubic Hermite spline through samples of ``fn`` with table derivatives."""
    vals = np.array([fn(t) for t in times])
    spline = scipy.interpolate.CubicHermiteSpline(
        times, vals, table_derivative(vals, times[1] - times[0]), axis=0)
    return spline, spline.derivative()


def _ode_isomorphism(problem, zdot, z0, W, dW):
    """Integrate ``Z' = zdot(t, Z)`` with half of the problem grid step."""
    a, b = problem.interval
    fine = grid((a, b), 2 * problem.grid_steps)
    h = fine[1] - fine[0]
    zs = np.empty((len(fine),) + z0.shape)
    zs[0] = z0
    for i in range(len(fine) - 1):
        zs[i + 1] = rk4_step(zdot, fine[i], zs[i], h)
    dzs = np.array([zdot(t, z) for t, z in zip(fine, zs)])
    curve = HermiteCurve(fine, zs, dzs)
    return Isomorphism(curve, W, lambda t: zdot(t, curve(t)), dW,
                       fd_step=problem.coefficients.fd_step)


def to_morse_sturm(problem: SymplecticProblem, stage: str = "constant_B"):
    """Isomorphic problem with ``A = 0`` (and constant ``B`` for ``constant_B``).

    ``kill_A`` uses ``W = 0`` and ``Z' = -Z A`` with ``Z(a) = I``.
    ``constant_B`` uses ``W = B^{-1}(A B + B A^T - B') B^{-1} / 2`` and
    ``Z' = Z (B W - A)`` with ``Z(a) = E(a)^T``, ``E`` the congruence frame
    of ``B(a)``; then ``Z B Z^T`` stays equal to ``diag(-I_k, I_{n-k})``.
    ``W`` is tabulated on a grid four times finer than the problem grid and
    interpolated by cubic Hermite splines.

    Returns
    -------
    tuple
        ``(new_problem, isomorphism)``.
    """
    c = problem.coefficients
    n = c.n
    a, b = problem.interval
    if stage == "kill_A":
        zero = np.zeros((n, n))

        def zdot(t, Z):
            return -Z @ c(t)[0]

        iso = _ode_isomorphism(problem, zdot, np.eye(n), lambda t: zero, lambda t: zero)
    elif stage == "constant_B":
        def W_exact(t):
            A, B, _ = c(t)
            dB = c.derivative(t)[1]
            Bi = np.linalg.inv(B)
            return _sym(0.5 * Bi @ (A @ B + B @ A.T - dB) @ Bi)

        W, dW = _tabulated(W_exact, grid((a, b), 4 * problem.grid_steps))

        def zdot(t, Z):
            A, B, _ = c(t)
            return Z @ (B @ W(t) - A)

        E = congruence_frame(c, [a])[0]
        iso = _ode_isomorphism(problem, zdot, E.T.copy(), W, dW)
    else:
        raise ValueError(f"unknown stage {stage!r}; expected 'kill_A' or 'constant_B'")
    return apply_isomorphism(problem, iso), iso
