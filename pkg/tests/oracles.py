"""Independent reference values and random problem generators for the tests.

Closed forms here are written from the solutions of the model equations and
do not call the library's integrators or detectors.
"""

from __future__ import annotations

import numpy as np

from sympindex.distribution import Distribution
from sympindex.forms import Subspace, SymBilinearForm, inertia
from sympindex.lagrangian import PSPair
from sympindex.system import CoefficientField, Isomorphism, SymplecticProblem


def oscillator_psi(kappa: float, t: float) -> np.ndarray:
    """Fundamental matrix of ``v' = alpha``, ``alpha' = -kappa^2 v`` from 0."""
    c, s = np.cos(kappa * t), np.sin(kappa * t)
    return np.array([[c, s / kappa], [-kappa * s, c]])


def sine_zeros(kappa: float, b: float = 1.0, phase: float = 0.0) -> list[float]:
    """Zeros in ``]0, b]`` of ``sin(kappa t + phase)``."""
    out = []
    for j in range(0, 1000):
        t = (j * np.pi - phase) / kappa
        if t > b + 1e-12:
            break
        if t > 0:
            out.append(t)
    return out


def brute_force_negative_index(matrix: np.ndarray) -> int:
    """``n_-`` by counting sign changes of leading principal minors' ratios.

    Uses an LDL^T factorization without pivoting; only valid when every
    leading minor is nonzero, which holds for generic random matrices.
    """
    m = np.array(matrix, dtype=float)
    n = m.shape[0]
    neg = 0
    for k in range(n):
        pivot = m[k, k]
        if pivot < 0:
            neg += 1
        if k + 1 < n:
            col = m[k + 1:, k] / pivot
            m[k + 1:, k + 1:] -= np.outer(col, m[k, k + 1:])
    return neg


def _random_symmetric(rng, n, norm):
    m = rng.standard_normal((n, n))
    m = 0.5 * (m + m.T)
    return m * (norm / np.linalg.norm(m, 2))


def random_problem(rng, grid_steps=4096):
    """A random constant-coefficient problem with one negative direction of ``B``.

    ``B = U diag(lam) U^T`` with ``|lam|`` in ``[0.5, 3]`` and exactly one
    negative eigenvalue; ``C`` random symmetric of norm ``pi^2 s`` with ``s``
    in ``[0.2, 4]``; ``A`` small; ``P`` random of random dimension with a
    random ``S``.  The distribution is the span of the negative eigenvector.

    Returns
    -------
    tuple
        ``(problem, distribution)``.
    """
    n = int(rng.integers(1, 4))
    U, _ = np.linalg.qr(rng.standard_normal((n, n)))
    lam = rng.uniform(0.5, 3.0, n)
    lam[0] *= -1
    B = U @ np.diag(lam) @ U.T
    C = _random_symmetric(rng, n, np.pi**2 * rng.uniform(0.2, 4.0))
    A = rng.standard_normal((n, n)) * rng.uniform(0, 0.4)
    coeffs = CoefficientField.constant(A, B, C, (0.0, 1.0))
    m = int(rng.integers(0, n + 1))
    if m:
        Pf, _ = np.linalg.qr(rng.standard_normal((n, m)))
        P = Subspace(Pf)
        S = SymBilinearForm(_random_symmetric(rng, m, rng.uniform(0.1, 3.0)))
    else:
        P, S = Subspace.zero(n), SymBilinearForm.empty()
    D = Distribution.constant(U[:, :1])
    return SymplecticProblem(coeffs, PSPair(P, S), grid_steps), D


def acceptable(problem, D, margin=0.02, max_crossings=4) -> bool:
    """Filter draws: inputs must be generic enough for the comparison to be meaningful."""
    from sympindex.errors import SympIndexError
    from sympindex.forms import restrict
    from sympindex.maslov import focal_scan
    from sympindex.reduced import build_reduced, check_assumption

    _, Ba, _ = problem.coefficients(0.0)
    P = problem.ell0.P
    if P.dim:
        lam = np.linalg.eigvalsh(restrict(np.linalg.inv(Ba), P).entries)
        if np.abs(lam).min() < 0.05 * np.abs(lam).max():
            return False
    try:
        if D.k and not check_assumption(build_reduced(problem, D)).holds:
            return False
        scan = focal_scan(problem)
    except SympIndexError:
        return False
    ts = [c.t for c in scan.instants]
    if len(ts) > max_crossings or any(1.0 - t < margin for t in ts):
        return False
    if any(abs(s - t) < 0.01 for s, t in zip(ts, ts[1:])):
        return False
    return all(c.nondegenerate for c in scan.instants)


def random_problem_set(count=25, seed=20261014):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        p, D = random_problem(rng)
        if acceptable(p, D):
            out.append((p, D))
    return out


def trig_isomorphism(n, seed, degree=3, amplitude=0.15):
    """``Z = Z0 + sum_m (Z_m cos(m pi t) + Z'_m sin(m pi t))`` and a similar ``W``.

    ``Z0`` is a random well-conditioned matrix and the oscillating part is
    small, keeping the condition number of ``Z`` moderate.  Returns the
    isomorphism and ``Z''`` (needed to transport distributions).
    """
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    Z0 = Q @ np.diag(rng.uniform(0.7, 1.5, n))
    Zc = rng.standard_normal((2, degree, n, n)) * amplitude / degree
    Wc = rng.standard_normal((2, degree + 1, n, n))
    Wc = 0.5 * (Wc + np.swapaxes(Wc, -1, -2)) * 0.5 / (degree + 1)
    m = np.arange(1, degree + 1) * np.pi
    mw = np.arange(0, degree + 1) * np.pi

    def series(coef, freqs, t, order):
        c, s = np.cos(freqs * t), np.sin(freqs * t)
        if order == 0:
            fc, fs = c, s
        elif order == 1:
            fc, fs = -freqs * s, freqs * c
        else:
            fc, fs = -freqs**2 * c, -freqs**2 * s
        return np.tensordot(fc, coef[0], axes=1) + np.tensordot(fs, coef[1], axes=1)

    Z = lambda t: Z0 + series(Zc, m, t, 0)
    dZ = lambda t: series(Zc, m, t, 1)
    ddZ = lambda t: series(Zc, m, t, 2)
    W = lambda t: series(Wc, mw, t, 0)
    dW = lambda t: series(Wc, mw, t, 1)
    return Isomorphism(Z, W, dZ, dW), ddZ


def transport_distribution(D: Distribution, iso: Isomorphism, ddZ) -> Distribution:
    """Image ``Z Y`` of a distribution frame under the isomorphism."""
    def f(t):
        return iso.z(t) @ D(t)

    def d1(t):
        return iso.z_prime(t) @ D(t) + iso.z(t) @ D.derivative(t)

    def d2(t):
        return (ddZ(t) @ D(t) + 2 * iso.z_prime(t) @ D.derivative(t)
                + iso.z(t) @ D.second_derivative(t))

    return Distribution.from_callable(f, D.n, D.k, d1, d2)


def negative_index(M) -> int:
    return inertia(M).n_minus


def unitary_winding_index(path, start_time: float) -> int:
    """Signed passes of eigenvalues of ``W = U U^T`` through ``-1`` after ``start_time``.

    ``U = V + i Lambda`` for the orthonormal frame ``[V; Lambda]``; the
    vertical space has ``W = -I`` and an intersection of dimension ``m``
    is an eigenvalue ``-1`` of multiplicity ``m``.  The count is the
    unwrapped phase of ``det W`` minus the sum of principal eigenvalue
    angles, over ``2 pi``.  Independent of any crossing form.
    """
    n = path.n
    sel = path.times > start_time
    U = path.frames[sel, :n, :] + 1j * path.frames[sel, n:, :]
    W = U @ np.swapaxes(U, -1, -2)
    phase = np.unwrap(np.angle(np.linalg.det(W)))
    principal = np.angle(np.linalg.eigvals(W)).sum(axis=1)
    jumps = (phase[-1] - phase[0]) - (principal[-1] - principal[0])
    return int(round(-jumps / (2 * np.pi)))
