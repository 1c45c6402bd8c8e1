"""Focal instants, focal index and Maslov index of a symplectic problem.

Focal instants are the times where the evolved Lagrangian meets the vertical
space.  On the grid they are located through two continuous functions of an
orientation-preserving orthonormal frame ``[V; Lambda]`` of ``l(t)``:

* ``det V`` changes sign across intersections of odd dimension,
* the smallest singular value of ``V`` vanishes at every intersection.

Sign changes are bracketed and refined with Brent's method; intersections
without a sign change are found as local minima of the singular value.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .errors import AccumulationSuspected, DegenerateCrossing, StillDegenerate
from .forms import inertia, restrict
from ._numerics import omega_matrix
from .lagrangian import _vertical_basis, evolve

CROSSING_TOL = 1e-7
GAP_THRESHOLD = 1e-6
ROOT_XTOL = 1e-12
DIP_CANDIDATE = 0.1
DEGENERACY_TOL = 1e-6
MERGE_TOL = 1e-6


@dataclass(frozen=True)
class FocalInstant:
    t: float
    multiplicity: int
    signature: int
    nondegenerate: bool
    tangential: bool = False
    crossing_signature: int | None = None

    def __post_init__(self):
        if self.multiplicity < 1:
            raise ValueError("multiplicity must be positive")
        if abs(self.signature) > self.multiplicity:
            raise ValueError("|signature| exceeds multiplicity")


@dataclass(frozen=True)
class MaslovReport:
    crossings: tuple[FocalInstant, ...]
    focal_index: int
    maslov_index: int
    initial_gap: float
    b_is_focal: bool
    b_instant: FocalInstant | None = None
    perturbation: float = 0.0

    def as_dict(self) -> dict:
        return {
            "crossings": [_instant_dict(c) for c in self.crossings],
            "focal_index": self.focal_index,
            "maslov_index": self.maslov_index,
            "initial_gap": self.initial_gap,
            "b_is_focal": self.b_is_focal,
            "perturbation": self.perturbation,
        }


def _instant_dict(c: FocalInstant) -> dict:
    return {"t": c.t, "multiplicity": c.multiplicity, "signature": c.signature,
            "nondegenerate": c.nondegenerate, "tangential": c.tangential}


@dataclass(frozen=True)
class FocalScan:
    """Raw result of the detector: instants in ``]a + eps, b]`` and ``eps``."""

    instants: tuple[FocalInstant, ...]
    initial_gap: float
    b_instant: FocalInstant | None
    grid_det: np.ndarray = field(repr=False)
    grid_sigma: np.ndarray = field(repr=False)


def _profile(frame: np.ndarray):
    n = frame.shape[1]
    v = frame[:n]
    return np.linalg.det(v), np.linalg.svd(v, compute_uv=False)[-1]


def classify(problem, t: float, frame: np.ndarray, tol: float = CROSSING_TOL,
             degenerate: str = "raise", tangential: bool = False) -> FocalInstant:
    """Multiplicity and signature of the intersection at ``t``.

    The signature is that of ``B(t)`` on the vertical covectors; the
    crossing form is computed too and must agree.
    """
    w, s = _vertical_basis(frame, tol)
    n = frame.shape[1]
    if w.shape[1] == 0:
        # the detector located a root, so keep at least the smallest direction
        w, _ = _vertical_basis(frame, s[-1] * (1 + 1e-12))
    _, B, _ = problem.coefficients(t)
    scale = np.linalg.norm(B, 2)
    inr = inertia(restrict(B, w[n:]), DEGENERACY_TOL, scale=scale)
    X = problem.coefficients.X(t)
    cf = inertia((X @ w).T @ omega_matrix(n) @ w, DEGENERACY_TOL, scale=scale)
    nondeg = inr.n_zero == 0
    if not nondeg and degenerate == "raise":
        raise DegenerateCrossing(f"degenerate crossing at t={t:.12g}", t=t)
    return FocalInstant(float(t), int(w.shape[1]), inr.signature, nondeg, tangential,
                        cf.signature)


def focal_scan(problem, path=None, *, crossing_tol: float = CROSSING_TOL,
               degenerate: str = "raise", max_fraction: float = 0.125) -> FocalScan:
    """Locate and classify focal instants in ``]a + eps, b]``.

    Parameters
    ----------
    crossing_tol
        A refined candidate is accepted when the smallest singular value of
        the position block is below this value.
    degenerate
        ``"raise"`` raises :class:`DegenerateCrossing` on singular crossing
        forms, ``"flag"`` records them with ``nondegenerate=False``.
    max_fraction
        More candidates than this fraction of the grid raise
        :class:`AccumulationSuspected`.
    """
    if path is None:
        path = evolve(problem)
    times, frames = path.times, path.frames
    n = path.n
    a, b = times[0], times[-1]
    L = b - a
    v = frames[:, :n, :]
    dets = np.linalg.det(v)
    sig = np.linalg.svd(v, compute_uv=False)[:, -1]
    N = len(times) - 1

    above = np.nonzero(sig[1:] > GAP_THRESHOLD)[0]
    j0 = int(above[0]) + 1 if above.size else N
    eps = times[j0] - a

    def det_at(t):
        return _profile(path.frame_at(t))[0]

    def sig_at(t):
        return _profile(path.frame_at(t))[1]

    roots = []  # (t, tangential)
    brackets = []
    for i in range(j0, N):
        if dets[i] == 0.0:
            brackets.append((i, i))
        elif np.sign(dets[i]) != np.sign(dets[i + 1]) and dets[i + 1] != 0.0:
            brackets.append((i, i + 1))
    if dets[N] == 0.0 and sig[N] <= crossing_tol:
        brackets.append((N, N))
    dips = []
    covered = set()
    for i, j in brackets:
        covered.update((i, j))
    for i in range(max(j0, 1), N):
        if sig[i] <= sig[i - 1] and sig[i] <= sig[i + 1] and sig[i] < DIP_CANDIDATE:
            if not ({i - 1, i, i + 1} & covered):
                dips.append(i)
    if sig[N] < sig[N - 1] and sig[N] < DIP_CANDIDATE and N not in covered:
        dips.append(N)
    if len(brackets) + len(dips) > max(4, int(max_fraction * N)):
        raise AccumulationSuspected(
            f"{len(brackets) + len(dips)} candidate focal instants on {N} grid steps")

    for i, j in brackets:
        if i == j:
            roots.append((times[i], False))
        else:
            t = scipy.optimize.brentq(det_at, times[i], times[j], xtol=ROOT_XTOL * L,
                                      rtol=4 * np.finfo(float).eps)
            roots.append((t, False))
    for i in dips:
        if i == N:
            t = b
        else:
            # golden section copes with the V-shaped minimum of the singular value
            lo, mid, hi = times[i - 1], times[i], times[i + 1]
            if sig_at(mid) < min(sig_at(lo), sig_at(hi)):
                res = scipy.optimize.minimize_scalar(
                    sig_at, bracket=(lo, mid, hi), method="golden",
                    options={"xtol": ROOT_XTOL})
                t = float(res.x)
            else:
                t = mid
        if sig_at(t) < crossing_tol:
            roots.append((t, True))

    roots = _merge(sorted(roots), MERGE_TOL * L, sig_at)
    instants = []
    b_instant = None
    for t, tang in roots:
        if t <= a + eps:
            continue
        if b - t <= 1e-9 * L:
            t = b
        inst = classify(problem, t, path.frame_at(t), crossing_tol, degenerate, tang)
        if t == b:
            b_instant = inst
        instants.append(inst)
    if b_instant is None and sig[N] < crossing_tol:
        b_instant = classify(problem, b, frames[N], crossing_tol, degenerate, True)
        instants.append(b_instant)
    return FocalScan(tuple(instants), float(eps), b_instant, dets, sig)


def _merge(roots, gap, sig_at):
    """Collapse candidates closer than ``gap``, keeping the smallest singular value."""
    out = []
    for t, tang in roots:
        if out and t - out[-1][0] < gap:
            if sig_at(t) < sig_at(out[-1][0]):
                out[-1] = (t, tang and out[-1][1])
            continue
        out.append((t, tang))
    return out


def find_focal_instants(problem, path=None, **kw) -> tuple[FocalInstant, ...]:
    """Sorted focal instants in ``]a + eps, b]``; see :func:`focal_scan`."""
    return focal_scan(problem, path, **kw).instants


def report_from_scan(scan: FocalScan, perturbation: float = 0.0) -> MaslovReport:
    b_focal = scan.b_instant is not None
    focal = sum(c.signature for c in scan.instants)
    interior = sum(c.signature for c in scan.instants if c is not scan.b_instant)
    return MaslovReport(scan.instants, int(focal), int(interior), scan.initial_gap, b_focal,
                        scan.b_instant, perturbation)


def maslov_index(problem, path=None, **kw) -> MaslovReport:
    """Maslov index (crossings in ``]a + eps, b[``) and focal index (``]a, b]``).

    Raises
    ------
    DegenerateCrossing
        When a crossing form is singular; see :func:`maslov_index_robust`.
    """
    return report_from_scan(focal_scan(problem, path, **kw))


def _trig_perturbation(n, interval, magnitude, seed, degree=2):
    rng = np.random.default_rng(seed)
    a, b = interval
    L = b - a
    mats = []
    for _ in range(2 * degree + 1):
        m = rng.standard_normal((n, n))
        m = 0.5 * (m + m.T)
        mats.append(m / max(np.linalg.norm(m, 2), 1e-300))
    mats = np.array(mats) * (magnitude / (2 * degree + 1))
    freqs = np.pi * np.arange(degree + 1) / L

    def basis(t):
        s = t - a
        return np.concatenate([np.cos(freqs * s), np.sin(freqs[1:] * s)])

    def dbasis(t):
        s = t - a
        return np.concatenate([-freqs * np.sin(freqs * s), freqs[1:] * np.cos(freqs[1:] * s)])

    return (lambda t: np.tensordot(basis(t), mats, axes=1),
            lambda t: np.tensordot(dbasis(t), mats, axes=1))


def perturb(problem, magnitude: float, seed: int = 0):
    """Add a seeded smooth symmetric perturbation of size ``magnitude`` to ``C``.

    The perturbation is a trigonometric polynomial of degree two in ``t``
    whose spectral norm never exceeds ``magnitude``.
    """
    if magnitude < 0:
        raise ValueError("magnitude must be nonnegative")
    if magnitude == 0:
        return problem
    c = problem.coefficients
    dC, ddC = _trig_perturbation(c.n, c.interval, magnitude, seed)

    def ev(t, abc):
        A, B, C = abc
        return A, B, C + dC(t)

    def dev(t, abc, d):
        return d[0], d[1], d[2] + ddC(t)

    return problem.replace(coefficients=c.mapped(ev, dev, kind="builtin"))


def maslov_index_robust(problem, magnitude: float = 1e-6, seed: int = 0,
                        max_retries: int = 4, **kw):
    """Maslov index, retrying on perturbed problems after a degenerate crossing.

    Magnitudes ``magnitude * 10**-j`` for ``j = 0 .. max_retries - 1`` are
    tried in turn.

    Returns
    -------
    tuple
        ``(report, problem_used)``.
    """
    try:
        return maslov_index(problem, **kw), problem
    except DegenerateCrossing as exc:
        first = exc
    for j in range(max_retries):
        mag = magnitude * 10.0 ** (-j)
        p = perturb(problem, mag, seed + j)
        try:
            scan = focal_scan(p, **kw)
        except DegenerateCrossing:
            continue
        return report_from_scan(scan, mag), p
    raise StillDegenerate(f"crossings remain degenerate after {max_retries} perturbations "
                          f"(first at t={first.t})")
