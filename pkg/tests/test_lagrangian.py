import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sympindex.errors import DimensionMismatch, EmptyIntersection
from sympindex.forms import Subspace, SymBilinearForm, inertia, restrict
from sympindex.lagrangian import (LagrangianFrame, PSPair, crossing_form, evolve,
                                  frame_from_ps, isotropy_residual, ps_from_frame,
                                  vertical_intersection)
from sympindex.system import CoefficientField, SymplecticProblem

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


@st.composite
def ps_pairs(draw):
    n = draw(st.integers(1, 4))
    k = draw(st.integers(0, n))
    f = draw(arrays(float, (n, k), elements=finite))
    P = Subspace.span(f, n)
    s = draw(arrays(float, (P.dim, P.dim), elements=finite))
    return PSPair(P, SymBilinearForm(0.5 * (s + s.T)))


def _same_pair(a: PSPair, b: PSPair, tol=1e-8):
    if not a.P.equals(b.P, tol):
        return False
    if a.P.dim == 0:
        return True
    # compare S as forms on a common orthonormal frame of P
    q = a.P.orthonormal()
    ca = np.linalg.lstsq(a.P.frame, q, rcond=None)[0]
    cb = np.linalg.lstsq(b.P.frame, q, rcond=None)[0]
    sa, sb = ca.T @ a.S.entries @ ca, cb.T @ b.S.entries @ cb
    return np.abs(sa - sb).max() <= tol * max(1.0, np.abs(sa).max())


def test_frame_examples():
    f = frame_from_ps(PSPair.vertical(2)).frame
    assert Subspace(f).equals(Subspace(np.vstack([np.zeros((2, 2)), np.eye(2)])))
    f = frame_from_ps(PSPair.full(np.zeros((2, 2)))).frame
    assert Subspace(f).equals(Subspace(np.vstack([np.eye(2), np.zeros((2, 2))])))
    f = frame_from_ps(PSPair.full([[3.0]])).frame
    assert Subspace(f).equals(Subspace([[1.0], [-3.0]]))


def test_ps_from_frame_examples():
    ps = ps_from_frame(np.array([[0.0], [1.0]]))
    assert ps.P.dim == 0 and ps.S.dim == 0
    ps = ps_from_frame(np.array([[1.0], [-3.0]]))
    assert ps.P.dim == 1
    np.testing.assert_allclose(restrict(ps.S.entries, np.linalg.pinv(ps.P.frame)).entries,
                               [[3.0]], atol=1e-12)
    S0 = np.array([[1.0, 2.0], [2.0, -1.0]])
    ps = ps_from_frame(np.vstack([np.eye(2), -S0]))
    assert _same_pair(ps, PSPair.full(S0))


@given(ps_pairs())
def test_ps_round_trip(ps):
    frame = frame_from_ps(ps)
    assert isotropy_residual(frame.frame) < 1e-10
    assert _same_pair(ps_from_frame(frame), ps, 1e-7)


def test_pspair_dimension_check():
    with pytest.raises(DimensionMismatch):
        PSPair(Subspace.full(2), SymBilinearForm(np.eye(1)))


def test_non_lagrangian_frame_rejected():
    with pytest.raises(ValueError):
        LagrangianFrame(np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0], [0.0, 0.0]])
                        @ np.array([[1.0, 0.3], [0.0, 1.0]]) + np.array(
                            [[0, 0], [0, 0], [0, 1.0], [0, 0]]))


def test_vertical_intersection_examples():
    L0 = np.vstack([np.zeros((2, 2)), np.eye(2)])
    assert vertical_intersection(L0).dim == 2
    assert vertical_intersection(np.vstack([np.eye(2), np.zeros((2, 2))])).dim == 0


def _oscillator(kappa=1.5 * np.pi):
    return SymplecticProblem(CoefficientField.constant([[0.0]], [[1.0]], [[-kappa**2]]),
                             PSPair.vertical(1))


def test_evolve_flat_is_constant():
    p = SymplecticProblem(CoefficientField.constant(np.zeros((2, 2)), np.zeros((2, 2)),
                                                    np.zeros((2, 2))),
                          PSPair.full([[1.0, 0.5], [0.5, -2.0]]), grid_steps=64)
    path = evolve(p)
    for f in path.frames[::16]:
        assert Subspace(f).equals(Subspace(path.frames[0]))
    assert path.max_isotropy_residual < 1e-12


def test_frame_at_between_nodes_matches_closed_form():
    kappa = 1.5 * np.pi
    path = evolve(_oscillator(kappa))
    t = 0.123456789
    f = path.frame_at(t)
    exact = np.array([np.sin(kappa * t) / kappa, np.cos(kappa * t)])
    exact /= np.linalg.norm(exact)
    assert abs(abs(f[:, 0] @ exact) - 1.0) < 1e-12


def test_crossing_form_oscillator_first_zero():
    p = _oscillator()
    L = np.array([[0.0], [1.0]])
    form = crossing_form(p, 2.0 / 3.0, L)
    assert form.entries.shape == (1, 1) and form.entries[0, 0] > 0


@pytest.mark.parametrize("direction, sign", [(1, 1.0), (0, -1.0)])
def test_crossing_form_equals_restricted_b(direction, sign):
    p = SymplecticProblem(CoefficientField.constant(np.zeros((2, 2)), np.diag([-1.0, 1.0]),
                                                    np.zeros((2, 2))), PSPair.vertical(2))
    e = np.eye(2)
    other = 1 - direction
    # horizontal in ``other``, vertical in ``direction``
    L = np.zeros((4, 2))
    L[other, 0] = 1.0
    L[2 + direction, 1] = 1.0
    form = crossing_form(p, 0.5, L)
    cov = vertical_intersection(L).frame
    np.testing.assert_allclose(form.entries, restrict(np.diag([-1.0, 1.0]), cov).entries,
                               atol=1e-12)
    assert np.sign(form.entries[0, 0]) == sign
    assert inertia(form).signature == int(sign)
    assert np.allclose(np.abs(cov[:, 0]), e[:, direction])


def test_crossing_form_requires_intersection():
    with pytest.raises(EmptyIntersection):
        crossing_form(_oscillator(), 0.5, np.array([[1.0], [0.0]]))
