import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import oscillator_psi, trig_isomorphism
from sympindex.errors import AssumptionViolation, InvalidCoefficients, SingularIsomorphism, SympDrift
from sympindex.lagrangian import PSPair, frame_from_ps
from sympindex.maslov import find_focal_instants
from sympindex.system import (CoefficientField, Isomorphism, SymplecticProblem, alpha_from_v,
                              apply_isomorphism, congruence_frame, fundamental_matrix,
                              opposite, symplectic_residual, to_morse_sturm, validate)


def const(A, B, C, interval=(0.0, 1.0)):
    return CoefficientField.constant(A, B, C, interval)


def test_validate_examples():
    d = validate(const(np.zeros((3, 3)), np.eye(3), np.zeros((3, 3))), 64)
    assert d.passed and d.inertia_B[0] == (0, 0, 3)
    d = validate(const(np.zeros((2, 2)), np.diag([-1.0, 1.0]), np.zeros((2, 2))), 64)
    assert d.passed and d.inertia_B[0] == (1, 0, 1)
    c = CoefficientField(2, (0.0, 1.0),
                         lambda t: (np.zeros((2, 2)), np.diag([t - 0.5, 1.0]), np.zeros((2, 2))))
    d = validate(c, 64)
    assert not d.passed
    assert any("B invertible" in m for m in d.messages)
    assert any("B constant inertia" in m for m in d.messages)


def test_validate_reports_asymmetry():
    c = CoefficientField(1 + 1, (0.0, 1.0),
                         lambda t: (np.zeros((2, 2)), np.eye(2), np.array([[0.0, 1.0], [0.0, 0]])))
    d = validate(c, 8)
    assert not d.passed and any("C symmetric" in m for m in d.messages)


def test_bad_interval():
    with pytest.raises(InvalidCoefficients):
        const([[0.0]], [[1.0]], [[0.0]], (1.0, 0.0))


def test_assumption_enforced():
    with pytest.raises(AssumptionViolation):
        SymplecticProblem(const([[0.0]], [[0.0]], [[0.0]]), PSPair.vertical(1))


def test_alpha_from_v_examples():
    c = const(np.zeros((2, 2)), np.diag([-1.0, 1.0]), np.zeros((2, 2)))
    np.testing.assert_allclose(alpha_from_v(c, 0.3, np.zeros(2), [1.0, 1.0]), [-1.0, 1.0])
    c = const(np.eye(2), np.eye(2), np.zeros((2, 2)))
    np.testing.assert_allclose(alpha_from_v(c, 0.3, [1.0, 2.0], [1.0, 2.0]), [0.0, 0.0])


def test_fundamental_matrix_flat_and_free():
    p = SymplecticProblem(const([[0.0]], [[1.0]], [[0.0]]), PSPair.full([[0.0]]), 256)
    psi = fundamental_matrix(p)
    for t in (0.0, 0.37, 1.0):
        np.testing.assert_allclose(psi(t), [[1.0, t], [0.0, 1.0]], atol=1e-13)
    z = np.zeros((2, 2))
    p = SymplecticProblem(const(z, z, z), PSPair.full(np.eye(2)), 16)
    np.testing.assert_allclose(fundamental_matrix(p).values[-1], np.eye(4), atol=1e-15)


def test_fundamental_matrix_oscillator():
    kappa = 1.5 * np.pi
    p = SymplecticProblem(const([[0.0]], [[1.0]], [[-kappa**2]]), PSPair.vertical(1))
    psi = fundamental_matrix(p)
    assert psi.max_residual < 1e-12
    for t in (0.25, 2.0 / 3.0, 0.9, 0.91234):
        np.testing.assert_allclose(psi(t), oscillator_psi(kappa, t), atol=1e-11)


def test_symplectic_drift_on_coarse_grid():
    p = SymplecticProblem(const([[0.0]], [[1.0]], [[-(20 * np.pi) ** 2]]), PSPair.vertical(1),
                          grid_steps=8)
    with pytest.raises(SympDrift):
        fundamental_matrix(p)


def test_symplectic_residual_of_symplectic_matrix():
    m = oscillator_psi(2.0, 0.7)
    assert symplectic_residual(m[None])[0] < 1e-15


def test_opposite_examples_and_involution():
    kappa = 2.0
    p = SymplecticProblem(const([[0.3]], [[1.0]], [[-kappa**2]]), PSPair.full([[1.5]]))
    op = opposite(p)
    A, B, C = op.coefficients(0.4)
    np.testing.assert_allclose([A[0, 0], B[0, 0], C[0, 0]], [0.3, -1.0, kappa**2])
    np.testing.assert_allclose(op.ell0.S.entries, [[-1.5]])
    back = opposite(op)
    for t in (0.0, 0.5, 1.0):
        for m1, m2 in zip(back.coefficients(t), p.coefficients(t)):
            np.testing.assert_allclose(m1, m2)
    np.testing.assert_allclose(back.ell0.S.entries, p.ell0.S.entries)


def _coeff_close(p, q, t, atol=1e-10):
    for m1, m2 in zip(p.coefficients(t), q.coefficients(t)):
        np.testing.assert_allclose(m1, m2, atol=atol)


def test_isomorphism_examples():
    kappa = 1.5 * np.pi
    p = SymplecticProblem(const([[0.0]], [[1.0]], [[-kappa**2]]), PSPair.vertical(1))
    q = apply_isomorphism(p, Isomorphism.identity(1))
    _coeff_close(p, q, 0.3)
    two = Isomorphism(lambda t: [[2.0]], lambda t: [[0.0]], lambda t: [[0.0]], lambda t: [[0.0]])
    A, B, C = apply_isomorphism(p, two).coefficients(0.3)
    np.testing.assert_allclose([A[0, 0], B[0, 0], C[0, 0]], [0.0, 4.0, -kappa**2 / 4])
    w0, c = 0.7, -3.0
    p = SymplecticProblem(const([[0.0]], [[1.0]], [[c]]), PSPair.vertical(1))
    shear = Isomorphism(lambda t: [[1.0]], lambda t: [[w0]], lambda t: [[0.0]],
                        lambda t: [[0.0]])
    A, B, C = apply_isomorphism(p, shear).coefficients(0.3)
    np.testing.assert_allclose([A[0, 0], B[0, 0], C[0, 0]], [-w0, 1.0, c - w0**2])


def test_isomorphism_singular_z():
    p = SymplecticProblem(const([[0.0]], [[1.0]], [[0.0]]), PSPair.vertical(1))
    bad = Isomorphism(lambda t: [[t - 0.5]], lambda t: [[0.0]])
    with pytest.raises(SingularIsomorphism):
        apply_isomorphism(p, bad)


@given(st.integers(0, 10_000))
def test_isomorphism_is_symplectic(seed):
    iso, _ = trig_isomorphism(2, seed)
    J = np.block([[np.zeros((2, 2)), np.eye(2)], [-np.eye(2), np.zeros((2, 2))]])
    for t in (0.0, 0.3, 1.0):
        M = iso.matrix(t)
        np.testing.assert_allclose(M.T @ J @ M, J, atol=1e-12)


def test_isomorphism_transports_fundamental_matrix():
    p = SymplecticProblem(const([[0.2, 0.1], [0.0, -0.3]], np.diag([-1.0, 2.0]),
                                [[-4.0, 1.0], [1.0, -9.0]]), PSPair.vertical(2), 2048)
    iso, _ = trig_isomorphism(2, 7)
    q = apply_isomorphism(p, iso)
    psi, psi_t = fundamental_matrix(p), fundamental_matrix(q)
    phi0 = np.linalg.inv(iso.matrix(0.0))
    for t in (0.4, 1.0):
        np.testing.assert_allclose(psi_t(t), iso.matrix(t) @ psi(t) @ phi0, atol=1e-9)
    # the initial Lagrangian is carried along as well
    L = iso.matrix(0.0) @ frame_from_ps(p.ell0).frame
    Lq = frame_from_ps(q.ell0).frame
    assert np.linalg.matrix_rank(np.hstack([L, Lq]), 1e-9) == 2


def test_kill_a_examples():
    c = const(np.zeros((2, 2)), np.diag([-1.0, 1.0]), np.diag([0.0, -2.0]))
    p = SymplecticProblem(c, PSPair.vertical(2), 256)
    q, _ = to_morse_sturm(p, "kill_A")
    _coeff_close(p, q, 0.6)
    p = SymplecticProblem(const([[1.0]], [[1.0]], [[0.0]]), PSPair.vertical(1), 512)
    q, iso = to_morse_sturm(p, "kill_A")
    for t in (0.25, 0.8):
        A, B, C = q.coefficients(t)
        np.testing.assert_allclose(iso.z(t), [[np.exp(-t)]], rtol=1e-10)
        np.testing.assert_allclose([A[0, 0], B[0, 0], C[0, 0]], [0.0, np.exp(-2 * t), 0.0],
                                   atol=1e-9)


def test_constant_b_scalar_congruence():
    c = CoefficientField(1, (0.0, 1.0),
                         lambda t: ([[0.0]], [[1.0 + t * t]], [[0.0]]), "builtin",
                         lambda t: ([[0.0]], [[2.0 * t]], [[0.0]]))
    p = SymplecticProblem(c, PSPair.vertical(1), 512)
    q, _ = to_morse_sturm(p, "constant_B")
    for t in np.linspace(0, 1, 7):
        A, B, _ = q.coefficients(t)
        assert abs(B[0, 0] - 1.0) < 1e-8 and abs(A[0, 0]) < 1e-8


def test_congruence_frame_diagonalizes():
    B = np.diag([-2.0, 0.5, 3.0])
    c = const(np.zeros((3, 3)), B, np.zeros((3, 3)))
    E = congruence_frame(c, [0.0, 1.0])
    for e in E:
        np.testing.assert_allclose(e.T @ B @ e, np.diag([-1.0, 1.0, 1.0]), atol=1e-14)


def test_transformed_focal_instants_unchanged():
    kappa = 1.5 * np.pi
    p = SymplecticProblem(const([[0.0]], [[1.0]], [[-kappa**2]]), PSPair.vertical(1))
    iso, _ = trig_isomorphism(1, 3)
    f0 = find_focal_instants(p)
    f1 = find_focal_instants(apply_isomorphism(p, iso))
    assert len(f0) == len(f1) == 1
    assert abs(f0[0].t - f1[0].t) < 1e-10


def test_restricted_interval():
    p = SymplecticProblem(const([[0.0]], [[1.0]], [[0.0]]), PSPair.vertical(1))
    r = p.restricted(0.5)
    assert r.interval == (0.0, 0.5)
    with pytest.raises(InvalidCoefficients):
        p.coefficients.restricted(0.0, 2.0)
