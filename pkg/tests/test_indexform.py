import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import random_problem
from sympindex.distribution import Distribution
from sympindex.errors import DegenerateRestriction, QNotContained
from sympindex.forms import Subspace, SymBilinearForm, inertia, restrict
from sympindex.frontends import catalog
from sympindex.indexform import (EndpointData, Mesh, assemble, build_K_subspace,
                                 build_S_subspace, endpoint_form, index_on_form, index_on_K,
                                 verify_index_theorem)
from sympindex.lagrangian import PSPair
from sympindex.system import CoefficientField, SymplecticProblem


def const_problem(A, B, C, ell0, grid_steps=4096):
    return SymplecticProblem(CoefficientField.constant(A, B, C), ell0, grid_steps)


def free_particle():
    return const_problem([[0.0]], [[1.0]], [[0.0]], PSPair.vertical(1))


def test_two_element_assembly_is_hand_quadrature():
    form = assemble(free_particle(), 2)
    np.testing.assert_allclose(form.matrix.entries, [[4.0]], atol=1e-13)


@pytest.mark.parametrize("N", [3, 17, 64])
def test_flat_form_is_positive_definite(N):
    z = np.zeros((2, 2))
    form = assemble(const_problem(z, np.eye(2), z, PSPair.vertical(2)), N)
    i = inertia(form.matrix)
    assert i.n_minus == 0 and i.n_zero == 0


def test_assembly_matches_quadratic_energy():
    # I(v, v) = int v'^2 - kappa^2 v^2 for v = sin(pi t), exact value pi^2/2 - kappa^2/2
    kappa = 2.0
    p = const_problem([[0.0]], [[1.0]], [[-kappa**2]], PSPair.vertical(1))
    N = 512
    form = assemble(p, N)
    x = np.sin(np.pi * Mesh.uniform(0.0, 1.0, N).nodes[1:-1])
    val = x @ form.matrix.entries @ x
    assert abs(val - (np.pi**2 - kappa**2) / 2) < 1e-4


def test_boundary_term_uses_initial_form():
    # P = R, S = (s): the quadratic form of v = 1 - t is int 1 - s
    s = 0.7
    p = const_problem([[0.0]], [[1.0]], [[0.0]], PSPair.full([[s]]))
    form = assemble(p, 8)
    x = np.zeros(form.dof)
    x[0] = 1.0
    x[1:] = 1.0 - form.mesh.nodes[1:-1]
    assert abs(x @ form.matrix.entries @ x - (1.0 - s)) < 1e-12


def test_endpoint_block_adds_s_q():
    p = const_problem([[0.0]], [[1.0]], [[0.0]], PSPair.full([[0.0]]))
    e = EndpointData(Subspace.full(1), SymBilinearForm([[-0.5]]))
    form = assemble(p, 4, e)
    assert form.dof == 1 + 3 + 1
    x = np.ones(form.dof)
    assert abs(x @ form.matrix.entries @ x + 0.5) < 1e-12


def test_s_subspace_counting_and_membership():
    z = np.zeros((2, 2))
    p = const_problem(z, np.diag([-1.0, 1.0]), z, PSPair.vertical(2))
    form = assemble(p, 3)
    assert build_S_subspace(form, None).dim == 0
    S = build_S_subspace(form, Distribution.constant([[1.0], [0.0]]))
    assert S.dim == 2
    for col in S.frame.T:
        nodal = form.nodal_values(col)
        assert np.all(nodal[:, 1] == 0.0)


def test_k_is_whole_space_without_distribution():
    form = assemble(free_particle(), 8)
    assert build_K_subspace(form, Subspace.zero(form.dof)).dim == form.dof


def test_oracle_c_form_negative_on_s():
    e = catalog("oracle_c")
    form = assemble(e.problem, 64)
    S = build_S_subspace(form, e.distribution)
    lam = np.linalg.eigvalsh(restrict(form.matrix, S).entries)
    assert lam.max() < 0


def test_degenerate_s_restriction_reported():
    form = assemble(free_particle(), 4)
    G = np.zeros((form.dof, form.dof))
    with pytest.raises(DegenerateRestriction, match="mesh is too coarse"):
        build_K_subspace(form.__class__(form.mesh, SymBilinearForm(G), 1, 0, 0, False,
                                        form.prolongation), Subspace.full(form.dof))


@pytest.mark.parametrize("name, mesh, expected", [
    ("oracle_b", 32, 0), ("oracle_a", 64, 1), ("oracle_c", 128, 1), ("oracle_f", 128, 3),
])
def test_index_on_k_oracles(name, mesh, expected):
    e = catalog(name)
    idx = index_on_K(e.problem, e.distribution, mesh)
    assert idx.n_minus == expected
    assert idx.cross_check == expected and idx.additivity_holds and idx.intersection_trivial


def test_endpoint_form_examples():
    e = catalog("oracle_e", q=-0.5)
    np.testing.assert_allclose(endpoint_form(e.problem, e.endpoint).entries, [[-0.5]],
                               atol=1e-10)
    d = catalog("oracle_d")
    # v = 1 - 2t, alpha = -2, so S_b(v(1), v(1)) = -alpha(1) v(1) = -2 and cancels S_Q = -2
    cancel = EndpointData(Subspace.full(1), SymBilinearForm([[-2.0]]))
    np.testing.assert_allclose(endpoint_form(d.problem, cancel).entries, [[0.0]], atol=1e-9)
    empty = EndpointData(Subspace.zero(1), SymBilinearForm.empty())
    assert endpoint_form(d.problem, empty).dim == 0


def test_endpoint_form_requires_q_in_vb():
    # b = 1 is focal for kappa = pi: no solution from P = {0} reaches v(b) != 0
    q = const_problem([[0.0]], [[1.0]], [[-np.pi**2]], PSPair.vertical(1))
    with pytest.raises(QNotContained):
        endpoint_form(q, EndpointData(Subspace.full(1), SymBilinearForm([[0.0]])))


@pytest.mark.parametrize("name, equation", [
    ("oracle_a", "1 = 0 + 1"), ("oracle_c", "1 = 0 + 1"), ("oracle_d", "1 = 0 + 1"),
])
def test_verify_fixed_oracles(name, equation):
    e = catalog(name)
    rep = verify_index_theorem(e.problem, e.distribution, 256)
    assert rep.verdict == "verified" and rep.equation == equation


def test_verify_variable_endpoint():
    e = catalog("oracle_e")
    rep = verify_index_theorem(e.problem, None, 256, "variable", e.endpoint)
    assert rep.verdict == "verified" and rep.equation == "1 = 0 + 1 + 0"


def test_verify_opposite():
    e = catalog("oracle_a")
    rep = verify_index_theorem(e.problem, None, 256, "opposite")
    assert rep.verdict == "verified"


@pytest.mark.parametrize("kappa, lhs", [(np.pi, 0), (2 * np.pi, 1)])
def test_verify_b_focal(kappa, lhs):
    p = const_problem([[0.0]], [[1.0]], [[-kappa**2]], PSPair.vertical(1))
    assert verify_index_theorem(p, None, 256).verdict == "assumption_failed"
    rep = verify_index_theorem(p, None, 256, "b_focal")
    assert rep.verdict == "verified" and rep.lhs == lhs


def test_verify_coarse_mesh_is_inconclusive():
    e = catalog("oracle_f")
    rep = verify_index_theorem(e.problem, None, 4)
    assert rep.verdict == "inconclusive"


def test_verify_rejects_bad_distribution():
    e = catalog("oracle_c")
    rep = verify_index_theorem(e.problem, Distribution.constant([[0.0], [1.0]]), 64)
    assert rep.verdict == "assumption_failed"


def test_verify_default_distribution_note():
    e = catalog("oracle_c")
    rep = verify_index_theorem(e.problem, None, 64)
    assert rep.verdict == "verified"
    assert any("negative eigenspace" in n for n in rep.notes)


@given(st.integers(0, 2**31 - 1))
def test_additivity_and_trivial_intersection_on_random_problems(seed):
    p, D = random_problem(np.random.default_rng(seed), grid_steps=256)
    form = assemble(p, 24)
    S = build_S_subspace(form, D)
    if S.dim:
        lam = np.abs(np.linalg.eigvalsh(restrict(form.matrix, S.orthonormal()).entries))
        if lam.min() < 1e-6 * np.abs(form.matrix.entries).max():
            return
    idx = index_on_form(form, D)
    assert idx.additivity_holds
    assert idx.intersection_trivial
    assert idx.dim_K + idx.dim_S == idx.dof
