import numpy as np
import pytest
import scipy.sparse.linalg as spla
from hypothesis import given, settings
from hypothesis import strategies as st

from harvestfem.functions import SpaceTimeFunction
from harvestfem.mesh import build_mesh, unit_square
from harvestfem.mms import exact_solutions
from harvestfem.operators import (
    apply_dirichlet,
    assemble_advection,
    assemble_load,
    assemble_mass,
    assemble_stiffness,
    assemble_weighted_mass,
)
from harvestfem.space import Field, build_space

from oracles import dense_forms

K_POLY = SpaceTimeFunction(
    lambda t, x, y: x**2 * y + y**2,
    lambda t, x, y: (2 * x * y, x**2 + 2 * y),
)


def K_POLY_GRAD(x, y):
    return 2 * x * y, x**2 + 2 * y


@pytest.fixture(scope="module", params=[1, 2])
def space(request):
    return build_space(unit_square(4), request.param)


@pytest.mark.parametrize("degree", [1, 2])
def test_brute_force_oracle_2x2(degree):
    space = build_space(unit_square(2), degree)
    M, S, W, A, b = dense_forms(space, w=lambda x, y: 1 + x * y, K=K_POLY_GRAD, f=lambda x, y: x**2 + y)
    np.testing.assert_allclose(assemble_mass(space).toarray(), M, rtol=0, atol=1e-12)
    np.testing.assert_allclose(assemble_stiffness(space).toarray(), S, rtol=0, atol=1e-12)
    w = SpaceTimeFunction(lambda t, x, y: 1 + x * y)
    np.testing.assert_allclose(assemble_weighted_mass(space, w).toarray(), W, rtol=0, atol=1e-12)
    np.testing.assert_allclose(assemble_advection(space, K_POLY, 0.0).toarray(), A, rtol=0, atol=1e-12)
    f = SpaceTimeFunction(lambda t, x, y: x**2 + y)
    np.testing.assert_allclose(assemble_load(space, f, 0.0), b, rtol=0, atol=1e-12)


def test_p1_reference_triangle_mass():
    space = build_space(build_mesh(0, 1, 0, 1, 1, 1), 1)
    # the lower triangle (0,0),(1,0),(1,1) has area 1/2; its element matrix is (A/12)[[2,1,1],...]
    M = assemble_mass(space).toarray()
    A = 0.5
    expected = A / 12 * (np.ones((3, 3)) + np.eye(3))
    lower = [0, 1, 3]
    upper = [0, 3, 2]
    assembled = np.zeros((4, 4))
    assembled[np.ix_(lower, lower)] += expected
    assembled[np.ix_(upper, upper)] += expected
    np.testing.assert_allclose(M, assembled, atol=1e-15)


def test_p1_reference_triangle_stiffness_diagonal():
    # mesh with a single cell; the upper-left triangle (0,0),(1,1),(0,1) is right isosceles at (0,1)
    space = build_space(build_mesh(0, 1, 0, 1, 1, 1), 1)
    S = assemble_stiffness(space).toarray()
    # vertex (1,0) lies only in the lower triangle, where it is the right-angle vertex
    assert S[1, 1] == pytest.approx(1.0, abs=1e-14)
    assert S[2, 2] == pytest.approx(1.0, abs=1e-14)
    # each diagonal vertex sees two acute corners, 1/2 from each triangle
    assert S[0, 0] == pytest.approx(1.0, abs=1e-14)


def test_mass_properties(space):
    M = assemble_mass(space)
    ones = np.ones(space.n_dofs)
    assert ones @ M @ ones == pytest.approx(1.0, abs=1e-13)
    dense = M.toarray()
    np.testing.assert_allclose(dense, dense.T, atol=1e-16)
    assert np.linalg.eigvalsh(dense).min() > 0
    np.linalg.cholesky(dense)


def test_stiffness_properties(space):
    S = assemble_stiffness(space)
    assert np.abs(S @ np.ones(space.n_dofs)).max() <= 1e-12 * np.abs(S.data).max()
    rng = np.random.default_rng(7)
    for _ in range(100):
        x = rng.standard_normal(space.n_dofs)
        assert x @ (S @ x) >= -1e-12


def test_csr_pattern_sorted_unique(space):
    for mat in (assemble_mass(space), assemble_stiffness(space), assemble_advection(space, K_POLY, 0.3)):
        assert mat.shape == (space.n_dofs, space.n_dofs)
        for r in range(space.n_dofs):
            cols = mat.indices[mat.indptr[r] : mat.indptr[r + 1]]
            assert np.all(np.diff(cols) > 0)


def test_advection_zero_for_constant_K(space):
    A = assemble_advection(space, 3.0, 0.0)
    assert np.all(A.data == 0.0)


def test_advection_sums_for_linear_K():
    # K = x: column b sums to int phi_b d/dx(1) = 0; row a sums to int d(phi_a)/dx,
    # which vanishes for DOFs off the vertical walls
    space = build_space(unit_square(3), 2)
    K = SpaceTimeFunction(lambda t, x, y: x + 0 * y, lambda t, x, y: (1.0 + 0 * x, 0 * y))
    A = assemble_advection(space, K, 0.0)
    np.testing.assert_allclose(np.ones(space.n_dofs) @ A, 0.0, atol=1e-14)
    row = A @ np.ones(space.n_dofs)
    X = space.dof_coords[:, 0]
    np.testing.assert_allclose(row[(X > 0) & (X < 1)], 0.0, atol=1e-14)
    # on x = 1 the row sums are the boundary integrals of phi_a, which add up to 1
    assert row[X == 1].sum() == pytest.approx(1.0, abs=1e-13)


def test_advection_nonsymmetric():
    space = build_space(unit_square(3), 2)
    K = SpaceTimeFunction(lambda t, x, y: x**2 + 0 * y, lambda t, x, y: (2 * x, 0 * y))
    A = assemble_advection(space, K, 0.0).toarray()
    assert np.abs(A - A.T).max() > 1e-3


def test_weighted_mass_identities(space):
    M = assemble_mass(space).toarray()
    np.testing.assert_allclose(assemble_weighted_mass(space, 1.0).toarray(), M, atol=1e-13)
    np.testing.assert_allclose(assemble_weighted_mass(space, 2.5).toarray(), 2.5 * M, atol=1e-13)
    xfield = Field.interpolate(space, lambda t, x, y: x)
    W = assemble_weighted_mass(space, xfield)
    ones = np.ones(space.n_dofs)
    assert ones @ W @ ones == pytest.approx(0.5, abs=1e-13)
    W = W.toarray()
    np.testing.assert_allclose(W, W.T, atol=1e-16)


def test_load_identities(space):
    assert np.all(assemble_load(space, 0.0, 0.0) == 0.0)
    M = assemble_mass(space)
    np.testing.assert_allclose(assemble_load(space, 1.0, 0.0), M @ np.ones(space.n_dofs), atol=1e-15)
    b = assemble_load(space, lambda t, x, y: np.sin(x), 0.0)
    assert b.sum() == pytest.approx(1 - np.cos(1.0), abs=1e-10)


@given(st.floats(-3, 3), st.floats(-3, 3))
@settings(max_examples=20, deadline=None)
def test_forms_are_linear_in_weight(a, c):
    space = build_space(unit_square(2), 2)
    f1 = SpaceTimeFunction(lambda t, x, y: np.cos(x) * y)
    f2 = SpaceTimeFunction(lambda t, x, y: np.exp(x - y))
    comb = SpaceTimeFunction(lambda t, x, y: a * np.cos(x) * y + c * np.exp(x - y))
    lhs = assemble_weighted_mass(space, comb).toarray()
    rhs = a * assemble_weighted_mass(space, f1).toarray() + c * assemble_weighted_mass(space, f2).toarray()
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def _dirichlet_system(space):
    A = assemble_stiffness(space) + assemble_mass(space)
    b = assemble_load(space, 1.0, 0.0)
    return A, b


def test_dirichlet_zero():
    space = build_space(unit_square(3), 2)
    A, b = _dirichlet_system(space)
    A2, b2 = apply_dirichlet(A, b, space, 0.0, 0.0)
    bd = space.boundary_dofs
    assert np.all(b2[bd] == 0.0)
    assert np.all(A2.diagonal()[bd] == 1.0)
    rows = A2[bd].toarray()
    rows[np.arange(len(bd)), bd] -= 1.0
    assert np.all(rows == 0.0)


def test_dirichlet_solution_matches_boundary_data():
    space = build_space(unit_square(4), 2)
    u1 = exact_solutions()[0]
    A, b = _dirichlet_system(space)
    A2, b2 = apply_dirichlet(A, b, space, u1, 0.4)
    u = spla.spsolve(A2.tocsc(), b2)
    bd = space.boundary_dofs
    X, Y = space.dof_coords[bd].T
    np.testing.assert_allclose(u[bd], u1(0.4, X, Y), rtol=0, atol=1e-14)
    # interior rows no longer couple to boundary columns
    interior = space.interior_dofs()
    assert np.all(A2[interior][:, bd].toarray() == 0.0)


def test_dirichlet_reproduces_polynomial_solution():
    # -lap u + u = f with u = x^2 + y^2 lies in P2, so the discrete solution is exact
    space = build_space(unit_square(3), 2)
    exact = SpaceTimeFunction(lambda t, x, y: x**2 + y**2)
    A = assemble_stiffness(space) + assemble_mass(space)
    b = assemble_load(space, lambda t, x, y: x**2 + y**2 - 4.0, 0.0)
    A2, b2 = apply_dirichlet(A, b, space, exact, 0.0)
    u = spla.spsolve(A2.tocsc(), b2)
    X, Y = space.dof_coords.T
    np.testing.assert_allclose(u, X**2 + Y**2, atol=1e-12)
