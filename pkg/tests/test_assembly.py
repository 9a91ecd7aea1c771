import numpy as np
import pytest
import scipy.io
import scipy.linalg

from tdcshell.assembly import (
    BoundaryCondition,
    MeanConstraint,
    ShellProblem,
    SingularSystemError,
    _global_dofs,
    assemble_system,
    constraint_matrix,
    dump_system,
    edge_quadrature,
    element_load,
    element_stiffness,
    filter_constraints,
    point_load_vector,
    solve_problem,
)
from tdcshell.bench import case_scordelis_lo, displacement_at
from tdcshell.nurbs import (
    Mesh,
    QuadratureRule,
    bilinear_patch,
    cylinder_patch,
    gauss_rule,
)
from tdcshell.shell import Material
from tdcshell.verification import random_patch

MAT = Material(E=1e4, nu=0.3, t=0.01)
UNIT_SQUARE = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]]


def plate(p=3, n=2):
    return Mesh.from_patch(bilinear_patch(UNIT_SQUARE).refined(p, n))


def dense_stiffness(mesh, material=MAT):
    em = element_stiffness(mesh, np.arange(mesh.n_elements), material)
    nb = mesh.n_basis
    K = np.zeros((3 * nb, 3 * nb))
    dofs = _global_dofs(em.conn, nb)
    for c in range(len(dofs)):
        K[np.ix_(dofs[c], dofs[c])] += em.K[c]
    return K


# -- element stiffness ---------------------------------------------------------------

def test_element_stiffness_symmetric_random():
    rng = np.random.default_rng(11)
    for _ in range(5):
        patch = random_patch(rng)
        K = element_stiffness(patch, np.arange(patch.space.n_elements), MAT).K
        asym = np.linalg.norm(K - np.swapaxes(K, 1, 2), axis=(1, 2)) / np.linalg.norm(K, axis=(1, 2))
        assert asym.max() <= 1e-12


def test_free_flat_patch_rigid_modes():
    w = scipy.linalg.eigvalsh(dense_stiffness(plate()))
    ratio = np.abs(w) / np.abs(w).max()
    assert np.sum(ratio <= 1e-9) == 6
    assert ratio[6] > 1e-9


def test_free_curved_patch_rigid_modes():
    mesh = Mesh.from_patch(cylinder_patch(2.0, (-0.6, 0.6), (0.0, 2.0)).refined(3, 2))
    w = scipy.linalg.eigvalsh(dense_stiffness(mesh, Material(1.0, 0.3, 0.05)))
    ratio = np.abs(w) / np.abs(w).max()
    assert np.sum(ratio <= 1e-9) == 6


def test_directional_equals_covariant_bending():
    rng = np.random.default_rng(12)
    for _ in range(3):
        patch = random_patch(rng)
        elems = np.arange(patch.space.n_elements)
        a = element_stiffness(patch, elems, MAT, variant="covariant").K_B
        b = element_stiffness(patch, elems, MAT, variant="directional").K_B
        assert (np.linalg.norm(a - b, axis=(1, 2)) / np.linalg.norm(a, axis=(1, 2))).max() <= 1e-11


def test_quadrature_shape_mismatch():
    with pytest.raises(ValueError):
        QuadratureRule(np.zeros((4, 2)), np.ones(3))


# -- loads --------------------------------------------------------------------------------

def test_zero_load():
    mesh = plate()
    fe = element_load(mesh, np.arange(mesh.n_elements), lambda x, rs: np.zeros(3))
    np.testing.assert_array_equal(fe, 0)


def test_constant_load_total_on_unit_square():
    mesh = plate(2, 3)
    force = np.array([0.5, -1.0, 2.0])
    _, f = assemble_system(mesh, MAT, lambda x, rs: force)
    np.testing.assert_allclose(f.reshape(3, -1).sum(1), force * 1.0, rtol=1e-13)


def test_scordelis_gravity_total():
    case = case_scordelis_lo()
    mesh = case.build_mesh(3, 4)
    _, f = assemble_system(mesh, case.material, case.load)
    # area of the exact cylindrical panel: R * opening angle * length
    area = 25.0 * np.deg2rad(80.0) * 50.0
    totals = f.reshape(3, -1).sum(1)
    # the rational area element is integrated by Gauss quadrature, not exactly
    assert abs(totals[2] + 90.0 * area) <= 1e-10 * 90.0 * area
    np.testing.assert_allclose(totals[:2], 0, atol=1e-9)


def test_point_load_is_consistent():
    mesh = plate(3, 3)
    f = point_load_vector(mesh, (0.4, 0.7), np.array([1.0, 2.0, -3.0]))
    np.testing.assert_allclose(f.reshape(3, -1).sum(1), [1.0, 2.0, -3.0], rtol=1e-14)


# -- constraints ----------------------------------------------------------------------------

def test_free_edge_has_no_constraints():
    C = constraint_matrix(plate(), BoundaryCondition("r0", "free"))
    assert C.shape[1] == 0


def test_unknown_condition_rejected():
    with pytest.raises(ValueError):
        BoundaryCondition("r0", "glued")
    with pytest.raises(ValueError):
        BoundaryCondition("q3", "free")


def test_simply_supported_linear_mass_matrix():
    length = 2.0
    mesh = Mesh.from_patch(bilinear_patch([[0, 0, 0], [1, 0, 0], [0, length, 0], [1, length, 0]]))
    C = constraint_matrix(mesh, BoundaryCondition("r0", "simply_supported")).toarray()
    assert C.shape == (12, 6)
    nb = mesh.n_basis
    edge = mesh.space.edge_functions("r0")
    mass = length * np.array([[1 / 3, 1 / 6], [1 / 6, 1 / 3]])
    for k in range(3):
        block = C[k * nb + edge][:, 2 * k : 2 * k + 2]
        np.testing.assert_allclose(block, mass, rtol=1e-14)
        others = np.delete(C[:, 2 * k : 2 * k + 2], k * nb + edge, axis=0)
        np.testing.assert_array_equal(others, 0)


def test_clamped_rotation_row_ignores_in_plane_motion():
    mesh = plate(3, 2)
    C = constraint_matrix(mesh, BoundaryCondition("s0", "clamped")).toarray()
    nb = mesh.n_basis
    rot = C[:, -len(mesh.space.edge_functions("s0")) :]
    rng = np.random.default_rng(13)
    u = np.zeros((3, nb))
    u[:2] = rng.normal(size=(2, nb))
    np.testing.assert_allclose(rot.T @ u.ravel(), 0, atol=1e-14)
    u[2] = rng.normal(size=nb)
    assert np.abs(rot.T @ u.ravel()).max() > 1e-3


def test_edge_conormal_points_outward():
    mesh = plate(2, 2)
    centre = np.array([0.5, 0.5, 0.0])
    for edge in ("r0", "r1", "s0", "s1"):
        ed = edge_quadrature(mesh, edge)
        assert np.all(np.einsum("qi,qi->q", ed.n_bnd, ed.x - centre) > 0)
        np.testing.assert_allclose(ed.w.sum(), 1.0, rtol=1e-14)


def test_filter_removes_duplicate_columns():
    rng = np.random.default_rng(14)
    A = rng.normal(size=(10, 3))
    C = np.hstack([A, 2.0 * A[:, :1]])
    kept, removed = filter_constraints(C)
    assert removed == 1 and len(kept) == 3


# -- solve ------------------------------------------------------------------------------------

def clamped_plate_problem(load=None, p=3, n=3):
    bcs = [BoundaryCondition(e, "clamped") for e in ("r0", "r1", "s0", "s1")]
    return ShellProblem(plate(p, n), MAT, bcs, load)


def test_clamped_plate_without_load():
    sol = solve_problem(clamped_plate_problem())
    np.testing.assert_array_equal(sol.u, 0)
    assert sol.energy == 0


def test_solve_residual_and_symmetry_of_deflection():
    sol = solve_problem(clamped_plate_problem(lambda x, rs: np.array([0, 0, -1.0])), keep_matrices=True)
    assert sol.residual <= 1e-10
    uz = sol.coefficients[2].reshape(6, 6)
    np.testing.assert_allclose(uz, uz[::-1, :], rtol=1e-8, atol=1e-14)
    np.testing.assert_allclose(uz, uz.T, rtol=1e-8, atol=1e-14)
    # the discrete constraints hold
    assert np.abs(sol.C.T @ sol.u).max() <= 1e-10 * np.abs(sol.u).max()


def test_clamped_plate_centre_deflection():
    # series solution for the clamped square plate: w = 0.00126532 q a^4 / D
    sol = solve_problem(clamped_plate_problem(lambda x, rs: np.array([0, 0, -1.0]), p=4, n=8))
    w = displacement_at(sol, np.array([[0.5, 0.5]]))[0, 2]
    assert abs(-w * MAT.D_B / 0.00126532 - 1) < 1e-4


def test_singular_system_reports_nullity():
    problem = ShellProblem(plate(2, 2), MAT, [BoundaryCondition("r0", "simply_supported")], lambda x, rs: np.array([0, 0, 1.0]))
    with pytest.raises(SingularSystemError) as info:
        solve_problem(problem)
    assert info.value.nullity == 1


def test_mean_constraint_removes_translation():
    case = case_scordelis_lo()
    problem = case.problem(2, 2)
    problem.bcs = [bc for bc in problem.bcs if not isinstance(bc, MeanConstraint)]
    with pytest.raises(SingularSystemError) as info:
        solve_problem(problem)
    assert info.value.nullity == 1
    sol = solve_problem(case.problem(2, 2))
    assert sol.residual <= 1e-10


def test_variant_solutions_agree():
    problem = clamped_plate_problem(lambda x, rs: np.array([0.1, 0, -1.0]))
    K1, f1 = assemble_system(problem.mesh, MAT, problem.load, variant="covariant")
    K2, f2 = assemble_system(problem.mesh, MAT, problem.load, variant="directional")
    assert abs(K1 - K2).max() <= 1e-12 * abs(K1).max()
    np.testing.assert_array_equal(f1, f2)


def test_dump_system_roundtrip(tmp_path):
    sol = solve_problem(clamped_plate_problem(lambda x, rs: np.array([0, 0, -1.0]), p=2, n=2), keep_matrices=True)
    path = tmp_path / "system.mtx"
    dump_system(path, sol.K, sol.C, sol.f)
    A = scipy.io.mmread(path).tocsr()
    nd, m = sol.K.shape[0], sol.C.shape[1]
    assert A.shape == (nd + m, nd + m)
    assert abs(A[:nd, :nd] - sol.K).max() == 0
    b = np.loadtxt(str(path) + ".rhs")
    np.testing.assert_array_equal(b[:nd], sol.f)


def test_quadrature_override_changes_nothing_for_exact_rules():
    mesh = plate(2, 2)
    K1, _ = assemble_system(mesh, MAT)
    K2, _ = assemble_system(mesh, MAT, rule=gauss_rule(6))
    assert abs(K1 - K2).max() <= 1e-12 * abs(K1).max()
