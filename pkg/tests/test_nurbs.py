import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tdcshell.nurbs import (
    DegenerateGeometryError,
    KnotVector,
    Mesh,
    NurbsPatch,
    PointOutsideElementError,
    SplineSpace,
    bilinear_patch,
    cylinder_patch,
    eval_basis,
    eval_geometry,
    gauss_rule,
    read_patch,
    write_patch,
)
from tdcshell.verification import random_patch

UNIT_SQUARE = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]]


def quarter_arc(radius=2.0):
    """Rational quadratic quarter circle in x-z, extruded linearly along y."""
    w = np.sqrt(2) / 2
    cp = np.array([[[radius, 0, 0], [radius, 1, 0]], [[radius, 0, radius], [radius, 1, radius]], [[0, 0, radius], [0, 1, radius]]])
    weights = np.array([[1, 1], [w, w], [1, 1]])
    return NurbsPatch(KnotVector([0, 0, 0, 1, 1, 1], 2), KnotVector([0, 0, 1, 1], 1), cp, weights)


# -- knot vectors ----------------------------------------------------------------

def test_knot_vector_validation():
    with pytest.raises(ValueError):
        KnotVector([0, 0, 1, 1], 0)
    with pytest.raises(ValueError):
        KnotVector([0, 1, 0.5, 1], 1)
    with pytest.raises(ValueError):
        KnotVector([0, 0, 0.5, 1, 1], 2)
    with pytest.raises(ValueError):
        KnotVector([0, 0, 0, 0.5, 0.5, 0.5, 1, 1, 1], 2)


def test_knot_vector_counts():
    kv = KnotVector([0, 0, 0, 0.5, 1, 1, 1], 2)
    assert kv.n_basis == 4
    assert kv.n_spans == 2
    assert kv.span_bounds(1) == (0.5, 1.0)
    np.testing.assert_array_equal(kv.span_functions(1), [1, 2, 3])
    np.testing.assert_array_equal(kv.find_span([0.0, 0.49, 0.5, 1.0]), [0, 0, 1, 1])


def test_periodic_space_wraps():
    kv = KnotVector(np.linspace(-1, 1, 5), 3, periodic=True)
    assert kv.n_basis == kv.n_spans == 4
    np.testing.assert_array_equal(kv.span_functions(3), [3, 0, 1, 2])


@pytest.mark.parametrize("p", [2, 3, 4])
def test_periodic_seam_continuity(p):
    kv = KnotVector(np.linspace(-1, 1, 7), p, periodic=True)
    left = kv.ders_basis(0, -1.0, p - 1)
    right = kv.ders_basis(kv.n_spans - 1, 1.0, p - 1)
    fl, fr = kv.span_functions(0), kv.span_functions(kv.n_spans - 1)
    full_l = np.zeros((p, kv.n_basis))
    full_r = np.zeros((p, kv.n_basis))
    full_l[:, fl] = left
    full_r[:, fr] = right
    np.testing.assert_allclose(full_l, full_r, atol=1e-10)


# -- basis -------------------------------------------------------------------------

def test_quadratic_bezier_values():
    # Cox-de Boor by hand: (1-r)^2, 2r(1-r), r^2 at r = 1/2
    kv = KnotVector([0, 0, 0, 1, 1, 1], 2)
    vals = kv.ders_basis(0, 0.5, 0)[0]
    np.testing.assert_allclose(vals, [0.25, 0.5, 0.25], rtol=0, atol=1e-15)


def test_partition_of_unity_random_patches():
    rng = np.random.default_rng(1)
    for _ in range(5):
        patch = random_patch(rng)
        for e in range(patch.space.n_elements):
            (r0, r1), (s0, s1) = patch.space.element_bounds(e)
            a, b = rng.random(2)
            basis = eval_basis(patch, e, (r0 + a * (r1 - r0), s0 + b * (s1 - s0)), 2)
            assert abs(basis.values.sum() - 1) < 1e-13
            assert np.all(basis.values >= -1e-15)


def test_basis_derivatives_finite_differences():
    rng = np.random.default_rng(2)
    patch = random_patch(rng, degree=3)
    h = 1e-6
    for _ in range(20):
        e = int(rng.integers(patch.space.n_elements))
        (r0, r1), (s0, s1) = patch.space.element_bounds(e)
        r = r0 + rng.uniform(0.1, 0.9) * (r1 - r0)
        s = s0 + rng.uniform(0.1, 0.9) * (s1 - s0)
        d = eval_basis(patch, e, (r, s), 1).ders
        fd = (eval_basis(patch, e, (r + h, s), 0).values - eval_basis(patch, e, (r - h, s), 0).values) / (2 * h)
        np.testing.assert_allclose(fd, d[:, 1, 0], rtol=1e-7, atol=1e-7 * np.abs(d[:, 1, 0]).max())


def test_eval_basis_errors():
    patch = bilinear_patch(UNIT_SQUARE).refined(2, 2)
    with pytest.raises(PointOutsideElementError):
        eval_basis(patch, 0, (0.9, 0.1), 1)
    with pytest.raises(ValueError):
        eval_basis(patch, 0, (0.1, 0.1), 5)
    with pytest.raises(ValueError):
        eval_basis(patch, 99, (0.1, 0.1), 1)


# -- geometry ------------------------------------------------------------------------

def test_flat_square_midpoint():
    g = eval_geometry(bilinear_patch(UNIT_SQUARE), 0, (0.5, 0.5), 1)
    np.testing.assert_allclose(g.x, [0.5, 0.5, 0.0], atol=1e-15)


def test_rational_arc_on_circle():
    patch = quarter_arc(2.0)
    for r in np.linspace(0, 1, 11):
        x = eval_geometry(patch, 0, (r, 0.3), 0).x
        assert abs(np.hypot(x[0], x[2]) - 2.0) < 1e-12


def test_second_derivative_finite_differences():
    patch = quarter_arc(2.0)
    h = 1e-5
    r, s = 0.37, 0.4
    d2 = eval_geometry(patch, 0, (r, s), 2).ders[:, 2, 0]
    fd = (eval_geometry(patch, 0, (r + h, s), 1).ders[:, 1, 0] - eval_geometry(patch, 0, (r - h, s), 1).ders[:, 1, 0]) / (2 * h)
    np.testing.assert_allclose(fd, d2, rtol=1e-6, atol=1e-6 * np.abs(d2).max())


def test_degenerate_geometry_rejected():
    collapsed = bilinear_patch([[0, 0, 0], [1, 0, 0], [0, 0, 0], [1, 0, 0]])
    with pytest.raises(DegenerateGeometryError):
        eval_geometry(collapsed, 0, (0.5, 0.5), 1)


def test_refinement_preserves_geometry():
    base = cylinder_patch(25.0, (-0.7, 0.7), (0.0, 50.0))
    fine = base.refined(4, 3)
    assert fine.degrees == (4, 4)
    assert fine.space.n_elements == 9
    rng = np.random.default_rng(3)
    for _ in range(10):
        r, s = rng.random(2)
        e_fine = fine.space.element_of(r, s)
        x0 = eval_geometry(base, 0, (r, s), 0).x
        x1 = eval_geometry(fine, e_fine, (r, s), 0).x
        np.testing.assert_allclose(x1, x0, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_cylinder_patch_exact(r, s):
    patch = cylinder_patch(25.0, (-0.7, 0.7), (0.0, 50.0)).refined(3, 2)
    x = eval_geometry(patch, patch.space.element_of(r, s), (r, s), 0).x
    assert abs(np.hypot(x[0], x[2]) - 25.0) < 1e-12


def test_mesh_from_patch():
    patch = bilinear_patch(UNIT_SQUARE).refined(3, 4)
    mesh = Mesh.from_patch(patch)
    assert mesh.isoparametric
    assert mesh.n_elements == 16
    assert mesh.n_basis == 49
    assert isinstance(mesh.space, SplineSpace)


# -- quadrature ------------------------------------------------------------------------

def test_gauss_one_point():
    rule = gauss_rule(1)
    np.testing.assert_allclose(rule.points, [[0, 0]], atol=0)
    np.testing.assert_allclose(rule.weights, [4.0])


def test_gauss_two_points():
    rule = gauss_rule(2)
    a = 1 / np.sqrt(3)
    np.testing.assert_allclose(np.sort(np.abs(rule.points), axis=0), a * np.ones((4, 2)), rtol=1e-15)
    np.testing.assert_allclose(rule.weights, np.ones(4), rtol=1e-15)
    integral = np.sum(rule.weights * rule.points[:, 0] ** 2 * rule.points[:, 1] ** 2)
    assert abs(integral - 4 / 9) < 1e-15


@pytest.mark.parametrize("n", [0, 17])
def test_gauss_range(n):
    with pytest.raises(ValueError):
        gauss_rule(n)


# -- patch files ------------------------------------------------------------------------

def test_patch_roundtrip(tmp_path):
    patch = cylinder_patch(3.0, (-0.4, 0.9), (0.0, 2.0)).refined(3, 2)
    path = tmp_path / "cyl.patch"
    write_patch(patch, path)
    back = read_patch(path)
    assert back.knot_u == patch.knot_u and back.knot_v == patch.knot_v
    np.testing.assert_array_equal(back.control_points, patch.control_points)
    np.testing.assert_array_equal(back.weights, patch.weights)


def test_patch_file_errors(tmp_path):
    bad = tmp_path / "bad.patch"
    bad.write_text("degree 1 1\nknots_u 4\n0 0 1 1\n")
    with pytest.raises(ValueError):
        read_patch(bad)
    bad.write_text("degree 1 1\nknots_u 4\n0 0 1 1\nknots_v 4\n0 0 1 1\ncontrol_points 2 2\n" + "0 0 0 1\n" * 4 + "7\n")
    with pytest.raises(ValueError):
        read_patch(bad)
