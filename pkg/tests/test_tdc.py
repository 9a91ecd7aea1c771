import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tdcshell.nurbs import bilinear_patch, cylinder_patch, eval_basis, eval_geometry
from tdcshell.tdc import (
    SurfaceJets,
    build_frame,
    frame_from_jets,
    hessian_cov,
    hessian_dir,
    high_order_derivatives,
    inject_fault,
    projector,
    surface_divergence,
    tangential_gradient_scalar,
)
from tdcshell.verification import random_patch, sphere_surface

FLAT_NORMAL = np.array([-0.25, -np.sqrt(3) / 2, np.sqrt(3) / 4])
UNIT_SQUARE = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]]


def flat(p=3, n=1):
    return bilinear_patch(UNIT_SQUARE).refined(p, n)


def cylinder(p=3, n=2, inward=False):
    return cylinder_patch(25.0, (-0.7, 0.7), (0.0, 50.0), inward=inward).refined(p, n)


def frame_at(patch, pt, d=2, elem=None):
    elem = patch.space.element_of(*pt) if elem is None else elem
    return build_frame(eval_geometry(patch, elem, pt, d))


def fit_coefficients(patch, elem, func, k=12):
    """Least-squares coefficients of ``func(x)`` in the element's local basis."""
    (r0, r1), (s0, s1) = patch.space.element_bounds(elem)
    rows, rhs = [], []
    for a in np.linspace(0, 1, k):
        for b in np.linspace(0, 1, k):
            pt = (r0 + a * (r1 - r0), s0 + b * (s1 - s0))
            rows.append(eval_basis(patch, elem, pt, 0).values)
            rhs.append(func(eval_geometry(patch, elem, pt, 0).x))
    return np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=None)[0]


# -- projector ------------------------------------------------------------------

def test_projector_z():
    np.testing.assert_allclose(projector([0, 0, 1.0]), np.diag([1.0, 1.0, 0.0]))


def test_projector_flat_normal_spectrum():
    P = projector(FLAT_NORMAL)
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(P)), [0, 1, 1], atol=1e-15)


def test_projector_rejects_non_unit():
    with pytest.raises(ValueError):
        projector([0, 0, 2.0])


@settings(max_examples=50, deadline=None)
@given(arrays(float, 3, elements=st.floats(-1, 1)).filter(lambda v: np.linalg.norm(v) > 0.1))
def test_projector_properties(v):
    n = v / np.linalg.norm(v)
    P = projector(n)
    np.testing.assert_allclose(P @ n, 0, atol=1e-15)
    np.testing.assert_allclose(P @ P, P, atol=1e-15)
    np.testing.assert_allclose(P, P.T)


# -- frames and curvature --------------------------------------------------------------

def test_flat_frame_has_no_curvature():
    fr = frame_at(flat(), (0.3, 0.6))
    np.testing.assert_allclose(fr.H, 0, atol=1e-14)
    assert abs(fr.kappa1) < 1e-14 and abs(fr.kappa2) < 1e-14 and abs(fr.mean_curvature) < 1e-14
    np.testing.assert_allclose(fr.n, [0, 0, 1])


def test_weingarten_map_matches_fd_of_normal():
    # oracle: tangential derivative of the normal by central differences of the frame
    patch = cylinder(inward=True)
    pt, h = (0.4, 0.3), 1e-5
    fr = frame_at(patch, pt)
    dn_r = (frame_at(patch, (pt[0] + h, pt[1])).n - frame_at(patch, (pt[0] - h, pt[1])).n) / (2 * h)
    dn_s = (frame_at(patch, (pt[0], pt[1] + h)).n - frame_at(patch, (pt[0], pt[1] - h)).n) / (2 * h)
    H_fd = np.outer(dn_r, fr.Q[:, 0]) + np.outer(dn_s, fr.Q[:, 1])
    np.testing.assert_allclose(fr.H, H_fd, atol=1e-8)


def test_cylinder_curvatures():
    fr = frame_at(cylinder(inward=True), (0.4, 0.3))
    assert abs(fr.kappa1 - 1 / 25) < 1e-12
    assert abs(fr.kappa2) < 1e-12
    assert abs(fr.gauss_curvature) < 1e-14


def test_sphere_curvatures_positive():
    R = 4.0
    sj = SurfaceJets(sphere_surface(R, inward=True).geometry_jets(None, np.array([[[0.2, 0.5]]]), 2))
    fr = frame_from_jets(sj)
    np.testing.assert_allclose([fr.kappa1[0], fr.kappa2[0]], [1 / R, 1 / R], rtol=1e-12)
    assert abs(fr.gauss_curvature[0] - 1 / R**2) < 1e-12


def test_weingarten_invariants_random():
    rng = np.random.default_rng(5)
    for _ in range(4):
        patch = random_patch(rng)
        fr = frame_at(patch, tuple(rng.uniform(0.1, 0.9, 2)))
        np.testing.assert_allclose(fr.H, fr.H.T, atol=1e-10)
        np.testing.assert_allclose(fr.H @ fr.n, 0, atol=1e-10)
        assert abs(np.trace(fr.H) + fr.kappa1 + fr.kappa2) < 1e-10


def test_fault_flips_curvature_sign():
    patch = cylinder(inward=True)
    with inject_fault("weingarten-sign"):
        fr = frame_at(patch, (0.4, 0.3))
    assert fr.kappa2 < 0
    with pytest.raises(ValueError), inject_fault("no-such-fault"):
        pass


# -- gradients and divergence --------------------------------------------------------------

def test_gradient_of_x_on_flat_patch():
    patch = flat(2, 1)
    c = fit_coefficients(patch, 0, lambda x: x[0])
    b = eval_basis(patch, 0, (0.3, 0.7), 1)
    g = tangential_gradient_scalar(b, frame_at(patch, (0.3, 0.7), 1))
    np.testing.assert_allclose(c @ g, [1, 0, 0], atol=1e-12)


def test_gradient_is_tangential():
    rng = np.random.default_rng(6)
    patch = random_patch(rng)
    pt = tuple(rng.uniform(0.1, 0.9, 2))
    e = patch.space.element_of(*pt)
    g = tangential_gradient_scalar(eval_basis(patch, e, pt, 1), frame_at(patch, pt, 1))
    np.testing.assert_allclose(g @ frame_at(patch, pt, 1).n, 0, atol=1e-12)


def test_gradient_of_z_on_sphere():
    rs = np.array([[[0.3, 0.2], [1.1, -0.4]]])
    x = sphere_surface(2.0, inward=False).geometry_jets(None, rs, 1)
    sj = SurfaceJets(x)
    np.testing.assert_allclose(sj.grad(x[:, 2]).value, sj.P.value[:, :, 2], atol=1e-12)


def test_divergence_cases():
    # constant field
    g = np.zeros((3, 3))
    assert surface_divergence(g) == 0
    # flat patch, v = (x, y, 0): grad v = diag(1, 1, 0)
    x = flat(1, 1).geometry_jets([0], np.array([[[0.2, 0.4]]]), 1)
    sj = SurfaceJets(x)
    v = x * 1.0
    assert abs(surface_divergence(sj.grad(v).value[0]) - 2) < 1e-14
    # sphere with outward normal: div n = 2 / R
    R = 3.0
    sj = SurfaceJets(sphere_surface(R, inward=False).geometry_jets(None, np.array([[[0.5, 0.1]]]), 2))
    assert abs(surface_divergence(sj.grad(sj.n).value[0]) - 2 / R) < 1e-12


# -- Hessians --------------------------------------------------------------------------

def test_flat_hessians_coincide():
    patch = flat(3, 2)
    e = patch.space.element_of(0.7, 0.2)
    b = eval_basis(patch, e, (0.7, 0.2), 2)
    g = eval_geometry(patch, e, (0.7, 0.2), 2)
    fr = build_frame(g)
    hd = hessian_dir(b, g, fr)
    np.testing.assert_allclose(hd, np.swapaxes(hd, 1, 2), atol=1e-12)
    np.testing.assert_allclose(hessian_cov(hd, fr), hd, atol=1e-12)


def test_cylinder_directional_hessian_nonsymmetric():
    patch = cylinder(3, 1)
    b = eval_basis(patch, 0, (0.37, 0.61), 2)
    g = eval_geometry(patch, 0, (0.37, 0.61), 2)
    hd = hessian_dir(b, g)
    assert np.abs(hd - np.swapaxes(hd, 1, 2)).max() > 1e-6


def test_hessian_against_surface_fd():
    patch = cylinder(3, 2)
    pt, h = (0.3, 0.6), 1e-5
    e = patch.space.element_of(*pt)
    fr = frame_at(patch, pt)
    hd = hessian_dir(eval_basis(patch, e, pt, 2), eval_geometry(patch, e, pt, 2), fr)

    def grad(q):
        return tangential_gradient_scalar(eval_basis(patch, e, q, 1), frame_at(patch, q, 1, e))

    dr = (grad((pt[0] + h, pt[1])) - grad((pt[0] - h, pt[1]))) / (2 * h)
    ds = (grad((pt[0], pt[1] + h)) - grad((pt[0], pt[1] - h))) / (2 * h)
    fd = np.einsum("Fia,ja->Fij", np.stack([dr, ds], -1), fr.Q)
    np.testing.assert_allclose(hd, fd, rtol=0, atol=1e-5 * np.abs(hd).max())


def test_covariant_hessian_properties_random():
    rng = np.random.default_rng(7)
    for _ in range(4):
        patch = random_patch(rng)
        pt = tuple(rng.uniform(0.1, 0.9, 2))
        e = patch.space.element_of(*pt)
        g = eval_geometry(patch, e, pt, 2)
        fr = build_frame(g)
        hd = hessian_dir(eval_basis(patch, e, pt, 2), g, fr)
        hc = hessian_cov(hd, fr)
        scale = np.abs(hc).max()
        assert np.abs(hc - np.swapaxes(hc, 1, 2)).max() <= 1e-10 * scale
        assert np.abs(hc @ fr.n).max() <= 1e-10 * scale
        np.testing.assert_allclose(np.trace(hc, axis1=1, axis2=2), np.trace(hd, axis1=1, axis2=2), atol=1e-10 * scale)


# -- higher derivatives ------------------------------------------------------------------

def test_fourth_derivative_of_quartic():
    patch = flat(4, 1)
    c = fit_coefficients(patch, 0, lambda x: x[0] ** 4)
    ho = high_order_derivatives(eval_basis(patch, 0, (0.4, 0.6), 4), eval_geometry(patch, 0, (0.4, 0.6), 4))
    d4 = np.einsum("F,Fijkl->ijkl", c, ho[3])
    assert abs(d4[0, 0, 0, 0] - 24) < 1e-8
    np.testing.assert_allclose(np.delete(d4.ravel(), 0), 0, atol=1e-8)


def test_third_derivative_against_fd_on_cylinder():
    patch = cylinder(4, 1)
    pt, h = (0.45, 0.35), 1e-5
    ho = high_order_derivatives(eval_basis(patch, 0, pt, 4), eval_geometry(patch, 0, pt, 4), 3)
    fr = frame_at(patch, pt)

    def hess(q):
        return hessian_dir(eval_basis(patch, 0, q, 2), eval_geometry(patch, 0, q, 2))

    dr = (hess((pt[0] + h, pt[1])) - hess((pt[0] - h, pt[1]))) / (2 * h)
    ds = (hess((pt[0], pt[1] + h)) - hess((pt[0], pt[1] - h))) / (2 * h)
    fd = np.einsum("Fija,ka->Fijk", np.stack([dr, ds], -1), fr.Q)
    np.testing.assert_allclose(ho[2], fd, rtol=0, atol=1e-4 * np.abs(ho[2]).max())


def test_third_derivative_contraction_is_gradient_of_laplacian():
    patch = cylinder(4, 1)
    pt, h = (0.45, 0.35), 1e-5
    ho = high_order_derivatives(eval_basis(patch, 0, pt, 4), eval_geometry(patch, 0, pt, 4), 3)
    fr = frame_at(patch, pt)
    contraction = np.einsum("Fiik->Fk", ho[2])

    def lap(q):
        return np.trace(hessian_dir(eval_basis(patch, 0, q, 2), eval_geometry(patch, 0, q, 2)), axis1=1, axis2=2)

    dr = (lap((pt[0] + h, pt[1])) - lap((pt[0] - h, pt[1]))) / (2 * h)
    ds = (lap((pt[0], pt[1] + h)) - lap((pt[0], pt[1] - h))) / (2 * h)
    fd = np.stack([dr, ds], -1) @ fr.Q.T
    np.testing.assert_allclose(contraction, fd, rtol=0, atol=1e-5 * np.abs(contraction).max())


def test_high_order_requires_derivatives():
    patch = flat(4, 1)
    with pytest.raises(ValueError):
        high_order_derivatives(eval_basis(patch, 0, (0.5, 0.5), 2), eval_geometry(patch, 0, (0.5, 0.5), 2))
