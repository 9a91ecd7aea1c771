"""Operator property checks and the TDC-versus-classical fuzz comparison.

Each check returns a :class:`CheckResult`; :func:`run_suite` runs them all
and is what ``tdcshell verify`` prints.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .assembly import _global_dofs, element_stiffness
from .classical import element_stiffness_classical
from .nurbs import (
    AnalyticSurface,
    NurbsPatch,
    bilinear_patch,
    cylinder_patch,
    eval_basis,
    eval_geometry,
)
from .shell import Material
from .tdc import (
    SurfaceJets,
    build_frame,
    frame_from_jets,
    hessian_cov,
    hessian_dir,
    high_order_derivatives,
    projector,
    tangential_gradient_scalar,
)

DEFAULT_SEED = 20240611


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<44s} {self.value:.3e} (tol {self.tolerance:.1e})"


def _check(name, value, tol):
    value = float(value)
    return CheckResult(name, bool(np.isfinite(value) and value <= tol), value, tol)


# -- test geometries -----------------------------------------------------------

def random_patch(rng, degree=None, spans=2, amplitude=0.15):
    """Random smooth rational patch: perturbed, curved, non-uniformly weighted."""
    for _ in range(100):
        p = degree or int(rng.integers(2, 4))
        corners = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]], float)
        corners += rng.normal(scale=0.1, size=corners.shape)
        patch = bilinear_patch(corners).refined(p, spans)
        cp = patch.control_points + rng.normal(scale=amplitude, size=patch.control_points.shape)
        w = rng.uniform(0.7, 1.3, size=patch.weights.shape)
        patch = NurbsPatch(patch.knot_u, patch.knot_v, cp, w)
        try:
            for e in range(patch.space.n_elements):
                for pt in rng.random((4, 2)):
                    (r0, r1), (s0, s1) = patch.space.element_bounds(e)
                    build_frame(eval_geometry(patch, e, (r0 + pt[0] * (r1 - r0), s0 + pt[1] * (s1 - s0)), 2))
        except (ValueError, np.linalg.LinAlgError):
            continue
        return patch
    raise RuntimeError("could not generate a nondegenerate random patch")


def sphere_surface(radius, inward=True):
    """Sphere patch away from the poles; ``inward`` orients ``J_r x J_s`` to the centre."""

    def f(r, s):
        pts = [radius * r.cos() * s.cos(), radius * r.sin() * s.cos(), radius * s.sin()]
        return pts

    def g(r, s):
        return f(s, r)

    return AnalyticSurface(f if not inward else g, "sphere")


def _random_points(rng, patch, k):
    out = []
    for _ in range(k):
        e = int(rng.integers(patch.space.n_elements))
        (r0, r1), (s0, s1) = patch.space.element_bounds(e)
        a, b = rng.uniform(0.1, 0.9, 2)
        out.append((e, (r0 + a * (r1 - r0), s0 + b * (s1 - s0))))
    return out


# -- checks --------------------------------------------------------------------

def check_projector(rng):
    worst = 0.0
    for _ in range(50):
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        P = projector(n)
        worst = max(worst, np.abs(P @ P - P).max(), np.abs(P - P.T).max(), np.abs(P @ n).max())
    return _check("projector symmetric/idempotent/annihilates n", worst, 1e-12)


def check_frames(rng, patches):
    worst = 0.0
    for patch in patches:
        for e, pt in _random_points(rng, patch, 8):
            fr = build_frame(eval_geometry(patch, e, pt, 2))
            H, P, n = fr.H, fr.P, fr.n
            worst = max(
                worst,
                np.abs(H - H.T).max(),
                np.abs(H @ n).max(),
                np.abs(P @ H @ P - H).max(),
                abs(fr.gauss_curvature - fr.kappa1 * fr.kappa2),
                abs(np.trace(H) + fr.kappa1 + fr.kappa2),
            )
    return _check("Weingarten map in-plane/symmetric, K = k1 k2", worst, 1e-10)


def check_curvatures():
    R = 3.0
    sph = sphere_surface(R, inward=True)
    sj = SurfaceJets(sph.geometry_jets(None, np.array([[[0.4, 0.3]]]), 2))
    fr = frame_from_jets(sj)
    err = max(abs(fr.kappa1[0] - 1 / R), abs(fr.kappa2[0] - 1 / R), abs(fr.mean_curvature[0] + 2 / R))
    cyl = cylinder_patch(25.0, (-0.6, 0.6), (0.0, 50.0), inward=True)
    fc = build_frame(eval_geometry(cyl, 0, (0.3, 0.4), 2))
    err = max(err, abs(fc.kappa1 - 1 / 25), abs(fc.kappa2), abs(fc.gauss_curvature))
    return _check("principal curvatures: sphere 1/R, cylinder 1/25", err, 1e-10)


def check_gradient_extension():
    """Tangential gradient of the pull-back of z equals P e_z on a sphere."""
    R = 2.0
    sph = sphere_surface(R, inward=False)
    rs = np.array([[[0.3, 0.2], [1.1, -0.4], [2.0, 0.7]]])
    x = sph.geometry_jets(None, rs, 2)
    sj = SurfaceJets(x)
    gz = sj.grad(x[:, 2]).value
    Pz = sj.P.value[:, :, 2]
    return _check("grad of pull-back equals P grad of extension", np.abs(gz - Pz).max(), 1e-10)


def _fd_parametric(fun, pt, h):
    r, s = pt
    dr = (fun((r + h, s)) - fun((r - h, s))) / (2 * h)
    ds = (fun((r, s + h)) - fun((r, s - h))) / (2 * h)
    return dr, ds


def _rel_err(a, b):
    return np.abs(a - b).max() / max(np.abs(b).max(), 1e-300)


def check_basis_fd(rng, patches):
    worst_pu = 0.0
    worst_fd = 0.0
    for patch in patches:
        for e, pt in _random_points(rng, patch, 10):
            b = eval_basis(patch, e, pt, 4)
            worst_pu = max(worst_pu, abs(b.values.sum() - 1), np.abs(b.ders.sum(0)[1:, 0]).max(), np.abs(b.ders.sum(0)[0, 1:]).max())
            h = 1e-5

            def low(q, a, c):
                return eval_basis(patch, e, q, 4).ders[:, a, c]

            for a in range(4):
                for c in range(4 - a):
                    dr, ds = _fd_parametric(lambda q: low(q, a, c), pt, h)
                    tol_scale = 10.0 ** (a + c)
                    worst_fd = max(worst_fd, _rel_err(dr, b.ders[:, a + 1, c]) / tol_scale, _rel_err(ds, b.ders[:, a, c + 1]) / tol_scale)
    return [
        _check("partition of unity and zero-sum derivatives", worst_pu, 1e-12),
        _check("basis derivatives vs finite differences", worst_fd, 1e-6),
    ]


def check_geometry_fd(rng, patches):
    worst = 0.0
    for patch in patches:
        for e, pt in _random_points(rng, patch, 6):
            g = eval_geometry(patch, e, pt, 4)
            h = 1e-5
            for a in range(4):
                for c in range(4 - a):
                    dr, ds = _fd_parametric(lambda q: eval_geometry(patch, e, q, 4).ders[:, a, c], pt, h)
                    scale = 10.0 ** (a + c)
                    worst = max(worst, _rel_err(dr, g.ders[:, a + 1, c]) / scale, _rel_err(ds, g.ders[:, a, c + 1]) / scale)
    return _check("surface map derivatives vs finite differences", worst, 1e-6)


def _surface_fd(patch, e, pt, fun, h=1e-5):
    """Tangential derivative of ``fun(point)`` by parametric central differences mapped by Q."""
    fr = build_frame(eval_geometry(patch, e, pt, 2))
    dr, ds = _fd_parametric(fun, pt, h)
    return np.einsum("...a,ja->...j", np.stack([dr, ds], -1), fr.Q)


def check_hessians(rng, patches):
    worst_fd = 0.0
    worst_sym = 0.0
    worst_tr = 0.0
    worst_jet = 0.0
    for patch in patches:
        for e, pt in _random_points(rng, patch, 4):
            b = eval_basis(patch, e, pt, 4)
            g = eval_geometry(patch, e, pt, 4)
            fr = build_frame(g)
            hd = hessian_dir(b, g, fr)
            hc = hessian_cov(hd, fr)
            worst_sym = max(worst_sym, np.abs(hc - np.swapaxes(hc, -1, -2)).max() / np.abs(hc).max(), np.abs(hc @ fr.n).max() / np.abs(hc).max())
            worst_tr = max(worst_tr, np.abs(np.trace(hc, axis1=1, axis2=2) - np.trace(hd, axis1=1, axis2=2)).max() / np.abs(hd).max())

            def grad_at(q):
                return tangential_gradient_scalar(eval_basis(patch, e, q, 2), build_frame(eval_geometry(patch, e, q, 2)))

            fd = _surface_fd(patch, e, pt, grad_at)
            worst_fd = max(worst_fd, _rel_err(fd, hd))
            ho = high_order_derivatives(b, g)
            worst_jet = max(worst_jet, _rel_err(ho[1], hd))

            def hess_at(q):
                return hessian_dir(eval_basis(patch, e, q, 2), eval_geometry(patch, e, q, 2))

            fd3 = _surface_fd(patch, e, pt, hess_at)
            worst_fd = max(worst_fd, _rel_err(fd3, ho[2]) / 10)

            def third_at(q):
                return high_order_derivatives(eval_basis(patch, e, q, 4), eval_geometry(patch, e, q, 4), 3)[2]

            fd4 = _surface_fd(patch, e, pt, third_at)
            worst_fd = max(worst_fd, _rel_err(fd4, ho[3]) / 100)
    return [
        _check("covariant Hessian symmetric and in-plane", worst_sym, 1e-10),
        _check("trace of directional = trace of covariant", worst_tr, 1e-10),
        _check("Hessian formula equals repeated gradient", worst_jet, 1e-10),
        _check("surface derivatives (2nd-4th) vs finite differences", worst_fd, 1e-5),
    ]


def check_directional_nonsymmetric():
    cyl = cylinder_patch(25.0, (-0.6, 0.6), (0.0, 50.0)).refined(3, 1)
    b = eval_basis(cyl, 0, (0.37, 0.61), 2)
    g = eval_geometry(cyl, 0, (0.37, 0.61), 2)
    hd = hessian_dir(b, g)
    asym = np.abs(hd - np.swapaxes(hd, -1, -2)).max()
    return CheckResult("directional Hessian nonsymmetric on a cylinder", bool(asym > 1e-8), asym, 1e-8)


def check_free_plate_modes():
    plate = bilinear_patch([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]]).refined(3, 2)
    mat = Material(1e4, 0.3, 0.01)
    em = element_stiffness(plate, np.arange(plate.space.n_elements), mat)
    nb = plate.space.n_basis
    K = np.zeros((3 * nb, 3 * nb))
    dofs = _global_dofs(em.conn, nb)
    for c in range(len(dofs)):
        K[np.ix_(dofs[c], dofs[c])] += em.K[c]
    w = scipy.linalg.eigvalsh(K)
    ratio = np.abs(w) / np.abs(w).max()
    nzero = int(np.sum(ratio <= 1e-9))
    return CheckResult("free flat patch has exactly 6 rigid modes", nzero == 6 and ratio[6] > 1e-9, float(nzero), 6.0)


def check_oracle(rng, n_fuzz=100, tol=1e-9):
    from .bench import CASES

    worst = 0.0
    for make in CASES.values():
        case = make()
        mesh = case.build_mesh(3, 2)
        elems = np.arange(mesh.n_elements)
        a = element_stiffness(mesh, elems, case.material).K
        b = element_stiffness_classical(mesh, elems, case.material).K
        worst = max(worst, (np.linalg.norm(a - b, axis=(1, 2)) / np.linalg.norm(a, axis=(1, 2))).max())
    bench_worst = worst
    worst = 0.0
    for _ in range(n_fuzz):
        patch = random_patch(rng)
        mat = Material(float(rng.uniform(1, 1e3)), float(rng.uniform(0, 0.45)), float(rng.uniform(0.01, 0.2)))
        elems = np.arange(patch.space.n_elements)
        a = element_stiffness(patch, elems, mat).K
        b = element_stiffness_classical(patch, elems, mat).K
        worst = max(worst, (np.linalg.norm(a - b, axis=(1, 2)) / np.linalg.norm(a, axis=(1, 2))).max())
    return [
        _check("TDC vs classical, benchmark patches", bench_worst, tol),
        _check(f"TDC vs classical, {n_fuzz} fuzzed patches", worst, tol),
    ]


def run_suite(seed=DEFAULT_SEED, n_fuzz=100):
    rng = np.random.default_rng(seed)
    patches = [random_patch(rng) for _ in range(3)] + [cylinder_patch(25.0, (-0.6, 0.6), (0.0, 50.0)).refined(4, 2)]
    results = [check_projector(rng), check_frames(rng, patches), check_curvatures(), check_gradient_extension()]
    results += check_basis_fd(rng, patches[:2])
    results.append(check_geometry_fd(rng, patches[:2]))
    results += check_hessians(rng, patches[:2] + patches[-1:])
    results.append(check_directional_nonsymmetric())
    results.append(check_free_plate_modes())
    results += check_oracle(rng, n_fuzz)
    return results

