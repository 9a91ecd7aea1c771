"""Element stiffness in classical curvilinear shell notation.

Covariant base vectors ``a_alpha`` (columns of the Jacobian), the metric
``a_{alpha beta}`` and its inverse, Christoffel symbols of the second kind
and the curvilinear elasticity tensor. Used as a differential-testing oracle
for the tangential-calculus element matrices; it shares basis evaluation and
quadrature with the main path but none of the stiffness algebra.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import ElementMatrices, default_rule
from .nurbs import DegenerateGeometryError, Mesh, NurbsPatch


@dataclass
class CurvilinearFrame:
    a_cov: np.ndarray  # (..., 3, 2) covariant base vectors a_1, a_2 as columns
    a3: np.ndarray  # (..., 3)
    metric: np.ndarray  # (..., 2, 2)
    metric_inv: np.ndarray  # (..., 2, 2)
    christoffel: np.ndarray  # (..., 2, 2, 2)  Gamma[g, a, b]
    curvature: np.ndarray  # (..., 2, 2)  b_ab = a_{a,b} . a3
    jacobian: np.ndarray  # (..., ) sqrt(det a_ab)


def curvilinear_frame(geom_ders):
    """Frame from raw parametric derivatives ``geom_ders[..., 3, a, b]`` (order >= 2)."""
    d = np.asarray(geom_ders)
    a1, a2 = d[..., 1, 0], d[..., 0, 1]
    a_cov = np.stack([a1, a2], -1)
    metric = np.einsum("...ia,...ib->...ab", a_cov, a_cov)
    det = metric[..., 0, 0] * metric[..., 1, 1] - metric[..., 0, 1] ** 2
    if np.any(det <= 0):
        raise DegenerateGeometryError("degenerate metric")
    inv = np.stack([np.stack([metric[..., 1, 1], -metric[..., 0, 1]], -1),
                    np.stack([-metric[..., 1, 0], metric[..., 0, 0]], -1)], -2) / det[..., None, None]
    c = np.cross(a1, a2)
    jac = np.linalg.norm(c, axis=-1)
    a3 = c / jac[..., None]
    # second derivatives a_{alpha,beta}
    dd = np.stack([np.stack([d[..., 2, 0], d[..., 1, 1]], -1), np.stack([d[..., 1, 1], d[..., 0, 2]], -1)], -1)
    # dd[..., i, b, a] -> a_{a,b}; contravariant base vectors a^g = a^{g d} a_d
    a_contra = np.einsum("...gd,...id->...ig", inv, a_cov)
    gamma = np.einsum("...iba,...ig->...gab", dd, a_contra)
    curv = np.einsum("...iba,...i->...ab", dd, a3)
    return CurvilinearFrame(a_cov, a3, metric, inv, gamma, curv, jac)


def elasticity_tensor(metric_inv, material):
    """Contravariant plane-stress tensor ``C^{abcd}``."""
    g = metric_inv
    lam, mu = material.lam, material.mu
    return (
        lam * np.einsum("...ab,...cd->...abcd", g, g)
        + mu * (np.einsum("...ac,...bd->...abcd", g, g) + np.einsum("...ad,...bc->...abcd", g, g))
    )


def element_stiffness_classical(mesh, elems, material, rule=None):
    """Membrane and bending element matrices from covariant strain measures.

    For a shape function ``N_J`` in direction ``e_j``::

        eps_ab = 1/2 (a_a,j N_J,b + a_b,j N_J,a)
        kap_ab = (N_J,ab - Gamma^g_ab N_J,g) a3_j
        K = int [t eps : C : eps + t^3/12 kap : C : kap] dA
    """
    if isinstance(mesh, NurbsPatch):
        mesh = Mesh.from_patch(mesh)
    rule = rule or default_rule(mesh)
    elems = np.atleast_1d(elems)
    rs, scale = mesh.element_points(elems, rule.points)
    basis, conn, geom = mesh.evaluate(elems, rs, 2)
    C, q = rs.shape[:2]
    F = conn.shape[1]
    fr = curvilinear_frame(geom.derivatives())
    d = basis.derivatives()
    dn = np.stack([d[..., 1, 0], d[..., 0, 1]], -1)  # (P, F, 2)
    ddn = np.stack([np.stack([d[..., 2, 0], d[..., 1, 1]], -1), np.stack([d[..., 1, 1], d[..., 0, 2]], -1)], -2)
    # membrane strain of (N_J e_j): eps[P, F, j, a, b]
    ta = np.einsum("pja,pFb->pFjab", fr.a_cov, dn)
    eps = 0.5 * (ta + np.swapaxes(ta, -1, -2))
    # bending: kap[P, F, j, a, b]
    cov2 = ddn - np.einsum("pgab,pFg->pFab", fr.christoffel, dn)
    kap = np.einsum("pFab,pj->pFjab", cov2, fr.a3)
    Ct = elasticity_tensor(fr.metric_inv, material)
    w = (fr.jacobian.reshape(C, q) * scale[:, None] * rule.weights[None, :]).ravel()
    t = material.t
    km = t * np.einsum("p,pIiab,pabcd,pJjcd->piIjJ", w, eps, Ct, eps, optimize=True)
    kb = t**3 / 12 * np.einsum("p,pIiab,pabcd,pJjcd->piIjJ", w, kap, Ct, kap, optimize=True)
    km = km.reshape(C, q, 3, F, 3, F).sum(1).reshape(C, 3 * F, 3 * F)
    kb = kb.reshape(C, q, 3, F, 3, F).sum(1).reshape(C, 3 * F, 3 * F)
    return ElementMatrices(km, kb, conn)
