"""Tangential differential calculus on parametrised surfaces.

Everything is expressed in global Cartesian coordinates. For a field ``u``
given through its parametric pull-back, the tangential gradient is
``grad u = Q . grad_r u`` with ``Q = J G^-1``; applying this repeatedly to jets
(see :mod:`tdcshell.jets`) yields directional derivatives of any order,
including those of the frame fields ``n``, ``P`` and ``H``.

Index conventions
-----------------
Every derivative index is appended as the *last* axis, i.e.
``grad(u)[i, j] = d_j u_i`` and ``hess(u)[i, j, k] = d_k d_j u_i``.
Directional Hessians are not symmetric on curved surfaces, so the order of
the derivative slots matters.
"""
from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .jets import Jet, cross, dot, matmul, outer, stack, transpose
from .nurbs import BasisEval, DegenerateGeometryError, GeometryEval, check_jacobian

_FAULTS: set[str] = set()
KNOWN_FAULTS = ("weingarten-sign",)


@contextmanager
def inject_fault(name):
    """Deliberately corrupt an operator (used to prove the verification suite bites)."""
    if name not in KNOWN_FAULTS:
        raise ValueError(f"unknown fault {name!r}; known: {KNOWN_FAULTS}")
    _FAULTS.add(name)
    try:
        yield
    finally:
        _FAULTS.discard(name)


def projector(normal):
    """Normal projector ``P = I - n n^T``."""
    normal = np.asarray(normal, dtype=float)
    if np.any(np.abs(np.linalg.norm(normal, axis=-1) - 1.0) > 1e-12):
        raise ValueError("projector needs a unit normal")
    return np.eye(3) - normal[..., :, None] * normal[..., None, :]


class SurfaceJets:
    """Frame fields of a surface as jets, built from the jet of the surface map.

    Parameters
    ----------
    x : Jet of shape (P, 3)
        Surface points with Taylor coefficients through some order ``K >= 1``.

    Attributes ``J, G, Q, n, P`` have order ``K - 1`` and ``H`` order ``K - 2``.
    """

    def __init__(self, x):
        if x.order < 1:
            raise ValueError("surface map jet needs order >= 1")
        self.x = x
        jr, js = x.dr(), x.ds()
        check_jacobian(jr.value, js.value)
        self.J = stack([jr, js], axis=-1)
        self.G = matmul(transpose(self.J), self.J)
        g00, g01, g11 = self.G[..., 0, 0], self.G[..., 0, 1], self.G[..., 1, 1]
        det = g00 * g11 - g01 * g01
        if np.any(det.value <= 1e-300):
            raise DegenerateGeometryError("degenerate metric")
        idet = det.reciprocal()
        ginv = stack([stack([g11 * idet, -g01 * idet]), stack([-g01 * idet, g00 * idet])], axis=-2)
        self.Q = matmul(self.J, ginv)
        c = cross(jr, js)
        self.area = dot(c, c).sqrt()
        self.n = c * self.area.reciprocal().expand(-1)
        self.P = Jet.constant(np.broadcast_to(np.eye(3), self.n.shape + (3,)), self.n.order) - outer(self.n, self.n)
        self._H = None

    @property
    def order(self):
        return self.Q.order

    @property
    def H(self):
        if self._H is None:
            if self.order < 1:
                raise ValueError("Weingarten map needs a surface jet of order >= 2")
            self._H = self.grad(self.n)
            if "weingarten-sign" in _FAULTS:
                self._H = -self._H
        return self._H

    def grad(self, f):
        """Tangential gradient of a jet field ``f`` of shape (P, ...), appended axis last."""
        k = f.order - 1
        if k < 0:
            raise ValueError("cannot differentiate an order-0 jet")
        if k > self.Q.order:
            k = self.Q.order
            f = f.truncate(k + 1)
        extra = (1,) * (f.ndim - 1)
        npts = self.Q.shape[0]
        qr = self.Q[:, :, 0].truncate(k).reshape((npts,) + extra + (3,))
        qs = self.Q[:, :, 1].truncate(k).reshape((npts,) + extra + (3,))
        return f.dr().expand(-1) * qr + f.ds().expand(-1) * qs

    def div(self, f):
        """Surface divergence: trace over the last slot of ``f`` and its derivative slot."""
        g = self.grad(f)
        return Jet(np.trace(g.c, axis1=g.c.ndim - 4, axis2=g.c.ndim - 3))


@dataclass
class SurfaceFrame:
    """Frame quantities at one or many surface points (leading batch axes)."""

    x: np.ndarray
    J: np.ndarray
    G: np.ndarray
    n: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    H: np.ndarray | None = None
    kappa1: np.ndarray | None = None
    kappa2: np.ndarray | None = None
    mean_curvature: np.ndarray | None = None
    gauss_curvature: np.ndarray | None = None
    dQ: np.ndarray | None = None  # dQ[..., i, a, b] = d Q_ia / d r_b
    area: np.ndarray | None = None  # |J_r x J_s|
    t_bnd: np.ndarray | None = None
    n_bnd: np.ndarray | None = None
    extra: dict = field(default_factory=dict)


def tangent_basis(n):
    """Orthonormal tangent pair ``(..., 3, 2)`` for unit normals ``n``."""
    n = np.asarray(n, dtype=float)
    # start from the coordinate axis least aligned with n
    axis = np.argmin(np.abs(n), axis=-1)
    a = np.zeros_like(n)
    np.put_along_axis(a, axis[..., None], 1.0, -1)
    e1 = np.cross(n, a)
    e1 /= np.linalg.norm(e1, axis=-1, keepdims=True)
    return np.stack([e1, np.cross(n, e1)], axis=-1)


def in_plane_eigenvalues(tensor, n):
    """Eigenvalues (descending) of the symmetric part of ``tensor`` restricted to the tangent plane."""
    T = tangent_basis(n)
    A = 0.5 * (tensor + np.swapaxes(tensor, -1, -2))
    return np.linalg.eigvalsh(np.swapaxes(T, -1, -2) @ A @ T)[..., ::-1]


def principal_curvatures(H, n):
    """``kappa = -eig(H)`` on the tangent plane, sorted ``kappa1 >= kappa2``."""
    kap = -in_plane_eigenvalues(np.asarray(H), n)
    return kap[..., 1], kap[..., 0]


def frame_from_jets(sj, with_curvature=True):
    """Evaluate a :class:`SurfaceFrame` from :class:`SurfaceJets`."""
    frame = SurfaceFrame(
        x=sj.x.value,
        J=sj.J.value,
        G=sj.G.value,
        n=sj.n.value,
        P=sj.P.value,
        Q=sj.Q.value,
        area=sj.area.value,
    )
    if sj.order >= 1:
        frame.dQ = np.stack([sj.Q.dr().value, sj.Q.ds().value], axis=-1)
        if with_curvature:
            H = sj.H.value
            frame.H = H
            frame.mean_curvature = np.trace(H, axis1=-2, axis2=-1)
            k1, k2 = principal_curvatures(H, frame.n)
            frame.kappa1, frame.kappa2 = k1, k2
            frame.gauss_curvature = k1 * k2
    return frame


def _geometry_jet(geom):
    if isinstance(geom, GeometryEval):
        return geom.jet().reshape(1, 3)
    if isinstance(geom, Jet):
        return geom if geom.ndim == 2 else geom.reshape(1, 3)
    ders = np.asarray(geom, dtype=float)
    jet = Jet.from_derivatives(ders)
    return jet if jet.ndim == 2 else jet.reshape(1, 3)


def _squeeze(frame, single):
    if not single:
        return frame
    for name, val in vars(frame).items():
        if isinstance(val, np.ndarray) and val.ndim >= 1 and val.shape[0] == 1:
            setattr(frame, name, val[0])
    return frame


def build_frame(geom, boundary_tangent=None):
    """Surface frame from parametric derivatives of the surface map.

    Parameters
    ----------
    geom : GeometryEval, Jet (P, 3) or derivative array (3, d+1, d+1)
        Needs ``d >= 2`` for the Weingarten map; with ``d == 1`` only the
        first-order quantities are populated.
    boundary_tangent : array_like, optional
        Unit tangent of the boundary at the point(s). When given, ``t_bnd``
        and the outward co-normal ``n_bnd = n x t`` are filled in.
    """
    single = isinstance(geom, GeometryEval) or (not isinstance(geom, Jet) and np.ndim(geom) == 3)
    jet = _geometry_jet(geom)
    sj = SurfaceJets(jet)
    frame = frame_from_jets(sj, with_curvature=sj.order >= 1)
    if boundary_tangent is not None:
        t = np.asarray(boundary_tangent, dtype=float).reshape(frame.n.shape)
        t = t - np.einsum("...i,...i->...", t, frame.n)[..., None] * frame.n
        t /= np.linalg.norm(t, axis=-1, keepdims=True)
        frame.t_bnd = t
        frame.n_bnd = np.cross(frame.n, t)
    return _squeeze(frame, single)


# -- shape-function derivatives ------------------------------------------------

def _param_ders(basis):
    d = basis.ders if isinstance(basis, BasisEval) else np.asarray(basis)
    return d


def tangential_gradient_scalar(basis, frame):
    """``grad N_i = Q . (dN_i/dr, dN_i/ds)`` for every shape function; shape (F, 3)."""
    d = _param_ders(basis)
    if d.shape[-1] < 2:
        raise ValueError("first derivatives required")
    dn = np.stack([d[..., 1, 0], d[..., 0, 1]], axis=-1)
    return shape_gradients(dn, frame.Q)


def shape_gradients(dn, Q):
    """Batched ``Q . grad_r N``: ``dn`` (..., F, 2), ``Q`` (..., 3, 2) -> (..., F, 3)."""
    return np.einsum("...ia,...fa->...fi", Q, dn)


def hessian_dir(basis, geom, frame=None):
    """Directional Hessian ``He[i, j] = d_j d_i N`` of every shape function; (F, 3, 3).

    Evaluates ``[Q_,r grad_r N | Q_,s grad_r N] Q^T + Q (grad_r grad_r N) Q^T``
    where the parametric derivatives of ``Q`` come from second derivatives of
    the surface map.
    """
    d = _param_ders(basis)
    if d.shape[-1] < 3:
        raise ValueError("second derivatives required")
    if frame is None or frame.dQ is None:
        frame = build_frame(geom)
    dn = np.stack([d[..., 1, 0], d[..., 0, 1]], axis=-1)
    ddn = np.stack([np.stack([d[..., 2, 0], d[..., 1, 1]], -1), np.stack([d[..., 1, 1], d[..., 0, 2]], -1)], -2)
    return hessian_dir_values(dn, ddn, frame.Q, frame.dQ)


def hessian_dir_values(dn, ddn, Q, dQ):
    """Batched directional Hessians.

    Parameters
    ----------
    dn : (..., F, 2) first parametric derivatives
    ddn : (..., F, 2, 2) second parametric derivatives
    Q : (..., 3, 2)
    dQ : (..., 3, 2, 2) with ``dQ[..., i, a, b] = d Q_ia / d r_b``
    """
    first = np.einsum("...iab,...fa,...jb->...fij", dQ, dn, Q)
    second = np.einsum("...ia,...fab,...jb->...fij", Q, ddn, Q)
    return first + second


def hessian_cov(hess_dir, frame):
    """Covariant Hessian ``P . He_dir`` (symmetric, in-plane)."""
    P = np.asarray(frame.P if isinstance(frame, SurfaceFrame) else frame)
    return np.einsum("...ik,...fkj->...fij", P, hess_dir)


def surface_divergence(grad_field):
    """Divergence from a tangential gradient with the derivative slot last.

    A vector field gradient (..., 3, 3) gives a scalar; a tensor gradient
    (..., 3, 3, 3) gives the row-wise divergence vector.
    """
    g = np.asarray(grad_field)
    if g.ndim >= 3 and g.shape[-3:] == (3, 3, 3):
        return np.einsum("...ijj->...i", g)
    return np.einsum("...jj->...", g)


def high_order_derivatives(basis, geom, order=4):
    """Directional derivatives of every shape function through ``order``.

    Returns a list ``[grad, hess, third, fourth]`` (truncated to ``order``)
    with shapes (F, 3), (F, 3, 3), (F, 3, 3, 3), (F, 3, 3, 3, 3). Each slot is
    obtained by one more application of the tangential gradient, so no
    symmetry between slots is assumed.
    """
    d = _param_ders(basis)
    avail = d.shape[-1] - 1
    gjet = _geometry_jet(geom)
    if avail < order or gjet.order < order:
        raise ValueError(f"derivatives through order {order} required for basis and geometry")
    sj = SurfaceJets(gjet.truncate(order))
    f = Jet.from_derivatives(d[..., : order + 1, : order + 1])[None]
    out = []
    for _ in range(order):
        f = sj.grad(f)
        out.append(f.value[0])
    return out
