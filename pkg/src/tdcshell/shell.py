"""Linear Kirchhoff-Love shell mechanics in tangential-calculus form.

Kinematic quantities, stress resultants, the strong-form equilibrium
operator and the decomposition of boundary tractions. Displacement fields
enter as jets of shape (P, 3) so that all derivatives (including those of the
frame) are exact; see :class:`tdcshell.tdc.SurfaceJets`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .jets import Jet, stack
from .tdc import SurfaceJets, in_plane_eigenvalues


@dataclass(frozen=True)
class Material:
    """Isotropic linear-elastic shell material under plane stress.

    Parameters
    ----------
    E : Young's modulus
    nu : Poisson ratio, ``0 <= nu < 0.5``
    t : thickness
    """

    E: float
    nu: float
    t: float

    def __post_init__(self):
        if not self.E > 0:
            raise ValueError("E must be positive")
        if not 0 <= self.nu < 0.5:
            raise ValueError("nu must lie in [0, 0.5)")
        if not self.t > 0:
            raise ValueError("thickness must be positive")

    @property
    def mu(self):
        return self.E / (2 * (1 + self.nu))

    @property
    def lam(self):
        """Plane-stress Lame constant."""
        return self.E * self.nu / (1 - self.nu**2)

    @property
    def D_B(self):
        """Flexural rigidity."""
        return self.E * self.t**3 / (12 * (1 - self.nu**2))

    @property
    def membrane_rigidity(self):
        return self.E * self.t / (1 - self.nu**2)

    @property
    def zeta_range(self):
        return (-0.5 * self.t, 0.5 * self.t)

    def scaled(self, factor):
        return Material(self.E * factor, self.nu, self.t)


# -- helpers on plain arrays ---------------------------------------------------

def _sym(a):
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def _tr(a):
    return np.trace(a, axis1=-2, axis2=-1)


def _eye_like(a):
    return np.broadcast_to(np.eye(3), a.shape)


def difference_vector(grad_u, n):
    """``w = -[grad u + (grad u)^T] . n`` from the directional gradient ``grad_u[i, j] = d_j u_i``."""
    g = np.asarray(grad_u)
    return -np.einsum("...ij,...j->...i", g + np.swapaxes(g, -1, -2), n)


def difference_vector_weingarten(u, grad_u, H, n):
    """Same vector written as ``H . u - grad(u . n)`` (used as a cross-check)."""
    grad_un = np.einsum("...i,...ij->...j", u, H) + np.einsum("...i,...ij->...j", n, grad_u)
    return np.einsum("...ij,...j->...i", H, u) - grad_un


@dataclass
class Strains:
    membrane: np.ndarray
    bending: np.ndarray
    membrane_dir: np.ndarray
    bending_dir: np.ndarray


def strains(grad_u, hess_u, frame):
    """Membrane and bending strains in covariant and directional form.

    ``hess_u[i, j, k] = d_k d_j u_i``. The bending strain keeps only the
    symmetrised normal projection of the second derivatives; the term with
    ``(grad u)^T H`` is dropped as in classical shell theory.
    """
    P = frame.P
    em_dir = _sym(np.asarray(grad_u))
    s = _sym(np.einsum("...k,...kij->...ij", frame.n, hess_u))
    eb_dir = -s
    return Strains(P @ em_dir @ P, P @ eb_dir @ P, em_dir, eb_dir)


def stress_from_strain(strain, material, P):
    """Plane-stress ``sigma = E/(1-nu^2) [(1-nu) eps + nu tr(eps) P]``."""
    E, nu = material.E, material.nu
    return E / (1 - nu**2) * ((1 - nu) * strain + nu * _tr(strain)[..., None, None] * P)


@dataclass
class StressResultants:
    """Resultants at surface points; ``q`` is ``None`` when third derivatives are missing."""

    m: np.ndarray
    n_eff: np.ndarray
    n_real: np.ndarray
    q: np.ndarray | None
    m_principal: np.ndarray
    n_principal: np.ndarray


def principal_values(tensor, n):
    """Two in-plane eigenvalues (descending) of a symmetric in-plane tensor."""
    return in_plane_eigenvalues(np.asarray(tensor), n)


def moment_dir(hess_u, n, material):
    s = _sym(np.einsum("...k,...kij->...ij", n, hess_u))
    nu = material.nu
    return -material.D_B * ((1 - nu) * s + nu * _tr(s)[..., None, None] * _eye_like(s))


def normal_force_dir(grad_u, material):
    e = _sym(np.asarray(grad_u))
    nu = material.nu
    return material.membrane_rigidity * ((1 - nu) * e + nu * _tr(e)[..., None, None] * _eye_like(e))


def stress_resultants(grad_u, hess_u, frame, material, q=None):
    """Moment, effective and physical normal force from point-wise derivatives.

    The transverse shear needs third derivatives of ``u`` and first
    derivatives of the frame; use :func:`field_resultants` for it.
    """
    P = frame.P
    m = P @ moment_dir(hess_u, frame.n, material) @ P
    n_eff = P @ normal_force_dir(grad_u, material) @ P
    H = frame.H if frame.H is not None else np.zeros_like(P)
    n_real = n_eff + H @ m
    return StressResultants(m, n_eff, n_real, q, principal_values(m, frame.n), principal_values(n_eff, frame.n))


# -- jet-level fields ----------------------------------------------------------

def _jsym(a):
    return (a + a.swapaxes(-1, -2)) * 0.5


def _jtr(a):
    return Jet(np.trace(a.c, axis1=a.c.ndim - 4, axis2=a.c.ndim - 3))


def _jmatmul(a, b):
    return (a.expand(-1) * b.expand(-3)).sum(-2)


def _jmatvec(a, v):
    return (a * v.expand(-2)).sum(-1)


def _eye_jet(npts, order):
    return Jet.constant(np.broadcast_to(np.eye(3), (npts, 3, 3)), order)


class ShellField:
    """Displacement field on a surface with lazily derived resultant jets.

    Parameters
    ----------
    sj : SurfaceJets
    u : Jet (P, 3)
    material : Material
    """

    def __init__(self, sj, u, material):
        self.sj = sj
        self.u = u
        self.material = material
        self.npts = u.shape[0]
        self.grad_u = sj.grad(u)
        self._cache = {}

    def _get(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    @property
    def hess_u(self):
        return self._get("hess", lambda: self.sj.grad(self.grad_u))

    @property
    def moment(self):
        def build():
            mat = self.material
            hu = self.hess_u
            n = self.sj.n.reshape(self.npts, 3, 1, 1)
            s = _jsym((n * hu).sum(1))
            nu = mat.nu
            mdir = (s * (1 - nu) + _eye_jet(self.npts, s.order) * _jtr(s).expand(-1).expand(-1) * nu) * (-mat.D_B)
            P = self.sj.P
            return _jmatmul(_jmatmul(P, mdir), P)

        return self._get("m", build)

    @property
    def n_eff(self):
        def build():
            mat = self.material
            e = _jsym(self.grad_u)
            nu = mat.nu
            ndir = (e * (1 - nu) + _eye_jet(self.npts, e.order) * _jtr(e).expand(-1).expand(-1) * nu) * mat.membrane_rigidity
            P = self.sj.P
            return _jmatmul(_jmatmul(P, ndir), P)

        return self._get("n", build)

    @property
    def n_real(self):
        return self._get("nr", lambda: self.n_eff + _jmatmul(self.sj.H, self.moment))

    @property
    def div_m(self):
        return self._get("divm", lambda: self.sj.div(self.moment))

    @property
    def q(self):
        return self._get("q", lambda: _jmatvec(self.sj.P, self.div_m))

    @property
    def w(self):
        g = self.grad_u
        return self._get("w", lambda: _jmatvec(g + g.swapaxes(-1, -2), self.sj.n) * -1.0)

    def strong_form(self):
        """``L(u) = div n_eff + n div(P div m) + 2 H div m + d_i H_jk m_ki``; equilibrium is ``L(u) = -f``."""
        sj = self.sj
        m = self.moment
        dH = sj.grad(sj.H)  # dH[j, k, i] = d_i H_jk
        term_n = sj.div(self.n_eff)
        term_q = sj.n * sj.div(self.q).expand(-1)
        term_h = _jmatvec(sj.H, self.div_m) * 2.0
        term_c = (dH * m.expand(1)).sum(-1).sum(-1)
        return (term_n + term_q + term_h + term_c).value


def field_resultants(sj, u, material):
    """Point values of all resultants (including shear) from jets; ``u`` needs order >= 3."""
    sf = ShellField(sj, u, material)
    n = sj.n.value
    m = sf.moment.value
    ne = sf.n_eff.value
    return StressResultants(m, ne, sf.n_real.value, sf.q.value, principal_values(m, n), principal_values(ne, n))


def strong_form_operator(sj, u, material):
    """Strong-form equilibrium operator ``L(u)`` at every point (order-4 jets required)."""
    if u.order < 4 or sj.x.order < 4:
        raise ValueError("strong form needs fourth-order jets of the field and the surface map")
    return ShellField(sj, u, material).strong_form()


# -- boundary decomposition ----------------------------------------------------

# outward boundary tangent direction per parametric edge, as (column of J, sign)
EDGE_TANGENT = {"r0": (1, 1.0), "r1": (1, -1.0), "s0": (0, -1.0), "s1": (0, 1.0)}


def edge_frame_jets(sj, edge):
    """Boundary tangent ``t`` and outward co-normal ``n_bnd = n x t`` as jets.

    The tangent follows the parametric edge direction oriented so that the
    co-normal points away from the patch interior.
    """
    col, sign = EDGE_TANGENT[edge]
    a = sj.J[..., col] * sign
    t = a * (a * a).sum(-1).sqrt().reciprocal().expand(-1)
    n = sj.n.truncate(t.order)
    nb = stack(
        [
            n[..., 1] * t[..., 2] - n[..., 2] * t[..., 1],
            n[..., 2] * t[..., 0] - n[..., 0] * t[..., 2],
            n[..., 0] * t[..., 1] - n[..., 1] * t[..., 0],
        ],
        axis=-1,
    )
    return t, nb


@dataclass
class BoundaryForces:
    p_t: np.ndarray
    p_nb: np.ndarray
    p_n: np.ndarray
    m_t: np.ndarray
    m_n: np.ndarray
    omega_t: np.ndarray
    omega_n: np.ndarray
    p_t_raw: np.ndarray
    p_nb_raw: np.ndarray
    p_n_raw: np.ndarray
    t: np.ndarray
    n_bnd: np.ndarray
    normal: np.ndarray

    def traction(self):
        """Effective force vector ``p_t t + p_nb n_bnd + p_n n``."""
        return self.p_t[..., None] * self.t + self.p_nb[..., None] * self.n_bnd + self.p_n[..., None] * self.normal


def boundary_forces(sj, u, material, edge):
    """Effective boundary forces, bending moment and rotations on a parametric edge.

    ``u`` needs order >= 3 (the shear force and the tangential derivative of
    the twisting moment use third derivatives).
    """
    if edge not in EDGE_TANGENT:
        raise ValueError(f"unknown edge {edge!r}")
    if u.order < 3:
        raise ValueError("boundary forces need third-order jets of the field")
    sf = ShellField(sj, u, material)
    t_j, nb_j = edge_frame_jets(sj, edge)
    m = sf.moment
    m_n_jet = (_jmatvec(m, nb_j.truncate(m.order)) * t_j.truncate(m.order)).sum(-1)
    dmn_t = (sj.grad(m_n_jet).value * t_j.value).sum(-1)
    t, nb, n = t_j.value, nb_j.value, sj.n.value
    nr = sf.n_real.value
    mv = m.value
    H = sj.H.value
    traction = np.einsum("...ij,...j->...i", nr, nb)
    p_t = np.einsum("...i,...i->...", traction, t)
    p_nb = np.einsum("...i,...i->...", traction, nb)
    p_n = np.einsum("...i,...i->...", sf.q.value, nb)
    m_t = np.einsum("...i,...ij,...j->...", nb, mv, nb)
    m_n = m_n_jet.value
    ht = np.einsum("...ij,...j->...i", H, t)
    w = sf.w.value
    return BoundaryForces(
        p_t=p_t + np.einsum("...i,...i->...", ht, t) * m_n,
        p_nb=p_nb + np.einsum("...i,...i->...", ht, nb) * m_n,
        p_n=p_n + dmn_t,
        m_t=m_t,
        m_n=m_n,
        omega_t=np.einsum("...i,...i->...", w, nb),
        omega_n=np.einsum("...i,...i->...", w, t),
        p_t_raw=p_t,
        p_nb_raw=p_nb,
        p_n_raw=p_n,
        t=t,
        n_bnd=nb,
        normal=n,
    )


def field_jet_from_function(func, rs, order):
    """Jet (P, 3) of a closed-form field ``func(r_jet, s_jet) -> [ux, uy, uz]``."""
    rs = np.asarray(rs, dtype=float).reshape(-1, 2)
    r = Jet.variable(rs[:, 0], order, 0)
    s = Jet.variable(rs[:, 1], order, 1)
    comps = [c if isinstance(c, Jet) else Jet.constant(np.broadcast_to(c, rs[:, 0].shape), order) for c in func(r, s)]
    return stack(comps, axis=-1)


__all__ = [
    "BoundaryForces",
    "Material",
    "ShellField",
    "Strains",
    "StressResultants",
    "SurfaceJets",
    "boundary_forces",
    "difference_vector",
    "difference_vector_weingarten",
    "edge_frame_jets",
    "field_jet_from_function",
    "field_resultants",
    "principal_values",
    "strains",
    "stress_resultants",
    "strong_form_operator",
]
