"""Tensor-product NURBS patches, basis evaluation and Gauss quadrature.

Elements are the nonzero knot spans of a patch, numbered ``e = iu * n_v + iv``.
Control points are stored as an ``(n_u, n_v, 3)`` grid and global basis
indices follow the same row-major convention ``I = i * n_v + j``.

Parametric derivatives of the rational basis are obtained by dividing
B-spline jets by the weight-function jet (see :mod:`tdcshell.jets`), which is
the quotient rule carried through every order at once.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import factorial
from pathlib import Path

import numpy as np

from .jets import Jet, linear_combination, stack

MAX_DERIVATIVE = 4
EDGES = ("r0", "r1", "s0", "s1")


class DegenerateGeometryError(ValueError):
    """The surface map has (numerically) parallel Jacobian columns."""


class PointOutsideElementError(ValueError):
    pass


class KnotVector:
    """Univariate B-spline knot vector.

    Parameters
    ----------
    knots : array_like
        Open (clamped) knot sequence, or for ``periodic=True`` the strictly
        increasing breakpoints of one period.
    degree : int
        Polynomial degree ``p >= 1``.
    periodic : bool
        Build the periodic spline space on the breakpoints instead of the
        clamped one. The number of basis functions then equals the number of
        spans and function indices wrap around.
    """

    def __init__(self, knots, degree, periodic=False):
        knots = np.asarray(knots, dtype=float)
        p = int(degree)
        if p < 1:
            raise ValueError("degree must be >= 1")
        if knots.ndim != 1 or np.any(np.diff(knots) < 0):
            raise ValueError("knots must be a nondecreasing sequence")
        self.degree = p
        self.periodic = bool(periodic)
        self.knots = knots
        if self.periodic:
            if np.any(np.diff(knots) <= 0) or len(knots) < 2:
                raise ValueError("periodic breakpoints must be strictly increasing")
            n = len(knots) - 1
            period = knots[-1] - knots[0]
            steps = np.diff(knots)
            left = knots[0] - np.cumsum(steps[::-1][np.arange(p) % n])[::-1]
            right = knots[-1] + np.cumsum(steps[np.arange(p) % n])
            self._ext = np.concatenate([left, knots, right])
            self.breakpoints = knots.copy()
            self._span_mu = p + np.arange(n)
            self._period = period
        else:
            if len(knots) < 2 * (p + 1):
                raise ValueError("too few knots for the degree")
            if np.any(knots[: p + 1] != knots[0]) or np.any(knots[-p - 1 :] != knots[-1]):
                raise ValueError("knot vector must be open (end knots repeated p+1 times)")
            interior = knots[p + 1 : -p - 1]
            if len(interior):
                _, counts = np.unique(interior, return_counts=True)
                if counts.max() > p:
                    raise ValueError("interior knot multiplicity exceeds the degree")
            self._ext = knots
            self.breakpoints = np.unique(knots)
            mu = [i for i in range(p, len(knots) - p - 1) if knots[i + 1] > knots[i]]
            self._span_mu = np.array(mu, dtype=int)

    def __eq__(self, other):
        return (
            isinstance(other, KnotVector)
            and self.degree == other.degree
            and self.periodic == other.periodic
            and np.array_equal(self.knots, other.knots)
        )

    def __repr__(self):
        kind = "periodic" if self.periodic else "open"
        return f"KnotVector(p={self.degree}, spans={self.n_spans}, {kind})"

    @property
    def n_basis(self):
        if self.periodic:
            return len(self.knots) - 1
        return len(self.knots) - self.degree - 1

    @property
    def n_spans(self):
        return len(self._span_mu)

    @property
    def domain(self):
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    def span_bounds(self, span):
        mu = self._span_mu[span]
        return self._ext[mu], self._ext[mu + 1]

    def span_functions(self, span):
        """Global indices of the ``p + 1`` functions supported on a span."""
        idx = self._span_mu[span] - self.degree + np.arange(self.degree + 1)
        if self.periodic:
            idx = idx % self.n_basis
        return idx

    def find_span(self, x):
        x = np.asarray(x, dtype=float)
        span = np.searchsorted(self.breakpoints, x, side="right") - 1
        return np.clip(span, 0, self.n_spans - 1)

    def ders_basis(self, span, x, d):
        """Derivatives ``[..., k, j]`` of the ``p + 1`` span functions, ``k <= d``."""
        x = np.asarray(x, dtype=float)
        mu = np.broadcast_to(self._span_mu[np.asarray(span)], x.shape)
        return _ders_basis_funs(self._ext, mu.ravel(), self.degree, x.ravel(), d).reshape(
            x.shape + (d + 1, self.degree + 1)
        )

    def insert(self, x):
        """Knot vector after inserting ``x`` once (open vectors only)."""
        if self.periodic:
            raise NotImplementedError("knot insertion on periodic spaces")
        return KnotVector(np.sort(np.append(self.knots, x)), self.degree)


def _ders_basis_funs(t, mu, p, x, d):
    """Cox-de Boor values and derivatives vectorised over points.

    Returns an array ``(m, d + 1, p + 1)``; derivatives above ``p`` vanish.
    """
    m = len(x)
    ndu = np.zeros((m, p + 1, p + 1))
    ndu[:, 0, 0] = 1.0
    left = np.zeros((m, p + 1))
    right = np.zeros((m, p + 1))
    for j in range(1, p + 1):
        left[:, j] = x - t[mu + 1 - j]
        right[:, j] = t[mu + j] - x
        saved = np.zeros(m)
        for r in range(j):
            ndu[:, j, r] = right[:, r + 1] + left[:, j - r]
            temp = ndu[:, r, j - 1] / ndu[:, j, r]
            ndu[:, r, j] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        ndu[:, j, j] = saved
    ders = np.zeros((m, d + 1, p + 1))
    ders[:, 0, :] = ndu[:, :, p]
    dk = min(d, p)
    a = np.zeros((2, m, p + 1))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[0, :, 0] = 1.0
        for k in range(1, dk + 1):
            dd = np.zeros(m)
            rk, pk = r - k, p - k
            if r >= k:
                a[s2, :, 0] = a[s1, :, 0] / ndu[:, pk + 1, rk]
                dd = a[s2, :, 0] * ndu[:, rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, :, j] = (a[s1, :, j] - a[s1, :, j - 1]) / ndu[:, pk + 1, rk + j]
                dd = dd + a[s2, :, j] * ndu[:, rk + j, pk]
            if r <= pk:
                a[s2, :, k] = -a[s1, :, k - 1] / ndu[:, pk + 1, r]
                dd = dd + a[s2, :, k] * ndu[:, r, pk]
            ders[:, k, r] = dd
            s1, s2 = s2, s1
    fac = float(p)
    for k in range(1, dk + 1):
        ders[:, k, :] *= fac
        fac *= p - k
    return ders


class SplineSpace:
    """Tensor-product (rational) spline space on a single patch."""

    def __init__(self, knot_u, knot_v, weights=None):
        self.knot_u = knot_u
        self.knot_v = knot_v
        shape = (knot_u.n_basis, knot_v.n_basis)
        if weights is not None:
            weights = np.asarray(weights, dtype=float)
            if weights.shape != shape:
                raise ValueError(f"weights must have shape {shape}")
            if np.any(weights <= 0):
                raise ValueError("weights must be positive")
        self.weights = weights

    @property
    def degrees(self):
        return self.knot_u.degree, self.knot_v.degree

    @property
    def shape(self):
        return self.knot_u.n_basis, self.knot_v.n_basis

    @property
    def n_basis(self):
        return self.knot_u.n_basis * self.knot_v.n_basis

    @property
    def n_elements(self):
        return self.knot_u.n_spans * self.knot_v.n_spans

    @property
    def functions_per_element(self):
        pu, pv = self.degrees
        return (pu + 1) * (pv + 1)

    def element_spans(self, elems):
        return np.divmod(np.asarray(elems), self.knot_v.n_spans)

    def element_bounds(self, elem):
        iu, iv = self.element_spans(elem)
        return self.knot_u.span_bounds(iu), self.knot_v.span_bounds(iv)

    def connectivity(self, elems):
        elems = np.atleast_1d(elems)
        iu, iv = self.element_spans(elems)
        fu = np.stack([self.knot_u.span_functions(i) for i in iu])
        fv = np.stack([self.knot_v.span_functions(i) for i in iv])
        return (fu[:, :, None] * self.knot_v.n_basis + fv[:, None, :]).reshape(len(elems), -1)

    def element_of(self, r, s):
        return self.knot_u.find_span(r) * self.knot_v.n_spans + self.knot_v.find_span(s)

    def basis_jets(self, elems, rs, order):
        """Shape-function jets at parametric points.

        Parameters
        ----------
        elems : (E,) int array
        rs : (E, Q, 2) parametric coordinates, each inside its element
        order : Taylor order of the returned jets

        Returns
        -------
        jets : Jet of shape (E * Q, F)
        conn : (E, F) global basis indices
        """
        elems = np.atleast_1d(elems)
        rs = np.asarray(rs, dtype=float)
        nq = rs.shape[1]
        iu, iv = self.element_spans(elems)
        bu = self.knot_u.ders_basis(np.repeat(iu, nq), rs[..., 0].ravel(), order)
        bv = self.knot_v.ders_basis(np.repeat(iv, nq), rs[..., 1].ravel(), order)
        inv = np.array([1.0 / factorial(k) for k in range(order + 1)])
        bu = bu * inv[:, None]
        bv = bv * inv[:, None]
        c = np.einsum("pxa,pyb->pabxy", bu, bv)
        c = c.reshape(c.shape[0], -1, order + 1, order + 1)
        jets = Jet(c * (np.add.outer(np.arange(order + 1), np.arange(order + 1)) <= order))
        conn = self.connectivity(elems)
        if self.weights is not None:
            w = self.weights.ravel()[np.repeat(conn, nq, axis=0)]
            weighted = jets * w
            wsum = weighted.sum(-1)
            jets = weighted * wsum.reciprocal().expand(-1)
        return jets, conn

    def edge_functions(self, edge):
        """Global indices of the functions whose trace on ``edge`` is nonzero."""
        nu, nv = self.shape
        grid = np.arange(nu * nv).reshape(nu, nv)
        if edge in ("r0", "r1"):
            if self.knot_u.periodic:
                raise ValueError("periodic direction has no edge")
            return grid[0 if edge == "r0" else -1, :].copy()
        if edge in ("s0", "s1"):
            if self.knot_v.periodic:
                raise ValueError("periodic direction has no edge")
            return grid[:, 0 if edge == "s0" else -1].copy()
        raise ValueError(f"unknown edge {edge!r}")

    def edges(self):
        out = []
        if not self.knot_u.periodic:
            out += ["r0", "r1"]
        if not self.knot_v.periodic:
            out += ["s0", "s1"]
        return out


class NurbsPatch:
    """A NURBS surface: knot vectors, weighted control net and degrees.

    ``control_points`` has shape ``(n_u, n_v, 3)`` and ``weights`` shape
    ``(n_u, n_v)``; both knot vectors must be open.
    """

    def __init__(self, knot_u, knot_v, control_points, weights=None):
        if knot_u.periodic or knot_v.periodic:
            raise ValueError("NURBS geometry patches use open knot vectors")
        cp = np.asarray(control_points, dtype=float)
        shape = (knot_u.n_basis, knot_v.n_basis)
        if cp.shape != shape + (3,):
            raise ValueError(f"control grid must have shape {shape + (3,)}, got {cp.shape}")
        if weights is None:
            weights = np.ones(shape)
        self.space = SplineSpace(knot_u, knot_v, weights)
        self.control_points = cp

    @property
    def knot_u(self):
        return self.space.knot_u

    @property
    def knot_v(self):
        return self.space.knot_v

    @property
    def weights(self):
        return self.space.weights

    @property
    def degrees(self):
        return self.space.degrees

    def homogeneous(self):
        return np.concatenate([self.control_points * self.weights[..., None], self.weights[..., None]], -1)

    @classmethod
    def from_homogeneous(cls, knot_u, knot_v, pw):
        w = pw[..., 3]
        return cls(knot_u, knot_v, pw[..., :3] / w[..., None], w)

    def geometry_jets(self, elems, rs, order):
        jets, conn = self.space.basis_jets(elems, rs, order)
        nq = np.asarray(rs).shape[1]
        cp = self.control_points.reshape(-1, 3)[np.repeat(conn, nq, axis=0)]
        return linear_combination(jets, cp)

    # -- refinement ---------------------------------------------------------
    def elevate(self, direction, times=1):
        """Degree elevation; only single-span (Bezier) directions are supported."""
        if times <= 0:
            return self
        kv = self.knot_u if direction == 0 else self.knot_v
        if kv.n_spans != 1:
            raise NotImplementedError("degree elevation needs a single-span direction")
        pw = self.homogeneous()
        if direction == 1:
            pw = pw.swapaxes(0, 1)
        p = kv.degree
        for _ in range(times):
            n = pw.shape[0]
            new = np.empty((n + 1,) + pw.shape[1:])
            new[0] = pw[0]
            new[-1] = pw[-1]
            for i in range(1, n):
                a = i / (p + 1)
                new[i] = a * pw[i - 1] + (1 - a) * pw[i]
            pw = new
            p += 1
        lo, hi = kv.domain
        new_kv = KnotVector([lo] * (p + 1) + [hi] * (p + 1), p)
        if direction == 1:
            return NurbsPatch.from_homogeneous(self.knot_u, new_kv, pw.swapaxes(0, 1))
        return NurbsPatch.from_homogeneous(new_kv, self.knot_v, pw)

    def insert_knot(self, direction, x):
        kv = self.knot_u if direction == 0 else self.knot_v
        pw = self.homogeneous()
        if direction == 1:
            pw = pw.swapaxes(0, 1)
        t, p = kv.knots, kv.degree
        k = int(np.searchsorted(t, x, side="right") - 1)
        n = pw.shape[0]
        new = np.empty((n + 1,) + pw.shape[1:])
        for i in range(n + 1):
            if i <= k - p:
                new[i] = pw[i]
            elif i >= k + 1:
                new[i] = pw[i - 1]
            else:
                a = (x - t[i]) / (t[i + p] - t[i])
                new[i] = a * pw[i] + (1 - a) * pw[i - 1]
        new_kv = kv.insert(x)
        if direction == 1:
            return NurbsPatch.from_homogeneous(self.knot_u, new_kv, new.swapaxes(0, 1))
        return NurbsPatch.from_homogeneous(new_kv, self.knot_v, new)

    def refined(self, degree, n):
        """Elevate to ``degree`` and insert knots for ``n`` uniform spans per direction."""
        degree = (degree, degree) if np.isscalar(degree) else tuple(degree)
        n = (n, n) if np.isscalar(n) else tuple(n)
        patch = self
        for d in (0, 1):
            kv = patch.knot_u if d == 0 else patch.knot_v
            if degree[d] < kv.degree:
                raise ValueError("cannot lower the degree")
            patch = patch.elevate(d, degree[d] - kv.degree)
            kv = patch.knot_u if d == 0 else patch.knot_v
            lo, hi = kv.domain
            for x in lo + (hi - lo) * np.arange(1, n[d]) / n[d]:
                if not np.any(np.isclose(kv.breakpoints, x, rtol=0, atol=1e-14 * (hi - lo))):
                    patch = patch.insert_knot(d, x)
                    kv = patch.knot_u if d == 0 else patch.knot_v
        return patch


class AnalyticSurface:
    """Surface given by a closed-form map ``(r_jet, s_jet) -> [x, y, z]`` of jets."""

    def __init__(self, func, name="analytic"):
        self.func = func
        self.name = name

    def geometry_jets(self, elems, rs, order):
        rs = np.asarray(rs, dtype=float).reshape(-1, 2)
        r = Jet.variable(rs[:, 0], order, 0)
        s = Jet.variable(rs[:, 1], order, 1)
        comps = self.func(r, s)
        comps = [c if isinstance(c, Jet) else Jet.constant(np.broadcast_to(c, rs[:, 0].shape), order) for c in comps]
        return stack(comps, axis=-1)


class Mesh:
    """Displacement space plus geometry (isoparametric when built from a patch)."""

    def __init__(self, space, geometry):
        self.space = space
        self.geometry = geometry

    @classmethod
    def from_patch(cls, patch):
        return cls(patch.space, patch)

    @property
    def isoparametric(self):
        return isinstance(self.geometry, NurbsPatch) and self.geometry.space is self.space

    @property
    def n_elements(self):
        return self.space.n_elements

    @property
    def n_basis(self):
        return self.space.n_basis

    def element_points(self, elems, ref_points):
        """Map reference points in [-1, 1]^2 to each element; returns (E, Q, 2) and span areas."""
        elems = np.atleast_1d(elems)
        iu, iv = self.space.element_spans(elems)
        ku, kv = self.space.knot_u, self.space.knot_v
        bu = np.array([ku.span_bounds(i) for i in iu])
        bv = np.array([kv.span_bounds(i) for i in iv])
        ref = np.asarray(ref_points, dtype=float)
        r = bu[:, :1] + (ref[None, :, 0] + 1) * 0.5 * (bu[:, 1:] - bu[:, :1])
        s = bv[:, :1] + (ref[None, :, 1] + 1) * 0.5 * (bv[:, 1:] - bv[:, :1])
        scale = 0.25 * (bu[:, 1] - bu[:, 0]) * (bv[:, 1] - bv[:, 0])
        return np.stack([r, s], -1), scale

    def evaluate(self, elems, rs, order):
        """Shape-function jets, connectivity and geometry jets at ``rs`` (E, Q, 2)."""
        basis, conn = self.space.basis_jets(elems, rs, order)
        if self.isoparametric:
            nq = np.asarray(rs).shape[1]
            cp = self.geometry.control_points.reshape(-1, 3)[np.repeat(conn, nq, axis=0)]
            geom = linear_combination(basis, cp)
        else:
            geom = self.geometry.geometry_jets(elems, rs, order)
        return basis, conn, geom


# -- point-wise API -----------------------------------------------------------

@dataclass
class BasisEval:
    """Shape functions supported on an element, evaluated at one point.

    ``ders[i, a, b]`` is the mixed parametric derivative of order ``(a, b)``
    of function ``indices[i]``; entries with ``a + b > d_max`` are zero.
    """

    elem: int
    point: tuple
    indices: np.ndarray
    ders: np.ndarray

    @property
    def values(self):
        return self.ders[:, 0, 0]

    @property
    def d_max(self):
        return self.ders.shape[-1] - 1

    def jet(self):
        return Jet.from_derivatives(self.ders)


@dataclass
class GeometryEval:
    x: np.ndarray
    ders: np.ndarray  # (3, d+1, d+1)

    @property
    def jacobian(self):
        return np.stack([self.ders[:, 1, 0], self.ders[:, 0, 1]], axis=-1)

    def jet(self):
        return Jet.from_derivatives(self.ders)


def _check_point(space, elem, point, d_max):
    if d_max > MAX_DERIVATIVE or d_max < 0:
        raise ValueError(f"d_max must lie in [0, {MAX_DERIVATIVE}]")
    if not 0 <= elem < space.n_elements:
        raise ValueError(f"element {elem} does not exist")
    (r0, r1), (s0, s1) = space.element_bounds(elem)
    r, s = point
    tol = 1e-12 * max(1.0, abs(r1 - r0), abs(s1 - s0))
    if not (r0 - tol <= r <= r1 + tol and s0 - tol <= s <= s1 + tol):
        raise PointOutsideElementError(f"point {point} lies outside element {elem}")


def _as_mesh(obj):
    if isinstance(obj, Mesh):
        return obj
    if isinstance(obj, NurbsPatch):
        return Mesh.from_patch(obj)
    raise TypeError("expected a NurbsPatch or Mesh")


def eval_basis(patch, elem, point, d_max):
    """Values and mixed parametric derivatives through ``d_max`` at one point."""
    mesh = _as_mesh(patch)
    _check_point(mesh.space, elem, point, d_max)
    jets, conn = mesh.space.basis_jets([elem], np.array([[point]], dtype=float), d_max)
    return BasisEval(int(elem), tuple(point), conn[0], jets.derivatives()[0])


def eval_geometry(patch, elem, point, d_max):
    """Mapped point and parametric derivatives of the surface map through ``d_max``."""
    mesh = _as_mesh(patch)
    _check_point(mesh.space, elem, point, d_max)
    _, _, geom = mesh.evaluate([elem], np.array([[point]], dtype=float), max(d_max, 1))
    ders = geom.derivatives()[0]
    check_jacobian(ders[:, 1, 0], ders[:, 0, 1])
    return GeometryEval(ders[:, 0, 0].copy(), ders[:, : d_max + 1, : d_max + 1].copy())


def check_jacobian(jr, js):
    jr = np.asarray(jr)
    js = np.asarray(js)
    area = np.linalg.norm(np.cross(jr, js), axis=-1)
    scale = np.linalg.norm(jr, axis=-1) * np.linalg.norm(js, axis=-1)
    if np.any(area < 1e-12 * scale) or np.any(scale == 0):
        raise DegenerateGeometryError("surface map has parallel Jacobian columns")


# -- quadrature ---------------------------------------------------------------

@dataclass
class QuadratureRule:
    points: np.ndarray  # (Q, 2) in [-1, 1]^2
    weights: np.ndarray  # (Q,)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.points.ndim != 2 or self.points.shape[1] != 2 or self.weights.shape != (len(self.points),):
            raise ValueError("quadrature points must be (Q, 2) with Q weights")


def gauss_rule(n_points_per_dir):
    """Tensor-product Gauss-Legendre rule on the reference square [-1, 1]^2."""
    n = int(n_points_per_dir)
    if not 1 <= n <= 16:
        raise ValueError("number of Gauss points per direction must lie in [1, 16]")
    x, w = np.polynomial.legendre.leggauss(n)
    pts = np.stack(np.meshgrid(x, x, indexing="ij"), -1).reshape(-1, 2)
    return QuadratureRule(pts, np.outer(w, w).ravel())


def gauss_line(n_points):
    n = int(n_points)
    if not 1 <= n <= 16:
        raise ValueError("number of Gauss points must lie in [1, 16]")
    return np.polynomial.legendre.leggauss(n)


# -- plain-text patch files ---------------------------------------------------

PATCH_FORMAT = """\
Patch file grammar (whitespace separated, '#' starts a comment line):

    degree <p_u> <p_v>
    knots_u <count>
    <count knot values>
    knots_v <count>
    <count knot values>
    control_points <n_u> <n_v>
    <n_u * n_v lines "x y z w", index j (v-direction) running fastest>

Floats are written with repr() so a write/read cycle is bit-exact.
"""


def write_patch(patch, path):
    lines = ["# tdcshell NURBS patch", f"degree {patch.knot_u.degree} {patch.knot_v.degree}"]
    for name, kv in (("knots_u", patch.knot_u), ("knots_v", patch.knot_v)):
        lines.append(f"{name} {len(kv.knots)}")
        lines.append(" ".join(repr(float(k)) for k in kv.knots))
    nu, nv = patch.space.shape
    lines.append(f"control_points {nu} {nv}")
    for i in range(nu):
        for j in range(nv):
            x, y, z = patch.control_points[i, j]
            lines.append(" ".join(repr(float(v)) for v in (x, y, z, patch.weights[i, j])))
    Path(path).write_text("\n".join(lines) + "\n")


def read_patch(path):
    tokens = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0]
        tokens.extend(line.split())
    it = iter(tokens)

    def expect(word):
        tok = next(it, None)
        if tok != word:
            raise ValueError(f"patch file: expected {word!r}, found {tok!r}")

    try:
        expect("degree")
        pu, pv = int(next(it)), int(next(it))
        expect("knots_u")
        ku = [float(next(it)) for _ in range(int(next(it)))]
        expect("knots_v")
        kv = [float(next(it)) for _ in range(int(next(it)))]
        expect("control_points")
        nu, nv = int(next(it)), int(next(it))
        data = np.array([float(next(it)) for _ in range(4 * nu * nv)]).reshape(nu, nv, 4)
    except StopIteration:
        raise ValueError("patch file ended prematurely") from None
    if next(it, None) is not None:
        raise ValueError("patch file has trailing data")
    return NurbsPatch(KnotVector(ku, pu), KnotVector(kv, pv), data[..., :3], data[..., 3])


# -- standard patches ---------------------------------------------------------

def bilinear_patch(corners):
    """Single-span bilinear patch from corners ordered (0,0), (1,0), (0,1), (1,1)."""
    c = np.asarray(corners, dtype=float)
    cp = np.array([[c[0], c[2]], [c[1], c[3]]])
    kv = KnotVector([0, 0, 1, 1], 1)
    return NurbsPatch(kv, kv, cp)


def cylinder_patch(radius, angle_range, y_range, inward=False):
    """Exact rational-quadratic cylindrical patch around the y axis.

    Points are ``(R sin(phi), y, R cos(phi))`` with ``phi`` along r and ``y``
    along s; the parametric normal points away from the axis unless ``inward``.
    The angular range must be below 180 degrees.
    """
    a0, a1 = angle_range
    if not 0 < a1 - a0 < np.pi:
        raise ValueError("angular range must lie in (0, pi)")
    half = 0.5 * (a1 - a0)
    mid = 0.5 * (a0 + a1)
    ang = [a0, mid, a1]
    rad = [radius, radius / np.cos(half), radius]
    w = [1.0, np.cos(half), 1.0]
    y0, y1 = y_range
    cp = np.zeros((3, 2, 3))
    wts = np.zeros((3, 2))
    for i in range(3):
        for j, y in enumerate((y0, y1)):
            cp[i, j] = (rad[i] * np.sin(ang[i]), y, rad[i] * np.cos(ang[i]))
            wts[i, j] = w[i]
    kq = KnotVector([0, 0, 0, 1, 1, 1], 2)
    kl = KnotVector([0, 0, 1, 1], 1)
    patch = NurbsPatch(kq, kl, cp, wts)
    if inward:
        patch = NurbsPatch(kl, kq, cp.swapaxes(0, 1), wts.T)
    return patch
