"""Element matrices, Lagrange-multiplier constraints and the saddle-point solve.

Global unknowns are ordered component-major: DOF ``k * n_basis + I`` is the
``k``-th displacement component of control point ``I``. Element matrices use
the same layout locally (``k * F + a``).
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .nurbs import Mesh, NurbsPatch, gauss_line, gauss_rule
from .tdc import SurfaceJets, hessian_dir_values, shape_gradients

BC_TYPES = ("clamped", "simply_supported", "symmetry", "free", "diaphragm")
DIAPHRAGM_COMPONENTS = (0, 2)
CHUNK_ELEMENTS = 64


class SingularSystemError(RuntimeError):
    """The constrained system has a nullspace (insufficient supports)."""

    def __init__(self, nullity, message=None):
        self.nullity = int(nullity)
        super().__init__(message or f"singular system: nullspace dimension {self.nullity}")

    def __reduce__(self):
        return type(self), (self.nullity, str(self))


class NumericalFailure(RuntimeError):
    """The direct solve did not meet its residual contract."""


@dataclass(frozen=True)
class BoundaryCondition:
    """Boundary condition on a parametric edge ``r0``, ``r1``, ``s0`` or ``s1``."""

    edge: str
    kind: str

    def __post_init__(self):
        if self.kind not in BC_TYPES:
            raise ValueError(f"unknown boundary condition type {self.kind!r}")
        if self.edge not in ("r0", "r1", "s0", "s1"):
            raise ValueError(f"unknown edge {self.edge!r}")


@dataclass(frozen=True)
class MeanConstraint:
    """Single multiplier fixing the mean of one displacement component over edges.

    Removes a rigid translation that the boundary conditions leave free without
    influencing the deformation of symmetric problems.
    """

    component: int
    edges: tuple


@dataclass
class ElementMatrices:
    K_M: np.ndarray  # (C, 3F, 3F)
    K_B: np.ndarray
    conn: np.ndarray  # (C, F)

    @property
    def K(self):
        return self.K_M + self.K_B


def _chunks(n, size):
    for start in range(0, n, size):
        yield np.arange(start, min(n, start + size))


def default_rule(mesh, extra=0):
    pu, pv = mesh.space.degrees
    return gauss_rule(max(pu, pv) + 1 + extra)


def _split_derivatives(basis):
    d = basis.derivatives()
    dn = np.stack([d[..., 1, 0], d[..., 0, 1]], axis=-1)
    ddn = np.stack([np.stack([d[..., 2, 0], d[..., 1, 1]], -1), np.stack([d[..., 1, 1], d[..., 0, 2]], -1)], -2)
    return d[..., 0, 0], dn, ddn


@dataclass
class QuadratureData:
    """Everything the element integrals need at the quadrature points of a chunk."""

    N: np.ndarray  # (C, q, F)
    grad: np.ndarray  # (C, q, F, 3)
    hess_dir: np.ndarray | None  # (C, q, F, 3, 3)
    n: np.ndarray  # (C, q, 3)
    P: np.ndarray  # (C, q, 3, 3)
    x: np.ndarray  # (C, q, 3)
    rs: np.ndarray  # (C, q, 2)
    wdA: np.ndarray  # (C, q)
    conn: np.ndarray  # (C, F)


def quadrature_data(mesh, elems, rule, order=2):
    elems = np.atleast_1d(elems)
    rs, scale = mesh.element_points(elems, rule.points)
    basis, conn, geom = mesh.evaluate(elems, rs, order)
    sj = SurfaceJets(geom)
    C, q = rs.shape[:2]
    F = conn.shape[1]
    if order >= 2:
        N, dn, ddn = _split_derivatives(basis)
    else:
        d = basis.derivatives()
        N, dn = d[..., 0, 0], np.stack([d[..., 1, 0], d[..., 0, 1]], axis=-1)
    Q = sj.Q.value
    g = shape_gradients(dn, Q)
    he = None
    if order >= 2:
        dQ = np.stack([sj.Q.dr().value, sj.Q.ds().value], axis=-1)
        he = hessian_dir_values(dn, ddn, Q, dQ).reshape(C, q, F, 3, 3)
    wdA = sj.area.value.reshape(C, q) * scale[:, None] * rule.weights[None, :]
    return QuadratureData(
        N=N.reshape(C, q, F),
        grad=g.reshape(C, q, F, 3),
        hess_dir=he,
        n=sj.n.value.reshape(C, q, 3),
        P=sj.P.value.reshape(C, q, 3, 3),
        x=geom.value.reshape(C, q, 3),
        rs=rs,
        wdA=wdA,
        conn=conn,
    )


def stiffness_from_data(qd, material, variant="covariant"):
    """Membrane and bending element matrices from quadrature data.

    ``variant`` selects the bending kernel: ``"covariant"`` contracts covariant
    Hessians, ``"directional"`` uses ``tr(P He_I He_J)`` with directional
    Hessians only. Both are the same bilinear form.
    """
    mu, lam, t, D, nu = material.mu, material.lam, material.t, material.D_B, material.nu
    g, w, P, n = qd.grad, qd.wdA, qd.P, qd.n
    C, _, F, _ = g.shape
    gw = g * w[..., None, None]
    gg = np.einsum("cqIa,cqJa->cqIJ", gw, g, optimize=True)
    km = mu * np.einsum("cqij,cqIJ->ciIjJ", P, gg, optimize=True)
    km += mu * np.einsum("cqIj,cqJi->ciIjJ", gw, g, optimize=True)
    km += lam * np.einsum("cqIi,cqJj->ciIjJ", gw, g, optimize=True)
    km *= t
    he = qd.hess_dir
    tr = np.trace(he, axis1=-2, axis2=-1)
    if variant == "covariant":
        hc = np.einsum("cqik,cqFkj->cqFij", P, he, optimize=True)
        bb = np.einsum("cqIab,cqJab->cqIJ", hc, hc, optimize=True)
    elif variant == "directional":
        bb = np.einsum("cqea,cqIab,cqJbe->cqIJ", P, he, he, optimize=True)
    else:
        raise ValueError(f"unknown bending variant {variant!r}")
    bb = (1 - nu) * bb + nu * tr[..., :, None] * tr[..., None, :]
    kb = D * np.einsum("cqi,cqj,cqIJ->ciIjJ", n * w[..., None], n, bb, optimize=True)
    return km.reshape(C, 3 * F, 3 * F), kb.reshape(C, 3 * F, 3 * F)


def element_stiffness(mesh, elems, material, rule=None, variant="covariant"):
    """Element stiffness matrices ``K_M + K_B`` for the given elements."""
    if isinstance(mesh, NurbsPatch):
        mesh = Mesh.from_patch(mesh)
    rule = rule or default_rule(mesh)
    qd = quadrature_data(mesh, elems, rule)
    km, kb = stiffness_from_data(qd, material, variant)
    return ElementMatrices(km, kb, qd.conn)


def load_from_data(qd, load):
    """Consistent load ``int N_I f_k`` for a load callable ``load(x, rs) -> (..., 3)``."""
    C, q, F = qd.N.shape
    if load is None:
        return np.zeros((C, 3 * F))
    fx = np.asarray(load(qd.x.reshape(-1, 3), qd.rs.reshape(-1, 2)), dtype=float)
    fx = np.broadcast_to(fx, (C * q, 3)).reshape(C, q, 3)
    fe = np.einsum("cqI,cqk,cq->ckI", qd.N, fx, qd.wdA, optimize=True)
    return fe.reshape(C, 3 * F)


def element_load(mesh, elems, load, rule=None):
    if isinstance(mesh, NurbsPatch):
        mesh = Mesh.from_patch(mesh)
    rule = rule or default_rule(mesh)
    return load_from_data(quadrature_data(mesh, elems, rule, order=1), load)


def _global_dofs(conn, n_basis):
    return (np.arange(3)[None, :, None] * n_basis + conn[:, None, :]).reshape(len(conn), -1)


def assemble_system(mesh, material, load=None, rule=None, variant="covariant", chunk=CHUNK_ELEMENTS):
    """Global stiffness (CSR) and consistent load vector, assembled in element order."""
    rule = rule or default_rule(mesh)
    ndof = 3 * mesh.n_basis
    K = sp.csr_matrix((ndof, ndof))
    f = np.zeros(ndof)
    for elems in _chunks(mesh.n_elements, chunk):
        qd = quadrature_data(mesh, elems, rule)
        km, kb = stiffness_from_data(qd, material, variant)
        ke = km + kb
        dofs = _global_dofs(qd.conn, mesh.n_basis)
        rows = np.repeat(dofs[:, :, None], dofs.shape[1], axis=2).ravel()
        cols = np.repeat(dofs[:, None, :], dofs.shape[1], axis=1).ravel()
        K = K + sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(ndof, ndof)).tocsr()
        fe = load_from_data(qd, load)
        np.add.at(f, dofs.ravel(), fe.ravel())
    K = 0.5 * (K + K.T)
    return K.tocsr(), f


def point_load_vector(mesh, point, force):
    """Consistent point load: basis values at the parametric location times the force."""
    r, s = point
    elem = int(mesh.space.element_of(r, s))
    basis, conn = mesh.space.basis_jets([elem], np.array([[[r, s]]], dtype=float), 0)
    vals = basis.value[0]
    f = np.zeros(3 * mesh.n_basis)
    for k in range(3):
        np.add.at(f, k * mesh.n_basis + conn[0], vals * force[k])
    return f


# -- constraints ---------------------------------------------------------------

@dataclass
class EdgeData:
    N: np.ndarray  # (q, F)
    grad: np.ndarray  # (q, F, 3)
    n: np.ndarray  # (q, 3)
    t: np.ndarray  # (q, 3)
    n_bnd: np.ndarray  # (q, 3)
    x: np.ndarray  # (q, 3)
    w: np.ndarray  # (q,) line measure times weight
    conn: np.ndarray  # (q, F)


EDGE_TANGENT = {"r0": (1, 1.0), "r1": (1, -1.0), "s0": (0, -1.0), "s1": (0, 1.0)}


def edge_quadrature(mesh, edge, n_points=None):
    """Gauss points along a parametric edge with the boundary frame.

    The tangent ``t`` is oriented such that the co-normal ``n_bnd = n x t``
    points out of the patch.
    """
    space = mesh.space
    along = space.knot_v if edge in ("r0", "r1") else space.knot_u
    across = space.knot_u if edge in ("r0", "r1") else space.knot_v
    if across.periodic:
        raise ValueError(f"edge {edge} does not exist on a periodic direction")
    n_points = n_points or along.degree + 1
    xg, wg = gauss_line(n_points)
    fixed = across.domain[0] if edge.endswith("0") else across.domain[1]
    vals, weights = [], []
    for span in range(along.n_spans):
        a, b = along.span_bounds(span)
        vals.append(a + (xg + 1) * 0.5 * (b - a))
        weights.append(wg * 0.5 * (b - a))
    vals = np.concatenate(vals)
    weights = np.concatenate(weights)
    if edge in ("r0", "r1"):
        rs = np.stack([np.full_like(vals, fixed), vals], -1)
    else:
        rs = np.stack([vals, np.full_like(vals, fixed)], -1)
    elems = space.element_of(rs[:, 0], rs[:, 1])
    basis, conn, geom = mesh.evaluate(elems, rs[:, None, :], 1)
    sj = SurfaceJets(geom)
    d = basis.derivatives()
    dn = np.stack([d[..., 1, 0], d[..., 0, 1]], axis=-1)
    J = sj.J.value
    col, sign = EDGE_TANGENT[edge]
    jt = J[:, :, col]
    length = np.linalg.norm(jt, axis=-1)
    t = sign * jt / length[:, None]
    n = sj.n.value
    return EdgeData(
        N=basis.value,
        grad=shape_gradients(dn, sj.Q.value),
        n=n,
        t=t,
        n_bnd=np.cross(n, t),
        x=geom.value,
        w=weights * length,
        conn=conn,
    )


def _constraint_rows(kind):
    if kind == "free":
        return []
    if kind == "simply_supported":
        return [("disp", 0), ("disp", 1), ("disp", 2)]
    if kind == "clamped":
        return [("disp", 0), ("disp", 1), ("disp", 2), ("rot", None)]
    if kind == "symmetry":
        return [("conormal", None), ("rot", None)]
    if kind == "diaphragm":
        return [("disp", k) for k in DIAPHRAGM_COMPONENTS]
    raise ValueError(f"unknown boundary condition type {kind!r}")


def constraint_matrix(mesh, bc, n_points=None):
    """Constraint block ``C`` (n_dof x n_multipliers) for one boundary condition.

    Multipliers live in the trace of the displacement space on the edge.
    Rows: ``disp`` constrains one displacement component, ``conormal`` the
    co-normal displacement ``u . n_bnd`` and ``rot`` the rotation about the
    edge ``w . n_bnd`` (proportional to ``n_k grad(u_k) . n_bnd``).
    """
    ndof = 3 * mesh.n_basis
    if isinstance(bc, MeanConstraint):
        col = np.zeros((3, mesh.n_basis))
        for edge in bc.edges:
            ed = edge_quadrature(mesh, edge, n_points)
            for qi in range(len(ed.w)):
                np.add.at(col[bc.component], ed.conn[qi], ed.N[qi] * ed.w[qi])
        return sp.csc_matrix(col.reshape(ndof, 1))
    rows = _constraint_rows(bc.kind)
    if not rows:
        return sp.csc_matrix((ndof, 0))
    ed = edge_quadrature(mesh, bc.edge, n_points)
    trace_funcs = mesh.space.edge_functions(bc.edge)
    col_of = -np.ones(mesh.n_basis, dtype=int)
    col_of[trace_funcs] = np.arange(len(trace_funcs))
    nL = len(trace_funcs)
    # multiplier basis values at the edge points: (q, nL)
    q = ed.N.shape[0]
    lam = np.zeros((q, nL))
    mask = col_of[ed.conn] >= 0
    qi, fi = np.nonzero(mask)
    lam[qi, col_of[ed.conn[qi, fi]]] = ed.N[qi, fi]
    blocks = []
    for kind, comp in rows:
        block = np.zeros((3, mesh.n_basis, nL))
        if kind == "disp":
            _scatter(block[comp], ed.conn, np.einsum("qL,qF,q->qFL", lam, ed.N, ed.w))
        elif kind == "conormal":
            for k in range(3):
                _scatter(block[k], ed.conn, np.einsum("qL,qF,q->qFL", lam, ed.N, ed.w * ed.n_bnd[:, k]))
        elif kind == "rot":
            dn = np.einsum("qFi,qi->qF", ed.grad, ed.n_bnd)
            for k in range(3):
                _scatter(block[k], ed.conn, np.einsum("qL,qF,q->qFL", lam, dn, ed.w * ed.n[:, k]))
        blocks.append(block.reshape(ndof, nL))
    return sp.csc_matrix(np.concatenate(blocks, axis=1))


def _scatter(target, conn, vals_q):
    """Accumulate per-point contributions ``vals_q[q, F, L]`` into ``target[I, L]``."""
    for qi in range(conn.shape[0]):
        np.add.at(target, conn[qi], vals_q[qi])


def assemble_constraints(mesh, bcs, n_points=None):
    ndof = 3 * mesh.n_basis
    blocks = [constraint_matrix(mesh, bc, n_points) for bc in bcs]
    blocks = [b for b in blocks if b.shape[1]]
    if not blocks:
        return sp.csc_matrix((ndof, 0))
    return sp.hstack(blocks).tocsc()


# -- solve ---------------------------------------------------------------------

@dataclass
class SolveResult:
    u: np.ndarray
    multipliers: np.ndarray
    condition: float
    removed_constraints: int
    residual: float
    kept_constraints: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))


def filter_constraints(C, tol=1e-10):
    """Drop linearly dependent multiplier columns by pivoted QR.

    Columns are normalised first; a column is kept when its pivot exceeds
    ``tol`` times the largest pivot. Returns the kept column indices (sorted)
    and the number removed.
    """
    m = C.shape[1]
    if m == 0:
        return np.zeros(0, dtype=int), 0
    dense = C.toarray() if sp.issparse(C) else np.asarray(C)
    norms = np.linalg.norm(dense, axis=0)
    nonzero = norms > 0
    cols = np.flatnonzero(nonzero)
    Cn = dense[:, cols] / norms[cols]
    _, R, piv = scipy.linalg.qr(Cn, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > tol * diag[0])) if len(diag) else 0
    kept = np.sort(cols[piv[:rank]])
    return kept, m - len(kept)


def rigid_modes(mesh):
    """Rigid translations and linearised rotations on an isoparametric mesh (n_dof x 6)."""
    nb = mesh.n_basis
    pts = mesh.geometry.control_points.reshape(-1, 3)
    modes = np.zeros((3 * nb, 6))
    for k in range(3):
        modes[k * nb : (k + 1) * nb, k] = 1.0
    center = pts.mean(axis=0)
    rel = pts - center
    for a in range(3):
        omega = np.eye(3)[a]
        u = np.cross(omega, rel)
        modes[:, 3 + a] = u.T.ravel()
    return modes


def constrained_nullity(C, modes, tol=1e-9):
    """Number of rigid modes left unconstrained by ``C``."""
    if C.shape[1] == 0:
        return modes.shape[1]
    m = modes / np.linalg.norm(modes, axis=0)
    Cd = C.toarray() if sp.issparse(C) else np.asarray(C)
    Cd = Cd / np.maximum(np.linalg.norm(Cd, axis=0), 1e-300)
    s = np.linalg.svd(Cd.T @ m, compute_uv=False)
    rank = int(np.sum(s > tol * max(1.0, s.max(initial=0.0))))
    return modes.shape[1] - rank


def solve_saddle(K, C, f, modes=None, estimate_condition=True, tol=1e-10):
    """Direct solve of ``[K C; C^T 0] [u; lam] = [f; 0]``.

    Redundant constraint columns are filtered first. When rigid modes are
    supplied, an unconstrained rigid motion is reported as
    :class:`SingularSystemError` before factorisation.
    """
    ndof = K.shape[0]
    kept, removed = filter_constraints(C, tol)
    C = C[:, kept] if C.shape[1] else C
    if modes is not None:
        nullity = constrained_nullity(C, modes)
        if nullity:
            raise SingularSystemError(nullity)
    m = C.shape[1]
    knorm = spla.norm(K, 1)
    cnorm = spla.norm(C, 1) if m else 1.0
    alpha = knorm / cnorm if cnorm > 0 else 1.0
    A = sp.bmat([[K, alpha * C], [alpha * C.T, None]], format="csc")
    b = np.concatenate([f, np.zeros(m)])
    if not np.any(b):
        return SolveResult(np.zeros(ndof), np.zeros(m), np.nan, removed, 0.0, kept)
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        raise SingularSystemError(-1, f"singular system: {exc}") from None
    x = lu.solve(b)
    if not np.all(np.isfinite(x)):
        raise NumericalFailure("non-finite solution")
    res = np.linalg.norm(A @ x - b) / np.linalg.norm(b)
    if res > tol:
        raise NumericalFailure(f"solve residual {res:.3e} exceeds {tol:g}")
    cond = np.nan
    if estimate_condition:
        inv = spla.LinearOperator(A.shape, matvec=lu.solve, rmatvec=lambda y: lu.solve(y, trans="T"), dtype=float)
        cond = float(spla.onenormest(A) * spla.onenormest(inv))
    return SolveResult(x[:ndof], alpha * x[ndof:], cond, removed, float(res), kept)


def dump_system(path, K, C, f):
    """Write the saddle matrix and right-hand side in Matrix Market format."""
    m = C.shape[1]
    A = sp.bmat([[K, C], [C.T, None]], format="coo") if m else K.tocoo()
    buf = io.BytesIO()
    scipy.io.mmwrite(buf, A, precision=17)
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())
    b = np.concatenate([f, np.zeros(m)])
    with open(str(path) + ".rhs", "w") as fh:
        fh.write("\n".join(f"{v:.17g}" for v in b) + "\n")


# -- problem driver ------------------------------------------------------------

@dataclass
class ShellProblem:
    """A single-patch shell problem ready for assembly and solution."""

    mesh: Mesh
    material: object
    bcs: list
    load: object = None  # callable (x, rs) -> (..., 3)
    point_loads: list = field(default_factory=list)  # [((r, s), force)]
    rule: object = None


@dataclass
class Solution:
    problem: ShellProblem
    coefficients: np.ndarray  # (3, n_basis)
    multipliers: np.ndarray
    f: np.ndarray
    condition: float
    removed_constraints: int
    residual: float
    K: object = None
    C: object = None

    @property
    def u(self):
        return self.coefficients.ravel()

    @property
    def energy(self):
        """Stored elastic energy ``f . u / 2``."""
        return 0.5 * float(self.f @ self.u)


def solve_problem(problem, keep_matrices=False, estimate_condition=True):
    mesh = problem.mesh
    K, f = assemble_system(mesh, problem.material, problem.load, problem.rule)
    for point, force in problem.point_loads:
        f = f + point_load_vector(mesh, point, force)
    C = assemble_constraints(mesh, problem.bcs)
    modes = rigid_modes(mesh) if mesh.isoparametric else None
    res = solve_saddle(K, C, f, modes, estimate_condition=estimate_condition)
    return Solution(
        problem,
        res.u.reshape(3, mesh.n_basis),
        res.multipliers,
        f,
        res.condition,
        res.removed_constraints,
        res.residual,
        K if keep_matrices else None,
        C if keep_matrices else None,
    )
