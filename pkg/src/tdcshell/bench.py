"""Benchmark problems, error measures and convergence studies.

Four cases are provided: a rotated flat shell with a manufactured solution,
the Scordelis-Lo roof, the pinched cylinder (one-eighth model) and a
flower-shaped shell clamped along both of its boundary curves.
"""
from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .assembly import (
    BoundaryCondition,
    MeanConstraint,
    NumericalFailure,
    ShellProblem,
    SingularSystemError,
    dump_system,
    solve_problem,
)
from .jets import Jet, linear_combination, stack
from .nurbs import (
    AnalyticSurface,
    KnotVector,
    Mesh,
    SplineSpace,
    bilinear_patch,
    cylinder_patch,
    gauss_rule,
    read_patch,
)
from .shell import Material, ShellField, principal_values
from .tdc import SurfaceJets

CSV_COLUMNS = (
    "case", "p", "n", "h", "dofs", "err_u", "err_n", "err_m", "err_q",
    "residual", "uz_max", "u_load", "energy", "runtime_s",
)
FIELD_COLUMNS = ("r", "s", "x", "y", "z", "ux", "uy", "uz", "m1", "m2", "q1", "q2", "q3")

SCORDELIS_REFERENCE = 0.3024
PINCHED_REFERENCE = 1.82488e-5
FLOWER_REFERENCE = 1.7635958

DEFAULT_P = (2, 3, 4, 5, 6)
DEFAULT_N = (2, 4, 8, 16, 32)


@dataclass
class BenchmarkCase:
    """Everything needed to build and post-process one benchmark."""

    name: str
    material: Material
    bcs: list
    build_mesh: object  # (p, n) -> Mesh
    load: object = None  # (x, rs) -> (..., 3)
    point_loads: list = field(default_factory=list)
    reference: dict = field(default_factory=dict)
    exact: object = None  # analytic fields for error norms
    min_degree: int = 1

    def problem(self, p, n):
        if p < self.min_degree:
            raise ValueError(f"{self.name} needs degree >= {self.min_degree}")
        return ShellProblem(self.build_mesh(p, n), self.material, list(self.bcs), self.load, list(self.point_loads))

    def scaled(self, factor):
        """Same case with E and every load multiplied by ``factor``."""
        load = None
        if self.load is not None:
            base = self.load
            load = lambda x, rs: factor * np.asarray(base(x, rs))
        pls = [(pt, factor * np.asarray(f)) for pt, f in self.point_loads]
        return replace(self, material=self.material.scaled(factor), load=load, point_loads=pls)


# -- flat shell with manufactured solution -------------------------------------

FLAT_NORMAL = np.array([-0.25, -np.sqrt(3) / 2, np.sqrt(3) / 4])


def flat_rotation(normal=FLAT_NORMAL):
    """Proper rotation whose third column is ``normal``."""
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    a = np.cross(n, [1.0, 0.0, 0.0])
    a /= np.linalg.norm(a)
    b = np.cross(n, a)
    return np.stack([a, b, n], axis=1)


class FlatShellSolution:
    """Analytic fields of the flat-shell manufactured solution.

    In local plate coordinates ``(r, s)`` on the unit square the tangential
    displacement is ``(1, 1) S / 4`` and the normal one ``-S / (4 pi^4)`` with
    ``S = sin(pi r) sin(pi s)``; the rotation ``R`` maps local to global axes.
    """

    amplitude_t = 0.25

    def __init__(self, material, rotation):
        self.mat = material
        self.R = rotation
        self.c = -1.0 / (4 * np.pi**4)

    def _sc(self, rs):
        r, s = np.pi * rs[..., 0], np.pi * rs[..., 1]
        return np.sin(r), np.cos(r), np.sin(s), np.cos(s)

    def u(self, rs):
        sr, _, ss, _ = self._sc(rs)
        S = sr * ss
        loc = np.stack([self.amplitude_t * S, self.amplitude_t * S, self.c * S], -1)
        return loc @ self.R.T

    def u_jet(self, r, s):
        S = (r * np.pi).sin() * (s * np.pi).sin()
        loc = [S * self.amplitude_t, S * self.amplitude_t, S * self.c]
        return [sum((loc[k] * self.R[i, k] for k in range(1, 3)), loc[0] * self.R[i, 0]) for i in range(3)]

    def load(self, x, rs):
        mat = self.mat
        sr, cr, ss, cs = self._sc(np.asarray(rs))
        S, C = sr * ss, cr * cs
        ft = -mat.t * self.amplitude_t * np.pi**2 * ((mat.lam + mat.mu) * C - (3 * mat.mu + mat.lam) * S)
        fn = -mat.D_B * S
        return np.stack([ft, ft, fn], -1) @ self.R.T

    def _to_global(self, t2):
        R2 = self.R[:, :2]
        return np.einsum("ia,...ab,jb->...ij", R2, t2, R2)

    def n_eff(self, rs):
        mat = self.mat
        sr, cr, ss, cs = self._sc(rs)
        a = self.amplitude_t * np.pi
        e11, e22 = a * cr * ss, a * sr * cs
        e12 = 0.5 * (a * sr * cs + a * cr * ss)
        tr = e11 + e22
        lam2 = mat.lam * tr
        n2 = mat.t * np.stack(
            [np.stack([2 * mat.mu * e11 + lam2, 2 * mat.mu * e12], -1), np.stack([2 * mat.mu * e12, 2 * mat.mu * e22 + lam2], -1)],
            -2,
        )
        return self._to_global(n2)

    def n_real(self, rs):
        return self.n_eff(rs)

    def m(self, rs):
        mat = self.mat
        sr, cr, ss, cs = self._sc(rs)
        S, C = sr * ss, cr * cs
        k = self.c * np.pi**2
        hw = k * np.stack([np.stack([-S, C], -1), np.stack([C, -S], -1)], -2)
        lap = -2 * k * S
        eye = np.broadcast_to(np.eye(2), hw.shape)
        m2 = -mat.D_B * ((1 - mat.nu) * hw + mat.nu * lap[..., None, None] * eye)
        return self._to_global(m2)

    def q(self, rs):
        sr, cr, ss, cs = self._sc(rs)
        amp = 2 * self.mat.D_B * np.pi**3 * self.c
        q2 = amp * np.stack([cr * ss, sr * cs], -1)
        return q2 @ self.R[:, :2].T


def case_flat_shell(rotation=None):
    material = Material(E=1e4, nu=0.3, t=0.01)
    R = flat_rotation() if rotation is None else np.asarray(rotation, dtype=float)
    exact = FlatShellSolution(material, R)
    corners = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]], dtype=float) @ R.T
    base = bilinear_patch(corners)

    def build(p, n):
        return Mesh.from_patch(base.refined(p, n))

    bcs = [BoundaryCondition(e, "simply_supported") for e in ("r0", "r1", "s0", "s1")]
    return BenchmarkCase(
        "flat_shell", material, bcs, build, load=exact.load, exact=exact,
        reference={"un_max": 1.0 / (4 * np.pi**4)},
    )


def case_scordelis_lo():
    material = Material(E=4.32e8, nu=0.0, t=0.25)
    half = np.deg2rad(40.0)
    base = cylinder_patch(25.0, (-half, half), (0.0, 50.0))

    def build(p, n):
        return Mesh.from_patch(base.refined(p, n))

    bcs = [
        BoundaryCondition("s0", "diaphragm"),
        BoundaryCondition("s1", "diaphragm"),
        MeanConstraint(1, ("s0", "s1")),
    ]
    return BenchmarkCase(
        "scordelis_lo", material, bcs, build, load=lambda x, rs: np.array([0.0, 0.0, -90.0]),
        reference={"uz_max": SCORDELIS_REFERENCE},
    )


def case_pinched_cylinder():
    """One-eighth of the pinched cylinder.

    The patch spans ``phi in [0, 90 deg]`` (r) and ``y in [0, 300]`` (s) with
    points ``(R sin phi, y, R cos phi)``. Symmetry holds on ``phi = 0``,
    ``phi = 90 deg`` and the mid-plane ``y = 0``; the end ``y = 300`` carries
    the rigid diaphragm. A quarter of the unit load acts at ``(0, 0, R)``.
    """
    material = Material(E=3e6, nu=0.3, t=3.0)
    base = cylinder_patch(300.0, (0.0, 0.5 * np.pi), (0.0, 300.0))

    def build(p, n):
        return Mesh.from_patch(base.refined(p, n))

    bcs = [
        BoundaryCondition("r0", "symmetry"),
        BoundaryCondition("r1", "symmetry"),
        BoundaryCondition("s0", "symmetry"),
        BoundaryCondition("s1", "diaphragm"),
    ]
    return BenchmarkCase(
        "pinched_cylinder", material, bcs, build,
        point_loads=[((0.0, 0.0), np.array([0.0, 0.0, -0.25]))],
        reference={"u_load": PINCHED_REFERENCE},
    )


FLOWER_A, FLOWER_B = 2.3, 0.8


def flower_map(r, s):
    """Flower-shaped middle surface on ``(r, s) in [-1, 1]^2``, closed in ``r``."""
    theta = (r + 1.0) * np.pi
    c = s * ((theta * 6.0).cos() * 0.3 + FLOWER_B)
    rad = -c + FLOWER_A
    return [rad * theta.cos(), rad * theta.sin(), -(s * s) + 1.0]


def flower_space(p, n):
    ku = KnotVector(np.linspace(-1.0, 1.0, n + 1), p, periodic=True)
    inner = list(np.linspace(-1.0, 1.0, n + 1)[1:-1])
    kv = KnotVector([-1.0] * (p + 1) + inner + [1.0] * (p + 1), p)
    return SplineSpace(ku, kv)


def case_flower():
    material = Material(E=1e5, nu=0.3, t=0.1)
    surface = AnalyticSurface(flower_map, "flower")

    def build(p, n):
        return Mesh(flower_space(p, n), surface)

    bcs = [BoundaryCondition("s0", "clamped"), BoundaryCondition("s1", "clamped")]
    return BenchmarkCase(
        "flower", material, bcs, build, load=lambda x, rs: np.array([1.0, 2.0, -10.0]),
        reference={"energy": FLOWER_REFERENCE},
    )


CASES = {
    "flat_shell": case_flat_shell,
    "scordelis_lo": case_scordelis_lo,
    "pinched_cylinder": case_pinched_cylinder,
    "flower": case_flower,
}


def case_from_patch(path, material, load=(0.0, 0.0, 0.0), bcs=()):
    """Case on a patch read from ``path`` with a uniform load and the given supports.

    The patch is elevated to ``p`` (single-span directions only) and split
    into ``n`` uniform spans per direction.
    """
    base = read_patch(path)
    load = np.asarray(load, dtype=float)

    def build(p, n):
        return Mesh.from_patch(base.refined(p, n))

    return BenchmarkCase(
        f"patch:{path}", Material(*material), [BoundaryCondition(e, k) for e, k in bcs], build,
        load=lambda x, rs: load, min_degree=max(base.degrees),
    )


def get_case(name, options=None):
    """Benchmark by name; ``"patch"`` builds a case from ``options.patch``."""
    if name == "patch":
        if options is None or options.patch is None:
            raise ValueError("case 'patch' needs a patch file, material and load")
        path, material, load = options.patch
        return case_from_patch(path, material, load, options.bcs)
    try:
        return CASES[name]()
    except KeyError:
        raise ValueError(f"unknown case {name!r}; choose from {sorted(CASES) + ['patch']}") from None


def _with_overrides(problem, options):
    """Apply boundary-condition and quadrature overrides from ``options``."""
    if options.bcs:
        edges = {e for e, _ in options.bcs}
        kept = [bc for bc in problem.bcs if isinstance(bc, MeanConstraint) or bc.edge not in edges]
        problem.bcs = kept + [BoundaryCondition(e, k) for e, k in options.bcs if k != "free"]
    if options.quadrature:
        problem.rule = gauss_rule(options.quadrature)
    return problem


# -- field evaluation ----------------------------------------------------------

def field_at(mesh, coefficients, elems, rs, order, material):
    """:class:`ShellField` of the discrete solution at points ``rs`` (E, Q, 2)."""
    basis, conn, geom = mesh.evaluate(elems, rs, order)
    nq = rs.shape[1]
    coeffs = np.asarray(coefficients).T[np.repeat(conn, nq, axis=0)]
    u = linear_combination(basis, coeffs)
    return ShellField(SurfaceJets(geom), u, material), geom


def field_from_function(func, rs, order):
    rs = np.asarray(rs, dtype=float).reshape(-1, 2)
    r = Jet.variable(rs[:, 0], order, 0)
    s = Jet.variable(rs[:, 1], order, 1)

    return stack(list(func(r, s)), axis=-1)


def sample_points(mesh, k):
    """Uniform ``k x k`` parametric grid with the element containing each point."""
    (r0, r1) = mesh.space.knot_u.domain
    (s0, s1) = mesh.space.knot_v.domain
    r = np.linspace(r0, r1, k)
    s = np.linspace(s0, s1, k)
    rr, ss = np.meshgrid(r, s, indexing="ij")
    rs = np.stack([rr.ravel(), ss.ravel()], -1)
    elems = mesh.space.element_of(rs[:, 0], rs[:, 1])
    return rs, elems


def displacement_at(solution, rs):
    mesh = solution.problem.mesh
    rs = np.atleast_2d(np.asarray(rs, dtype=float))
    elems = mesh.space.element_of(rs[:, 0], rs[:, 1])
    basis, conn = mesh.space.basis_jets(elems, rs[:, None, :], 0)
    return np.einsum("pf,pfk->pk", basis.value, solution.coefficients.T[conn])


def field_samples(solution, k):
    """Rows ``r s x y z ux uy uz m1 m2 q1 q2 q3`` on a uniform parametric grid."""
    mesh = solution.problem.mesh
    rs, elems = sample_points(mesh, k)
    sf, geom = field_at(mesh, solution.coefficients, elems, rs[:, None, :], 3, solution.problem.material)
    m = sf.moment.value
    mp = principal_values(m, sf.sj.n.value)
    return np.column_stack([rs, geom.value, sf.u.value, mp, sf.q.value])


# -- error measures ------------------------------------------------------------

def _rel(num, den):
    if den == 0.0:
        return 0.0 if num == 0.0 else np.inf
    return float(np.sqrt(num / den))


def l2_errors(solution, exact, rule=None):
    """Relative L2 errors of displacement, physical normal force, moment and shear."""
    mesh = solution.problem.mesh
    mat = solution.problem.material
    p = max(mesh.space.degrees)
    rule = rule or gauss_rule(p + 1)
    acc = np.zeros((4, 2))
    for elems in _chunk_ids(mesh.n_elements):
        rs, scale = mesh.element_points(elems, rule.points)
        sf, _ = field_at(mesh, solution.coefficients, elems, rs, 3, mat)
        w = sf.sj.area.value * (scale[:, None] * rule.weights[None, :]).ravel()
        flat = rs.reshape(-1, 2)
        pairs = [
            (sf.u.value, exact.u(flat)),
            (sf.n_real.value, exact.n_real(flat)),
            (sf.moment.value, exact.m(flat)),
            (sf.q.value, exact.q(flat)),
        ]
        for i, (h, e) in enumerate(pairs):
            diff = (h - e).reshape(len(w), -1)
            acc[i, 0] += np.sum(w * np.sum(diff**2, -1))
            acc[i, 1] += np.sum(w * np.sum(e.reshape(len(w), -1) ** 2, -1))
    return {k: _rel(*acc[i]) for i, k in enumerate(("u", "n", "m", "q"))}


def _chunk_ids(n, size=64):
    for start in range(0, n, size):
        yield np.arange(start, min(n, start + size))


@dataclass
class ResidualError:
    value: float
    element_sq: np.ndarray  # per-element squared integrals of |L(u) + f|^2
    load_sq: float


def residual_error(solution=None, mesh=None, material=None, load=None, field=None, rule=None):
    """Relative L2 norm of the strong-form residual ``L(u_h) + f``.

    The squared residual is integrated element by element and normalised by
    the L2 norm of the load over the whole surface. Pass either a solved
    ``solution`` or a closed-form ``field(r_jet, s_jet)`` together with
    ``mesh``, ``material`` and ``load``.
    """
    if solution is not None:
        mesh = solution.problem.mesh
        material = solution.problem.material
        load = solution.problem.load
    p = min(mesh.space.degrees)
    if field is None and p < 4:
        raise ValueError("the residual needs fourth derivatives: degree >= 4 required")
    rule = rule or gauss_rule(max(mesh.space.degrees) + 2)
    elem_sq = np.zeros(mesh.n_elements)
    load_sq = 0.0
    for elems in _chunk_ids(mesh.n_elements):
        rs, scale = mesh.element_points(elems, rule.points)
        if field is None:
            sf, geom = field_at(mesh, solution.coefficients, elems, rs, 4, material)
        else:
            geom = mesh.geometry.geometry_jets(elems, rs, 4)
            sf = ShellField(SurfaceJets(geom), field_from_function(field, rs, 4), material)
        L = sf.strong_form()
        f = np.zeros_like(L) if load is None else np.broadcast_to(np.asarray(load(geom.value, rs.reshape(-1, 2)), dtype=float), L.shape)
        w = sf.sj.area.value * (scale[:, None] * rule.weights[None, :]).ravel()
        contrib = w * np.sum((L + f) ** 2, -1)
        elem_sq[elems] = contrib.reshape(len(elems), -1).sum(-1)
        load_sq += float(np.sum(w * np.sum(f**2, -1)))
    total = float(elem_sq.sum())
    value = 0.0 if total == 0.0 and load_sq == 0.0 else _rel(total, load_sq)
    return ResidualError(value, elem_sq, load_sq)


# -- scalar extractors ---------------------------------------------------------

def max_normal_displacement(solution, k):
    rs, _ = sample_points(solution.problem.mesh, k)
    u = displacement_at(solution, rs)
    R = flat_rotation()
    return float(np.max(np.abs(u @ R[:, 2])))


def max_vertical_displacement(solution, k):
    rs, _ = sample_points(solution.problem.mesh, k)
    return float(np.max(np.abs(displacement_at(solution, rs)[:, 2])))


def load_point_displacement(solution):
    """Displacement along the applied point force direction at its location."""
    (pt, force), = solution.problem.point_loads
    u = displacement_at(solution, [pt])[0]
    return float(u @ force / np.linalg.norm(force))


# -- studies -------------------------------------------------------------------

@dataclass
class RunOptions:
    """Per-cell toggles and overrides.

    ``bcs`` is a tuple of ``(edge, kind)`` pairs replacing the case supports
    on those edges; ``quadrature`` overrides the Gauss points per direction
    (0 keeps the default ``p + 1``); ``patch`` is ``(path, (E, nu, t), load)``
    for the ``"patch"`` case; ``dump_dir`` writes the assembled system.
    """

    residual: bool = False
    sample_grid: int = 0
    timing: bool = False
    oracle: bool = False
    quadrature: int = 0
    bcs: tuple = ()
    patch: tuple | None = None
    dump_dir: str | None = None


def oracle_difference(mesh, material, rule=None):
    """Largest per-element relative difference between TDC and classical stiffness."""
    from .assembly import element_stiffness
    from .classical import element_stiffness_classical

    elems = np.arange(mesh.n_elements)
    a = element_stiffness(mesh, elems, material, rule).K
    b = element_stiffness_classical(mesh, elems, material, rule).K
    return float((np.linalg.norm(a - b, axis=(1, 2)) / np.linalg.norm(a, axis=(1, 2))).max())


def run_cell(case_name, p, n, options=None):
    """Solve one (p, n) cell and compute the case's metrics as a CSV-ready dict.

    With ``options.oracle`` the row also carries an ``"oracle"`` entry (not a
    CSV column) holding :func:`oracle_difference`.
    """
    options = options or RunOptions()
    case = get_case(case_name, options)
    start = time.perf_counter()
    problem = _with_overrides(case.problem(p, n), options)
    keep = options.dump_dir is not None
    sol = solve_problem(problem, keep_matrices=keep, estimate_condition=False)
    if keep:
        dump_system(f"{options.dump_dir}/system_p{p}_n{n}.mtx", sol.K, sol.C, sol.f)
    row = {c: None for c in CSV_COLUMNS}
    row.update(case=case_name, p=p, n=n, h=1.0 / n, dofs=3 * problem.mesh.n_basis, energy=sol.energy)
    grid = 2 * n + 1
    if case_name == "flat_shell":
        errs = l2_errors(sol, case.exact)
        row.update(err_u=errs["u"], err_n=errs["n"], err_m=errs["m"], err_q=errs["q"])
        row["uz_max"] = max_normal_displacement(sol, grid)
    elif case_name == "scordelis_lo":
        row["uz_max"] = max_vertical_displacement(sol, grid)
    elif case_name == "pinched_cylinder":
        row["u_load"] = load_point_displacement(sol)
    if options.residual and min(problem.mesh.space.degrees) >= 4:
        row["residual"] = residual_error(sol).value
    if options.oracle:
        row["oracle"] = oracle_difference(problem.mesh, problem.material, problem.rule)
    if options.timing:
        row["runtime_s"] = time.perf_counter() - start
    samples = field_samples(sol, options.sample_grid) if options.sample_grid else None
    return row, samples


def _cell_job(args):
    case_name, p, n, options = args
    try:
        row, samples = run_cell(case_name, p, n, options)
        return row, samples, None
    except (SingularSystemError, NumericalFailure, ValueError, np.linalg.LinAlgError) as exc:
        return None, None, exc


@dataclass
class ConvergenceReport:
    case: str
    rows: list
    failures: list
    samples: dict = field(default_factory=dict)

    def series(self, p, key):
        rows = sorted((r for r in self.rows if r["p"] == p and r[key] is not None), key=lambda r: r["n"])
        return np.array([r["h"] for r in rows]), np.array([r[key] for r in rows], dtype=float)

    def slope(self, p, key, last=3):
        h, v = self.series(p, key)
        return fit_slope(h[-last:], v[-last:])

    def to_csv(self):
        return format_csv(self.rows)


def fit_slope(h, values):
    """Least-squares slope of ``log(values)`` against ``log(h)``."""
    h = np.asarray(h, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(h) < 2:
        raise ValueError("need at least two points for a slope")
    return float(np.polyfit(np.log(h), np.log(values), 1)[0])


def convergence_study(case_name, p_list=DEFAULT_P, n_list=DEFAULT_N, options=None, jobs=1):
    """Run every (p, n) cell; failures are recorded and the study continues.

    Rows are ordered by ``p`` then ``n`` independent of ``jobs``.
    """
    options = options or RunOptions()
    get_case(case_name, options)
    tasks = [(case_name, p, n, options) for p in p_list for n in n_list]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_cell_job, tasks))
    else:
        results = [_cell_job(t) for t in tasks]
    rows, failures, samples = [], [], {}
    for (_, p, n, _), (row, smp, err) in zip(tasks, results):
        if err is not None:
            failures.append((p, n, err))
        else:
            rows.append(row)
            if smp is not None:
                samples[(p, n)] = smp
    return ConvergenceReport(case_name, rows, failures, samples)


def format_value(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return f"{float(v):.17g}"


def format_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([format_value(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def format_samples(samples):
    lines = [" ".join(FIELD_COLUMNS)]
    for rec in samples:
        lines.append(" ".join(f"{v:.17g}" for v in rec))
    return "\n".join(lines) + "\n"
