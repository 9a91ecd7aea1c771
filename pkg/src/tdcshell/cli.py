"""Command-line front end.

``tdcshell run`` solves one benchmark cell or a convergence study and writes
a CSV report (plus optional field samples and oracle differences) into a
fresh output directory. ``tdcshell verify`` runs the operator property
suite and the TDC-versus-classical fuzz comparison.

Configuration file (INI, flat ``key = value`` per section; unknown sections
or keys are rejected)::

    [run]
    case = scordelis_lo     ; benchmark name or "patch"        (default flat_shell)
    study = false           ; run the full p x n grid            (default false)
    p = 4                   ; degree, or a list for studies      (default 3 / 2 3 4 5 6)
    n = 16                  ; spans per direction, or a list     (default 8 / 2 4 8 16 32)
    out = results           ; output directory, must be new      (default: stdout only)
    jobs = 1                ; worker processes                   (default 1)
    residual = false        ; strong-form residual for p >= 4    (default false)
    oracle = false          ; TDC vs classical element matrices  (default false)
    sample_grid = 11        ; field samples per direction, 0=off (default 11)
    quadrature = 0          ; Gauss points per direction, 0=p+1  (default 0)
    timing = false          ; fill the runtime_s column          (default false)

    [bcs]                   ; per-edge overrides, edge = kind
    s0 = clamped            ; kinds: clamped simply_supported symmetry free diaphragm

    [patch]                 ; only for case = patch
    file = roof.patch       ; patch in the text format of tdcshell.nurbs
    E = 1e4
    nu = 0.3
    t = 0.01
    load = 0 0 -1           ; uniform load per unit area         (default 0 0 0)

    [verify]
    seed = 20240611         ; fuzz seed                          (default 20240611)
    fuzz = 100              ; number of fuzzed patches           (default 100)

Command-line flags override the file. Exit codes: 0 success, 1 failed
verification, 2 configuration error, 3 singular system, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import configparser
import os
import sys

import numpy as np

from . import bench
from .assembly import BC_TYPES, NumericalFailure, SingularSystemError
from .tdc import inject_fault
from .verification import DEFAULT_SEED, run_suite

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_SINGULAR, EXIT_NUMERICAL = 0, 1, 2, 3, 4
EDGES = ("r0", "r1", "s0", "s1")

RUN_KEYS = {
    "case": str,
    "study": "bool",
    "p": "ints",
    "n": "ints",
    "out": str,
    "jobs": int,
    "residual": "bool",
    "oracle": "bool",
    "sample_grid": int,
    "quadrature": int,
    "timing": "bool",
}
PATCH_KEYS = {"file": str, "e": float, "nu": float, "t": float, "load": "floats"}
VERIFY_KEYS = {"seed": int, "fuzz": int}
SECTIONS = {"run": RUN_KEYS, "patch": PATCH_KEYS, "verify": VERIFY_KEYS, "bcs": None}


class ConfigError(ValueError):
    """Invalid configuration file or flag combination."""


def _convert(section, key, raw, kind):
    try:
        if kind == "bool":
            low = raw.strip().lower()
            if low not in ("true", "false", "yes", "no", "on", "off", "1", "0"):
                raise ValueError(raw)
            return low in ("true", "yes", "on", "1")
        if kind == "ints":
            return [int(v) for v in raw.replace(",", " ").split()]
        if kind == "floats":
            return [float(v) for v in raw.replace(",", " ").split()]
        return kind(raw.strip())
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from None


def read_config(path):
    """Parse an INI config into ``{section: {key: value}}`` with typed values."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None
    out = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        keys = SECTIONS[section]
        values = {}
        for key, raw in parser.items(section):
            if section == "bcs":
                if key not in EDGES:
                    raise ConfigError(f"[bcs] unknown edge {key!r}; use one of {EDGES}")
                if raw.strip() not in BC_TYPES:
                    raise ConfigError(f"[bcs] {key}: unknown kind {raw.strip()!r}")
                values[key] = raw.strip()
                continue
            if key not in keys:
                raise ConfigError(f"[{section}] unknown key {key!r}")
            values[key] = _convert(section, key, raw, keys[key])
        out[section] = values
    return out


def _parse_bc(text):
    edge, sep, kind = text.partition("=")
    if not sep or edge not in EDGES or kind not in BC_TYPES:
        raise argparse.ArgumentTypeError(f"expected EDGE=KIND with EDGE in {EDGES} and KIND in {BC_TYPES}")
    return edge, kind


def build_parser():
    parser = argparse.ArgumentParser(prog="tdcshell", description="Isogeometric Kirchhoff-Love shells in tangential calculus.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="solve a benchmark cell or a convergence study")
    run.add_argument("--config", help="INI configuration file")
    what = run.add_mutually_exclusive_group()
    what.add_argument("--case", help="benchmark for a single cell: " + ", ".join(list(bench.CASES) + ["patch"]))
    what.add_argument("--study", metavar="CASE", help="benchmark for a full p x n convergence study")
    run.add_argument("--p", type=int, nargs="+", help="degree(s)")
    run.add_argument("--n", type=int, nargs="+", help="spans per direction")
    run.add_argument("--out", help="new output directory (write-once)")
    run.add_argument("--jobs", type=int, help="worker processes for studies")
    run.add_argument("--seed", type=int, help="accepted for symmetry with verify; runs are deterministic")
    run.add_argument("--residual", action=argparse.BooleanOptionalAction, default=None, help="compute the strong-form residual error")
    run.add_argument("--oracle", action=argparse.BooleanOptionalAction, default=None, help="compare TDC and classical element matrices")
    run.add_argument("--sample-grid", type=int, help="field samples per parametric direction (0 disables)")
    run.add_argument("--quadrature", type=int, help="Gauss points per direction (0 = p + 1)")
    run.add_argument("--timing", action=argparse.BooleanOptionalAction, default=None, help="record wall-clock time per cell")
    run.add_argument("--bc", type=_parse_bc, action="append", metavar="EDGE=KIND", help="override the support on an edge")
    run.add_argument("--patch", help="patch file for case 'patch'")
    run.add_argument("--dump-system", action="store_true", help="write K, C and f of each cell (debug)")

    ver = sub.add_parser("verify", help="run the operator property suite and the oracle fuzz test")
    ver.add_argument("--config", help="INI configuration file ([verify] section)")
    ver.add_argument("--seed", type=int, help=f"fuzz seed (default {DEFAULT_SEED})")
    ver.add_argument("--fuzz", type=int, help="number of fuzzed patches (default 100)")
    ver.add_argument("--inject-fault", help=argparse.SUPPRESS)
    return parser


def _resolve_run(args):
    """Merge config file and flags into ``(case, study, p_list, n_list, out, jobs, options)``."""
    cfg = read_config(args.config) if args.config else {}
    run = cfg.get("run", {})
    study = run.get("study", False)
    case = run.get("case", "flat_shell")
    if args.case is not None:
        case, study = args.case, False
    if args.study is not None:
        case, study = args.study, True
    p = args.p or run.get("p") or (list(bench.DEFAULT_P) if study else [3])
    n = args.n or run.get("n") or (list(bench.DEFAULT_N) if study else [8])
    if not study and (len(p) != 1 or len(n) != 1):
        raise ConfigError("a single run takes one p and one n; use --study for lists")
    if min(p) < 1 or min(n) < 1:
        raise ConfigError("p and n must be positive")
    jobs = args.jobs if args.jobs is not None else run.get("jobs", 1)
    if jobs < 1:
        raise ConfigError("jobs must be at least 1")

    def pick(flag, key, default):
        return flag if flag is not None else run.get(key, default)

    bcs = dict(cfg.get("bcs", {}))
    for edge, kind in args.bc or []:
        bcs[edge] = kind
    patch = None
    if case == "patch":
        pc = cfg.get("patch", {})
        path = args.patch or pc.get("file")
        if path is None or not {"e", "nu", "t"} <= set(pc):
            raise ConfigError("case 'patch' needs a patch file and [patch] E, nu, t")
        load = pc.get("load", [0.0, 0.0, 0.0])
        if len(load) != 3:
            raise ConfigError("[patch] load needs three components")
        if not os.path.isfile(path):
            raise ConfigError(f"patch file {path} not found")
        patch = (path, (pc["e"], pc["nu"], pc["t"]), tuple(load))
    elif case not in bench.CASES:
        raise ConfigError(f"unknown case {case!r}; choose from {sorted(bench.CASES) + ['patch']}")
    options = bench.RunOptions(
        residual=pick(args.residual, "residual", False),
        sample_grid=pick(args.sample_grid, "sample_grid", 11),
        timing=pick(args.timing, "timing", False),
        oracle=pick(args.oracle, "oracle", False),
        quadrature=pick(args.quadrature, "quadrature", 0),
        bcs=tuple(sorted(bcs.items())),
        patch=patch,
    )
    if options.sample_grid < 0 or options.quadrature < 0:
        raise ConfigError("sample_grid and quadrature must be non-negative")
    if options.quadrature > 16:
        raise ConfigError("at most 16 Gauss points per direction are available")
    out = args.out or run.get("out")
    return case, study, p, n, out, jobs, options


def _prepare_out(out):
    if out is None:
        return None
    if os.path.exists(out) and (not os.path.isdir(out) or os.listdir(out)):
        raise ConfigError(f"output directory {out} already exists and is not empty")
    os.makedirs(out, exist_ok=True)
    return out


def _write(out, name, text):
    with open(os.path.join(out, name), "x") as fh:
        fh.write(text)


def _failure_code(exc):
    if isinstance(exc, SingularSystemError):
        return EXIT_SINGULAR
    if isinstance(exc, (NumericalFailure, np.linalg.LinAlgError)):
        return EXIT_NUMERICAL
    return EXIT_CONFIG


def cmd_run(args):
    case, study, p_list, n_list, out, jobs, options = _resolve_run(args)
    out = _prepare_out(out)
    if args.dump_system:
        if out is None:
            raise ConfigError("--dump-system needs --out")
        options.dump_dir = out
    if study:
        report = bench.convergence_study(case, p_list, n_list, options, jobs=jobs)
        rows, samples, failures = report.rows, report.samples, report.failures
    else:
        row, smp = bench.run_cell(case, p_list[0], n_list[0], options)
        rows, samples, failures = [row], ({(p_list[0], n_list[0]): smp} if smp is not None else {}), []
    csv_text = bench.format_csv(rows)
    if out is None:
        sys.stdout.write(csv_text)
    else:
        _write(out, "report.csv", csv_text)
        for (p, n), smp in sorted(samples.items()):
            _write(out, f"samples_p{p}_n{n}.txt", bench.format_samples(smp))
        if options.oracle:
            lines = ["case,p,n,max_rel_diff"] + [
                f"{r['case']},{r['p']},{r['n']},{bench.format_value(r['oracle'])}" for r in rows
            ]
            _write(out, "oracle.csv", "\n".join(lines) + "\n")
        if failures:
            _write(out, "failures.txt", "".join(f"p={p} n={n}: {type(e).__name__}: {e}\n" for p, n, e in failures))
        print(f"wrote {len(rows)} row(s) to {os.path.join(out, 'report.csv')}")
    for p, n, exc in failures:
        print(f"cell p={p} n={n} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
    if failures:
        return _failure_code(failures[0][2])
    if options.oracle and any(r["oracle"] > 1e-9 for r in rows):
        print("oracle difference above 1e-9", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_verify(args):
    cfg = read_config(args.config) if args.config else {}
    ver = cfg.get("verify", {})
    seed = args.seed if args.seed is not None else ver.get("seed", DEFAULT_SEED)
    fuzz = args.fuzz if args.fuzz is not None else ver.get("fuzz", 100)
    if fuzz < 0:
        raise ConfigError("fuzz must be non-negative")
    print(f"seed {seed}, {fuzz} fuzzed patches")
    if args.inject_fault:
        with inject_fault(args.inject_fault):
            results = run_suite(seed, fuzz)
    else:
        results = run_suite(seed, fuzz)
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed} passed, {failed} failed")
    return EXIT_VERIFY if failed else EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        return cmd_verify(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SingularSystemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except (NumericalFailure, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, NotImplementedError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
