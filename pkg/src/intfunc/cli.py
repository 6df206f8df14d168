"""Command line front end: ``intfunc run <file>`` and ``intfunc suite <dir>``.

Problem files are JSON objects ``{"version", "kind", "body", "tolerances",
"seed"}``; the body layout depends on ``kind``.  Every run writes
``report.json`` (byte-stable for a given file, seed and flags) and
``manifest.json`` (input hash, seed, grid sizes, tolerances, wall time,
verdicts) into ``<out>/<file stem>/``.

Exit codes: 0 when every report passes, 1 on a verification failure, 2 on a
schema, structural or oracle error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import jsonschema
import numpy as np

from . import calcvar, clarke, duality, sweeping
from .expr import compile_vector
from .grid import DiscreteMeasure, Report, ReportKind, StepFunction, StructuralError, TimeGrid, seeded_rng
from .integrand import EmptyDomainError, UnsupportedError, from_description
from .sets import set_from_description

OUT_ENV = "INTFUNC_OUT"
KINDS = ("interchange", "conjugate", "subdiff", "expected", "clarke", "bolza", "sweep")
PROBLEMS_DIR = Path(__file__).with_name("problems")

# --------------------------------------------------------------------------
# schema

_num = {"type": "number"}
_expr = {"type": ["string", "number"]}
_vec = {"oneOf": [_expr, {"type": "array", "items": _expr, "minItems": 1}]}
_obj = {"type": "object", "required": ["kind"]}
_pos_int = {"type": "integer", "minimum": 1}
_grid_props = {
    "integrand": _obj,
    "dim": _pos_int,
    "a": _num,
    "b": _num,
    "N": _pos_int,
    "density": _expr,
    "atoms": {
        "type": "array",
        "items": {
            "type": "object",
            "properties": {"t": _num, "mass": {"type": "number", "minimum": 0}},
            "required": ["t", "mass"],
            "additionalProperties": False,
        },
    },
}


def _body(required, **props):
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


BODY_SCHEMAS = {
    "interchange": _body(
        ["integrand"], **_grid_props, eps={"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}}
    ),
    "conjugate": _body(
        ["integrand"],
        **_grid_props,
        s={"type": "array", "items": _vec},
        random={
            "type": "object",
            "properties": {"count": _pos_int, "scale": {"type": "number", "exclusiveMinimum": 0}},
            "additionalProperties": False,
        },
        argmin_trials={"type": "integer", "minimum": 0},
    ),
    "subdiff": _body(
        ["integrand", "x", "s", "eps"],
        **_grid_props,
        x=_vec,
        s=_vec,
        eps={"type": "number", "minimum": 0},
        expect={"type": "boolean"},
    ),
    "expected": _body(
        ["integrand", "mode"],
        **_grid_props,
        mode={"enum": ["conjugate", "subgradient"]},
        s={"type": "array", "items": _num},
        u={"type": "array", "items": _num},
        v=_vec,
        eps={"type": "number", "minimum": 0},
        box={"type": "array", "items": {"type": "array", "items": _num}, "minItems": 2, "maxItems": 2},
        expect={"type": "boolean"},
    ),
    "clarke": _body(
        ["integrand", "check", "x"],
        **_grid_props,
        check={"enum": ["inclusion", "upper_bound"]},
        x=_vec,
        s=_vec,
        v=_vec,
        expect={"type": "boolean"},
    ),
    "bolza": _body(
        ["lagrangian", "constraint"],
        lagrangian=_obj,
        n=_pos_int,
        a=_num,
        b=_num,
        N=_pos_int,
        p=_num,
        endpoint_cost=_expr,
        constraint={
            "type": "object",
            "properties": {
                "kind": {"enum": ["pinned", "left-pinned", "affine", "ball", "free"]},
                "u": {"type": "array", "items": _num},
                "w": {"type": "array", "items": _num},
                "A": {"type": "array", "items": {"type": "array", "items": _num}},
                "c": {"type": "array", "items": _num},
                "center": {"type": "array", "items": _num},
                "radius": {"type": "number", "minimum": 0},
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
        K_factor={"type": "number", "exclusiveMinimum": 0},
    ),
    "sweep": _body(
        ["set", "x0"],
        set=_obj,
        x0={"type": "array", "items": _num, "minItems": 1},
        a=_num,
        b=_num,
        N=_pos_int,
        fault={"enum": sorted(sweeping.FAULTS)},
        selections=_pos_int,
        expect_solution={"type": "boolean"},
    ),
}

PROBLEM_SCHEMA = {
    "type": "object",
    "properties": {
        "version": {"type": "string"},
        "kind": {"enum": list(KINDS)},
        "body": {"type": "object"},
        "tolerances": {"type": "object", "additionalProperties": {"type": "number", "minimum": 0}},
        "seed": {"type": "integer", "minimum": 0},
    },
    "required": ["version", "kind", "body"],
    "additionalProperties": False,
}

DEFAULT_TOLERANCES = {
    "interchange": 1e-5,
    "conjugate": 1e-5,
    "argmin": 1e-6,
    "subdiff": 1e-9,
    "expected": 1e-6,
    "clarke": 5e-2,
    "euler_lagrange": 1e-2,
    "sweep_c": 2.0,
}


class ProblemError(ValueError):
    """A problem file is malformed; ``path`` points at the offending field."""

    def __init__(self, msg: str, path: str = ""):
        super().__init__(f"{path or '<root>'}: {msg}")
        self.path = path


def validate(problem: dict) -> None:
    def check(schema, obj, prefix):
        errs = sorted(jsonschema.Draft202012Validator(schema).iter_errors(obj), key=lambda e: list(e.absolute_path))
        if errs:
            e = errs[0]
            path = "/".join([prefix] + [str(p) for p in e.absolute_path]).strip("/")
            raise ProblemError(e.message, path)

    check(PROBLEM_SCHEMA, problem, "")
    check(BODY_SCHEMAS[problem["kind"]], problem["body"], "body")


def load_problem(path: str | Path) -> dict:
    try:
        problem = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ProblemError(f"invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    if not isinstance(problem, dict):
        raise ProblemError("problem file must hold a JSON object")
    validate(problem)
    return problem


# --------------------------------------------------------------------------
# builders


def _grid(body, n_override):
    N = n_override or body.get("N", 200)
    return TimeGrid.uniform(float(body.get("a", 0.0)), float(body.get("b", 1.0)), int(N))


def _measure(body, grid):
    dens = body.get("density", 1.0)
    vals = compile_vector(dens)(grid.midpoints)[:, 0] if isinstance(dens, str) else np.full(grid.n_cells, float(dens))
    atoms = []
    for a in body.get("atoms", []):
        k = int(np.argmin(np.abs(grid.nodes - a["t"])))
        if abs(grid.nodes[k] - a["t"]) > 1e-9:
            raise StructuralError(f"atom at t={a['t']:g} is not a grid node")
        atoms.append((k, a["mass"]))
    return DiscreteMeasure(grid, vals, tuple(atoms))


def _integrand(body, key="integrand"):
    try:
        f = from_description(body[key], body.get("dim"))
    except KeyError as exc:
        raise ProblemError(f"missing field {exc}", f"body/{key}") from exc
    except (TypeError, ValueError) as exc:
        raise ProblemError(str(exc), f"body/{key}") from exc
    return f


def _step(grid, src, dim, what):
    fn = compile_vector(src)
    if fn.dim != dim:
        raise StructuralError(f"{what} has dimension {fn.dim}, integrand expects {dim}")
    return StepFunction.from_function(grid, fn, dim)


def _functional(body, n_override):
    f = _integrand(body)
    g = _grid(body, n_override)
    return duality.IntegralFunctional(f, _measure(body, g)), g


# --------------------------------------------------------------------------
# per-kind runners: each returns (reports, extra csv tables, grid sizes)


def _run_interchange(body, tols, seed, opts):
    F, g = _functional(body, opts.n)
    sched = tuple(body.get("eps", [10.0**-j for j in range(1, 7)]))
    return [duality.verify_interchange(F, eps_schedule=sched, tol=tols["interchange"])], {}


def _run_conjugate(body, tols, seed, opts):
    F, g = _functional(body, opts.n)
    n = F.f.dim
    slopes = [_step(g, s, n, "dual step function") for s in body.get("s", [])]
    rnd = body.get("random")
    if rnd or not slopes:
        rnd = rnd or {}
        rng = seeded_rng(seed, 101)
        scale = float(rnd.get("scale", 1.0))
        for _ in range(int(rnd.get("count", 100))):
            slopes.append(StepFunction(g, rng.uniform(-scale, scale, size=(g.n_cells, n))))
    reports = [duality.conjugate_of_integral(F, s, tols["conjugate"])[2] for s in slopes]
    trials = int(body.get("argmin_trials", 0))
    if trials:
        reports.append(duality.argmin_equivalence(F, trials, seeded_rng(seed, 102), tols["argmin"]))
    return reports, {}


def _membership_report(kind, member, witness, eps, expect, tol):
    return Report(
        kind,
        witness.total,
        eps,
        witness.total - eps,
        tol,
        passed=member == expect,
        witnesses={"ell": witness.ell, "member": member, "expected_member": expect},
        notes="member" if member else "not a member",
    )


def _run_subdiff(body, tols, seed, opts):
    F, g = _functional(body, opts.n)
    x = _step(g, body["x"], F.f.dim, "x")
    s = _step(g, body["s"], F.f.dim, "s")
    eps = float(body["eps"])
    member, w = duality.eps_subdiff_membership(F, x, s, eps, tols["subdiff"])
    return [_membership_report(ReportKind.EPS_SUBDIFF, member, w, eps, body.get("expect", True), tols["subdiff"])], {}


def _run_expected(body, tols, seed, opts):
    F, g = _functional(body, opts.n)
    f, m = F.f, F.measure
    if body["mode"] == "conjugate":
        if "s" not in body:
            raise ProblemError("conjugate mode needs 's'", "body")
        box = body.get("box")
        return [duality.expected_conjugate(f, m, body["s"], box, tols["expected"], seeded_rng(seed, 103))], {}
    for key in ("u", "v", "eps"):
        if key not in body:
            raise ProblemError(f"subgradient mode needs {key!r}", "body")
    v = _step(g, body["v"], f.dim, "v")
    ok, w = duality.expected_subgradient_witness_check(
        f, m, body["u"], v, float(body["eps"]), rng=seeded_rng(seed, 104), tol=tols["subdiff"]
    )
    rep = _membership_report(
        ReportKind.EXPECTED_SUBGRADIENT, ok, w, float(body["eps"]), body.get("expect", True), tols["subdiff"]
    )
    return [rep], {}


def _clarke_cfg(tols, seed, opts):
    cfg = clarke.ClarkeEstimatorConfig(tol=tols["clarke"], seed=seed)
    if opts.clarke_radii:
        cfg = replace(cfg, radii=tuple(float(r) for r in opts.clarke_radii.split(",")))
    if opts.clarke_samples:
        cfg = replace(cfg, samples_per_radius=opts.clarke_samples)
    if opts.clarke_dirs:
        cfg = replace(cfg, directions=opts.clarke_dirs)
    return cfg


def _run_clarke(body, tols, seed, opts):
    F, g = _functional(body, opts.n)
    x = _step(g, body["x"], F.f.dim, "x")
    cfg = _clarke_cfg(tols, seed, opts)
    if body["check"] == "inclusion":
        if "s" not in body:
            raise ProblemError("inclusion check needs 's'", "body")
        rep = clarke.integral_clarke_inclusion(F, x, _step(g, body["s"], F.f.dim, "s"), cfg)
    else:
        if "v" not in body:
            raise ProblemError("upper_bound check needs 'v'", "body")
        rep = clarke.clarke_upper_bound_check(F, x, _step(g, body["v"], F.f.dim, "v"), cfg)
    expect = body.get("expect", True)
    if not expect:
        rep = replace(rep, passed=not rep.passed, notes=(rep.notes + "; expected to be flagged").lstrip("; "))
    return [rep], {}


def _run_bolza(body, tols, seed, opts):
    P = calcvar.problem_from_description(body)
    n = P.n
    N = opts.n or body.get("N", 200)
    init = calcvar._default_init(P, P.grid(int(N)))
    K0 = calcvar.estimate_K0(P, init, seed=seed)
    arc = calcvar.solve(P, init, float(body.get("K_factor", 2.0)) * K0)
    adj = calcvar.adjoint_reconstruct(P, arc)
    el = calcvar.euler_lagrange_residual(P, arc, adj, tols["euler_lagrange"], _clarke_cfg(tols, seed, opts))
    solver = arc.info["report"]
    solver = replace(
        solver,
        witnesses={
            **solver.witnesses,
            "K0": K0,
            "objective": calcvar.objective(P, arc),
            "x": arc.x,
            "p": adj.p_curve,
            "pdot": adj.pdot,
        },
    )
    g = arc.grid
    xs = arc.x.values
    xd = arc.y.node_values()
    ps = adj.p_curve.values
    pd = adj.pdot.node_values()
    header = ["t"] + [f"{c}{i}" for c in ("x", "xdot", "p", "pdot") for i in range(n)]
    rows = np.column_stack([g.nodes, xs, xd, ps, pd])
    return [solver, el], {"trajectory": (header, rows)}


def _run_sweep(body, tols, seed, opts):
    C = set_from_description(body["set"])
    x0 = body["x0"]
    if len(x0) != C.dim:
        raise StructuralError(f"x0 has dimension {len(x0)}, set has dimension {C.dim}")
    N = int(opts.n or body.get("N", 200))
    g = sweeping.grid_with_jumps(C, float(body.get("a", 0.0)), float(body.get("b", 1.0)), N)
    sol = sweeping.catching_up(C, x0, g)
    fault = opts.inject_fault or body.get("fault")
    if fault:
        sol = sweeping.inject_fault(sol, fault, seed)
    tol = sweeping.coupled_tolerance(C, g, tols["sweep_c"])
    rep = sweeping.equivalence_report(C, sol, tol, count=int(body.get("selections", 64)), seed=seed)
    d = rep.witnesses
    solution_ok = d["differential"]["pass"]
    expect_solution = body.get("expect_solution", True)
    # residual and tolerance of the summary are those of the checkers (equal at coupled tolerances)
    summary = Report(
        rep.kind,
        rep.lhs,
        rep.rhs,
        max(rep.lhs, rep.rhs),
        tol,
        passed=rep.passed and solution_ok == expect_solution,
        witnesses={**d, "fault": fault or "", "x_right": sol.x_right, "jump_nodes": list(sol.jump_nodes)},
        notes=rep.notes,
    )
    dens = np.vstack([sol.density, sol.density[-1:]])
    header = ["t"] + [f"x{i}" for i in range(C.dim)] + [f"density{i}" for i in range(C.dim)]
    rows = np.column_stack([g.nodes, sol.x_right, dens])
    return [summary], {"solution": (header, rows)}


RUNNERS = {
    "interchange": _run_interchange,
    "conjugate": _run_conjugate,
    "subdiff": _run_subdiff,
    "expected": _run_expected,
    "clarke": _run_clarke,
    "bolza": _run_bolza,
    "sweep": _run_sweep,
}

STRUCTURAL = (
    ProblemError,
    StructuralError,
    EmptyDomainError,
    UnsupportedError,
    sweeping.OracleError,
    duality.SelectionError,
    clarke.ClarkeEstimatorError,
    calcvar.ModulusEstimationError,
    SyntaxError,
    KeyError,
    TypeError,
    ValueError,
)


# --------------------------------------------------------------------------
# run / suite


def _parse_tols(items) -> dict:
    out = {}
    for item in items or []:
        name, _, val = item.partition("=")
        if not _ or name not in DEFAULT_TOLERANCES:
            raise ProblemError(f"bad --tol {item!r}; names: {', '.join(DEFAULT_TOLERANCES)}", "--tol")
        out[name] = float(val)
    return out


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) for v in r])
    path.write_text(buf.getvalue())


def execute(problem: dict, opts) -> tuple[list[Report], dict, dict]:
    """Run a validated problem; returns (reports, csv tables, resolved settings)."""
    seed = opts.seed if opts.seed is not None else int(problem.get("seed", 0))
    tols = {**DEFAULT_TOLERANCES, **problem.get("tolerances", {}), **_parse_tols(opts.tol)}
    unknown = set(problem.get("tolerances", {})) - set(DEFAULT_TOLERANCES)
    if unknown:
        raise ProblemError(f"unknown tolerance names {sorted(unknown)}", "tolerances")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        reports, tables = RUNNERS[problem["kind"]](problem["body"], tols, seed, opts)
    settings = {"seed": seed, "tolerances": tols, "N": opts.n or problem["body"].get("N", 200)}
    return reports, tables, settings


def run_file(path: str | Path, opts) -> dict:
    """Run one problem file and write its outputs; returns a summary row with the exit code."""
    path = Path(path)
    out_dir = Path(opts.out) / path.stem
    t0 = time.perf_counter()
    row = {"file": path.name, "kind": "", "residual": "", "tolerance": "", "verdict": "error", "runtime": 0.0}
    try:
        problem = load_problem(path)
        row["kind"] = problem["kind"]
        reports, tables, settings = execute(problem, opts)
    except STRUCTURAL as exc:
        row["runtime"] = time.perf_counter() - t0
        row["error"] = f"{type(exc).__name__}: {exc}"
        row["code"] = 2
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "error.json").write_text(json.dumps({"file": path.name, "error": row["error"]}, indent=1) + "\n")
        return row
    passed = all(r.passed for r in reports)
    payload = {
        "file": path.name,
        "kind": problem["kind"],
        "seed": settings["seed"],
        "pass": passed,
        "reports": [r.to_dict() for r in reports],
    }
    text = json.dumps(payload, sort_keys=True, indent=1, default=str) + "\n"
    wall = time.perf_counter() - t0
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(text)
    manifest = {
        "inputs_hash": hashlib.sha256(
            _canonical({"problem": problem, "n": opts.n, "fault": opts.inject_fault}).encode()
        ).hexdigest(),
        "report_hash": hashlib.sha256(text.encode()).hexdigest(),
        "seed": settings["seed"],
        "grid_sizes": [settings["N"]],
        "tolerances": settings["tolerances"],
        "wall_time": wall,
        "verdicts": [bool(r.passed) for r in reports],
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=1) + "\n")
    if opts.csv:
        for name, (header, rows) in tables.items():
            _write_csv(out_dir / f"{name}.csv", header, rows)
    worst = max(reports, key=lambda r: (not r.passed, _ratio(r)))
    row.update(
        residual=worst.residual,
        tolerance=worst.tolerance,
        verdict="pass" if passed else "fail",
        runtime=wall,
        code=0 if passed else 1,
    )
    return row


def _ratio(r: Report) -> float:
    if r.tolerance > 0:
        return abs(r.residual) / r.tolerance
    return 0.0 if r.residual == 0 else float("inf")


def _run_one(args):
    path, opts = args
    try:
        return run_file(path, opts)
    except Exception as exc:  # keep the suite going; report the crash as an error row
        return {"file": Path(path).name, "kind": "", "residual": "", "tolerance": "", "verdict": "error",
                "runtime": 0.0, "code": 2, "error": f"{type(exc).__name__}: {exc}"}


def run_suite(directory: str | Path, opts) -> list[dict]:
    files = sorted(Path(directory).glob("*.json"))
    jobs = [(f, opts) for f in files]
    if opts.jobs == 1 or len(files) <= 1:
        rows = [_run_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=opts.jobs or None) as ex:
            rows = list(ex.map(_run_one, jobs))
    out = Path(opts.out)
    out.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["file", "kind", "residual", "tolerance", "verdict", "runtime"])
    for r in rows:
        w.writerow([r["file"], r["kind"], r["residual"], r["tolerance"], r["verdict"], f"{r['runtime']:.3f}"])
    (out / "summary.csv").write_text(buf.getvalue())
    return rows


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=int, default=None, help="override the grid size N")
    common.add_argument("--tol", action="append", metavar="NAME=VAL", help="tolerance override (repeatable)")
    common.add_argument("--seed", type=int, default=None, help="override the problem seed")
    common.add_argument("--out", default=os.environ.get(OUT_ENV, "intfunc-out"), help=f"output directory (default ${OUT_ENV} or ./intfunc-out)")
    common.add_argument("--csv", action="store_true", help="also write trajectory CSVs")
    common.add_argument("--inject-fault", nargs="?", const="sign-flip", default=None, choices=sorted(sweeping.FAULTS),
                        help="corrupt sweep solutions before checking (default kind: sign-flip)")
    common.add_argument("--clarke-radii", default=None, help="comma-separated shrinking radii")
    common.add_argument("--clarke-samples", type=int, default=None, help="base points per radius")
    common.add_argument("--clarke-dirs", type=int, default=None, help="directions for membership tests")
    p = argparse.ArgumentParser(prog="intfunc", description="Verify integral-functional identities on desk-scale problems.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", parents=[common], help="run one problem file")
    r.add_argument("file")
    s = sub.add_parser("suite", parents=[common], help="run every *.json file in a directory")
    s.add_argument("dir", nargs="?", default=str(PROBLEMS_DIR), help="problem directory (default: bundled suite)")
    s.add_argument("--jobs", type=int, default=0, help="worker processes (0: one per CPU)")
    return p


def main(argv=None) -> int:
    opts = build_parser().parse_args(argv)
    if opts.command == "run":
        opts.jobs = 1
        row = run_file(opts.file, opts)
        if row["code"] == 2:
            print(f"error: {row['file']}: {row['error']}", file=sys.stderr)
        else:
            print(f"{row['file']}: {row['verdict']} (residual {row['residual']:.3g}, tolerance {row['tolerance']:.3g})")
        return row["code"]
    rows = run_suite(opts.dir, opts)
    for r in rows:
        extra = f"  {r['error']}" if r["verdict"] == "error" else ""
        print(f"{r['verdict']:5s} {r['kind']:12s} {r['file']}{extra}")
    print(f"{sum(r['verdict'] == 'pass' for r in rows)}/{len(rows)} passed; summary in {Path(opts.out) / 'summary.csv'}")
    return max((r["code"] for r in rows), default=0)


if __name__ == "__main__":
    sys.exit(main())
