"""Batch driver: ``python -m lel <subcommand> --config run.json --out DIR``.

Every subcommand reads the same JSON run configuration.  Outputs are JSON
reports and CSV tables written with round-trip float formatting and sorted
keys, so that identical configurations give byte-identical files.

Exit codes: 0 success (and all enabled checks pass), 1 a check failed,
2 bad configuration or usage, 3 solver failure (partial results kept).
"""

import argparse
import glob
import json
import logging
import math
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import asymptotics as asy
from .domains import DomainSpec
from .errors import ConfigError, LELError
from .liouville import SQRT_E

log = logging.getLogger("lel")

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3
LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
BUNDLED = ("radial_theta0.json", "radial_theta1.json", "fem_disk_p10.json", "fem_square.json",
           "greens_disk.json", "concentration_dumbbell.json")

# limiting constants compared against extrapolated radial families
LIMITS = {
    "peak_limit": ("u_max", SQRT_E, 0.01),
    "energy_limit": ("energy_v", asy.EIGHT_PI_E, 0.02),
    "L_p_limit": ("L_p", 8.0 * math.pi * math.exp(-0.5), 0.03),
}


# ---------------------------------------------------------------- config
@dataclass
class RunConfig:
    domain: DomainSpec
    theta: float = 0.0
    p_grid: list = field(default_factory=lambda: [10.0])
    solver: str = "radial"
    h_target: float = 0.05
    grading_ratio: float = 0.1
    newton_tol: float = 1e-10
    rtol: float = 1e-13
    green_tol: float = 1e-8
    green_h: float = 0.02
    beta: float = 100.0
    seeds: list = field(default_factory=list)
    probes: list = field(default_factory=list)
    output: str = "out"
    fit_p_min: float = 50.0
    grid_step: float = 0.1
    pohozaev_radius: float = 0.3


_FIELDS = {"domain", "theta", "p_grid", "solver", "h_target", "grading_ratio", "newton_tol",
           "rtol", "green_tol", "green_h", "beta", "seeds", "probes", "output", "fit_p_min",
           "grid_step", "pohozaev_radius"}


def _positive(d, name):
    x = d[name]
    if not isinstance(x, (int, float)) or isinstance(x, bool) or not x > 0:
        raise ConfigError(f"field '{name}': must be a positive number, got {x!r}", name)
    return float(x)


def _points(d, name):
    pts = d[name]
    try:
        arr = np.asarray(pts, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"field '{name}': must be a list of [x, y] points", name) from None
    if arr.size == 0:
        return []
    if arr.ndim != 2 or arr.shape[1] != 2 or not np.all(np.isfinite(arr)):
        raise ConfigError(f"field '{name}': must be a list of [x, y] points", name)
    return arr.tolist()


def parse_config(data):
    """Validate a decoded JSON object and build a :class:`RunConfig`."""
    if not isinstance(data, dict):
        raise ConfigError("top level must be a JSON object")
    unknown = sorted(set(data) - _FIELDS)
    if unknown:
        raise ConfigError(f"field '{unknown[0]}': unknown key", unknown[0])
    if "domain" not in data:
        raise ConfigError("field 'domain': required", "domain")
    try:
        dom = data["domain"]
        if isinstance(dom, str):
            dom = {"kind": dom}
        domain = DomainSpec.from_dict(dom)
    except (LELError, TypeError, KeyError, ValueError) as exc:
        raise ConfigError(f"field 'domain': {exc}", "domain") from None
    d = {k: getattr(RunConfig, k) for k in _FIELDS if hasattr(RunConfig, k)}
    d.update(data)
    cfg = RunConfig(domain=domain)
    for name in ("h_target", "grading_ratio", "newton_tol", "rtol", "green_tol", "green_h",
                 "beta", "fit_p_min", "grid_step", "pohozaev_radius"):
        if name in data:
            setattr(cfg, name, _positive(d, name))
    if "theta" in data:
        th = data["theta"]
        if not isinstance(th, (int, float)) or isinstance(th, bool) or not th >= 0:
            raise ConfigError(f"field 'theta': must be a nonnegative number, got {th!r}", "theta")
        cfg.theta = float(th)
    if "p_grid" in data:
        pg = data["p_grid"]
        if (not isinstance(pg, list) or not pg
                or not all(isinstance(p, (int, float)) and not isinstance(p, bool) for p in pg)):
            raise ConfigError("field 'p_grid': must be a non-empty list of numbers", "p_grid")
        if any(not p > 1 for p in pg):
            raise ConfigError("field 'p_grid': all entries must exceed 1", "p_grid")
        if any(b <= a for a, b in zip(pg, pg[1:])):
            raise ConfigError("field 'p_grid': must be strictly increasing", "p_grid")
        cfg.p_grid = [float(p) for p in pg]
    if "solver" in data:
        if data["solver"] not in ("radial", "fem"):
            raise ConfigError(f"field 'solver': must be 'radial' or 'fem', got {data['solver']!r}",
                              "solver")
        cfg.solver = data["solver"]
    if cfg.solver == "radial" and not domain.is_disk:
        raise ConfigError("field 'solver': the radial solver requires domain unit-disk", "solver")
    for name in ("seeds", "probes"):
        if name in data:
            setattr(cfg, name, _points(d, name))
    if "output" in data:
        if not isinstance(data["output"], str) or not data["output"]:
            raise ConfigError("field 'output': must be a non-empty string", "output")
        cfg.output = data["output"]
    return cfg


def load_config(path):
    """Read and validate a config file (a bundled name such as ``radial_theta0.json`` also works)."""
    if not os.path.exists(path) and os.path.basename(path) in BUNDLED:
        text = resources.files("lel.configs").joinpath(os.path.basename(path)).read_text()
    else:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    try:
        return parse_config(data)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}", exc.field) from None


# ---------------------------------------------------------------- output helpers
def _ptag(p):
    return f"p{p:g}"


def _dump(obj, path):
    """Write JSON atomically so an interrupted run never leaves a torn file."""
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(json.dumps(asy._jsonable(obj), indent=2, sort_keys=True))
        fh.write("\n")
    os.replace(tmp, path)


def write_trajectory_csv(sol, path):
    with open(path, "w") as fh:
        fh.write("s,r,u,v,u_s,v_s\n")
        for row in zip(sol.s, np.exp(sol.s), sol.u, sol.v, sol.u_s, sol.v_s):
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def read_trajectory(csv_path, record):
    """Rebuild a :class:`RadialSolution` (grid interpolation, no dense output)."""
    from .radial import RadialSolution
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    return RadialSolution(p=record["p"], theta=record["theta"], a=record["a"], b=record["b"],
                          s=data[:, 0], u=data[:, 2], v=data[:, 3], u_s=data[:, 4],
                          v_s=data[:, 5], bc_residual=tuple(record["bc_residual"]),
                          s_min=float(data[0, 0]))


def _oracle(cfg):
    from .greens import GreenOracle
    return GreenOracle(cfg.domain, h=cfg.green_h)


def _analyze_all(sols, cfg, oracle, jobs):
    def one(sol):
        return asy.analyze(sol, oracle=oracle, probes=cfg.probes, beta=cfg.beta,
                           d=cfg.pohozaev_radius)
    if jobs > 1 and len(sols) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(one, sols))
    return [one(s) for s in sols]


def _collapse(sol):
    return float(np.max(np.abs(np.asarray(sol.u) - np.asarray(sol.v))))


# ---------------------------------------------------------------- solves
def _radial_family(cfg):
    from .radial import continuation_radial
    grid = list(cfg.p_grid)
    warm = grid[0] > 10
    if warm:
        # continuation has to start at p <= 10; the warm-up solve is not reported
        grid = [10.0] + grid
    sols, failure = continuation_radial(grid, cfg.theta, tol=cfg.newton_tol, rtol=cfg.rtol)
    if warm:
        sols = sols[1:]
    return sols, failure


def _fem_family(cfg):
    from .fem.continuation import continuation_2d
    seeds = cfg.seeds or _default_seeds(cfg.domain)
    sols, failure = continuation_2d(cfg.domain, cfg.p_grid, cfg.theta, seeds,
                                    h_target=cfg.h_target, grading_ratio=cfg.grading_ratio,
                                    tol=cfg.newton_tol)
    if failure is not None:
        failure = {"p": failure.p_failed, "p_last_converged": failure.p_last_converged,
                   "error": failure.message}
    return sols, failure


def _default_seeds(domain):
    if domain.kind == "dumbbell":
        return domain.lobe_centers().tolist()
    poly = domain.polygon()
    return [poly.mean(axis=0).tolist()] if not domain.is_disk else [[0.0, 0.0]]


def _write_solution(sol, out):
    from .fem.solver import save_solution_csv
    tag = _ptag(sol.p)
    sol.mesh.save(os.path.join(out, f"mesh_{tag}.txt"))
    save_solution_csv(sol, os.path.join(out, f"solution_{tag}.csv"))


def _failure_exit(failure, out):
    _dump(failure, os.path.join(out, "failure.json"))
    log.error("solver failure at p=%s: %s", failure.get("p"), failure.get("error"))
    return EXIT_SOLVER


# ---------------------------------------------------------------- checks
def _check(name, measured, target, tol, passed, note=""):
    return {"name": name, "measured": measured, "target": target, "tolerance": tol,
            "passed": bool(passed), "note": note}


def _rel_check(name, measured, target, tol, note=""):
    ok = measured is not None and math.isfinite(measured) and abs(measured - target) <= tol * abs(target)
    return _check(name, measured, target, tol, ok, note)


def family_checks(cfg, reports, sols, radial_records=None):
    """Acceptance checks that make sense for the configured family."""
    checks = []
    p = [r.p for r in reports]
    fit = [i for i, pp in enumerate(p) if pp >= cfg.fit_p_min]
    if cfg.solver == "radial":
        if len(fit) >= 3:
            pf = [p[i] for i in fit]
            rows = [reports[i].summary_row() for i in fit]
            for name, (col, target, tol) in LIMITS.items():
                a0, _, _ = asy.extrapolate_limit(pf, [r[col] for r in rows])
                checks.append(_rel_check(name, a0, target, tol, f"1/p fit of {col} over p={pf}"))
            if cfg.probes:
                x = cfg.probes[0]
                rad = float(np.hypot(*x))
                target = -4.0 * SQRT_E * math.log(rad)
                pu = [radial_records[i]["probes"][0]["pu"] for i in fit]
                a0, _, _ = asy.extrapolate_limit(pf, pu)
                checks.append(_rel_check("outer_field_limit", a0, target, 0.02,
                                         f"p u at r={rad!r}"))
            if cfg.theta > 0:
                a0, _, _ = asy.extrapolate_limit(pf, [r["scaled_gap"] for r in rows])
                checks.append(_rel_check("gap_limit", a0, cfg.theta * SQRT_E / 2, 0.05,
                                         "p (v(0) - u(0))"))
        ident = max(abs(r.energies["energy_u"] - r.energies["energy_v"]) / r.energies["energy_v"]
                    for r in reports)
        checks.append(_check("energy_identity", ident, 0.0, 1e-6, ident <= 1e-6,
                             "max relative gap between p∫u^(q+1) and p∫v^(p+1)"))
    else:
        seeds = cfg.seeds or _default_seeds(cfg.domain)
        ks = [r.k for r in reports]
        checks.append(_check("peak_count", max(ks, default=0), len(seeds), 0,
                             all(k == len(seeds) for k in ks), "peaks found at every p"))
        rel = [r.pohozaev.get("relative_23") for r in reports if r.pohozaev]
        if rel:
            worst = max(abs(x) for x in rel)
            checks.append(_check("pohozaev_23", worst, 0.0, 0.05, worst <= 0.05,
                                 "relative to the dominant boundary term"))
        if cfg.domain.is_disk and len(seeds) == 1 and np.allclose(seeds[0], 0.0):
            from .radial import continuation_radial
            rgrid = p if p[0] <= 10 else [10.0] + p
            rsols, fail = continuation_radial(rgrid, cfg.theta, tol=cfg.newton_tol)
            if fail is None:
                ra = {float(s.p): s.a for s in rsols}
                err = max(abs(r.peaks[0]["u_max"] - ra[r.p]) / ra[r.p] for r in reports)
                checks.append(_check("radial_crossval", err, 0.0, 0.01, err <= 0.01,
                                     "relative u(0) difference against the radial solver"))
    if cfg.theta == 0:
        worst = max(_collapse(s) for s in sols)
        checks.append(_check("theta0_collapse", worst, 0.0, cfg.newton_tol,
                             worst <= cfg.newton_tol, "max |u - v|"))
    ok = all(r.beta_budget.get("ok", True) for r in reports)
    checks.append(_check("beta_budget", max(r.k for r in reports), asy.beta_bound(cfg.beta), 0,
                         ok, f"k <= ceil(beta / 8πe) with beta={cfg.beta!r}"))
    return checks


def write_verdict(checks, path):
    verdict = {"checks": checks, "all_passed": all(c["passed"] for c in checks)}
    _dump(verdict, path)
    for c in checks:
        log.info("%s %s measured=%r target=%r", "PASS" if c["passed"] else "FAIL", c["name"],
                 c["measured"], c["target"])
    return verdict["all_passed"]


# ---------------------------------------------------------------- subcommands
def cmd_radial_sweep(cfg, out, args):
    from .radial import radial_diagnostics
    if cfg.solver != "radial":
        raise ConfigError("field 'solver': radial-sweep needs solver 'radial'", "solver")
    sols, failure = _radial_family(cfg)
    radii = [float(np.hypot(*x)) for x in cfg.probes]
    for sol in sols:
        write_trajectory_csv(sol, os.path.join(out, f"trajectory_{_ptag(sol.p)}.csv"))
        _dump(radial_diagnostics(sol, radii), os.path.join(out, f"radial_{_ptag(sol.p)}.json"))
    if failure is not None:
        return _failure_exit(failure, out)
    return EXIT_OK


def _fem_run(cfg, out, args, grid):
    if cfg.solver != "fem":
        raise ConfigError("field 'solver': this subcommand needs solver 'fem'", "solver")
    cfg = RunConfig(**{**cfg.__dict__, "p_grid": grid})
    sols, failure = _fem_family(cfg)
    oracle = _oracle(cfg)
    reports = []
    for sol in sols:
        _write_solution(sol, out)
        rep = asy.analyze(sol, oracle=oracle, probes=cfg.probes, beta=cfg.beta,
                          d=cfg.pohozaev_radius)
        _dump(rep.to_dict(), os.path.join(out, f"report_{_ptag(sol.p)}.json"))
        reports.append(rep)
    if reports:
        asy.write_family_csv(reports, os.path.join(out, "summary.csv"))
    if failure is not None:
        return _failure_exit(failure, out)
    return EXIT_OK


def cmd_fem_solve(cfg, out, args):
    return _fem_run(cfg, out, args, cfg.p_grid[:1])


def cmd_fem_continue(cfg, out, args):
    return _fem_run(cfg, out, args, cfg.p_grid)


def greens_grid(domain, step):
    """Grid points ``step·(i, j)`` strictly inside the domain."""
    poly = domain.polygon()
    lo = np.floor(poly.min(axis=0) / step).astype(int)
    hi = np.ceil(poly.max(axis=0) / step).astype(int)
    xs = np.arange(lo[0], hi[0] + 1) * step
    ys = np.arange(lo[1], hi[1] + 1) * step
    X, Y = np.meshgrid(np.round(xs, 12), np.round(ys, 12))
    pts = np.column_stack([X.ravel(), Y.ravel()])
    keep = domain.contains(pts) & (domain.boundary_distance(pts) > 1e-9)
    return pts[keep]


def cmd_greens(cfg, out, args):
    oracle = _oracle(cfg)
    pts = greens_grid(cfg.domain, cfg.grid_step)
    path = os.path.join(out, "robin.csv")
    with open(path, "w") as fh:
        fh.write("x,y,R\n")
        for x in pts:
            fh.write(f"{float(x[0])!r},{float(x[1])!r},{float(oracle.R(x))!r}\n")
    if cfg.seeds:
        with open(os.path.join(out, "green.csv"), "w") as fh:
            fh.write("seed,x,y,G\n")
            for k, y in enumerate(cfg.seeds):
                for x in pts:
                    if np.linalg.norm(x - np.asarray(y)) > 0:
                        fh.write(f"{k},{float(x[0])!r},{float(x[1])!r},{float(oracle.G(x, y))!r}\n")
    return EXIT_OK


def cmd_concentration(cfg, out, args):
    from .greens import save_points_json, solve_concentration_points
    seeds = cfg.seeds or _default_seeds(cfg.domain)
    res = solve_concentration_points(_oracle(cfg), len(seeds), seeds, tol=cfg.green_tol)
    with open(os.path.join(out, "concentration.json"), "w") as fh:
        fh.write(res.to_json() + "\n")
    save_points_json(res.points, os.path.join(out, "points.json"))
    if not res.converged:
        log.error("stationarity solve failed: %s", res.message)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_verify(cfg, out, args):
    from .radial import radial_diagnostics
    sols, failure = _radial_family(cfg) if cfg.solver == "radial" else _fem_family(cfg)
    oracle = _oracle(cfg)
    reports = _analyze_all(sols, cfg, oracle, args.jobs)
    records = []
    radii = [float(np.hypot(*x)) for x in cfg.probes]
    for sol, rep in zip(sols, reports):
        tag = _ptag(sol.p)
        if cfg.solver == "radial":
            write_trajectory_csv(sol, os.path.join(out, f"trajectory_{tag}.csv"))
            rec = radial_diagnostics(sol, radii)
            records.append(rec)
            _dump(rec, os.path.join(out, f"radial_{tag}.json"))
        else:
            _write_solution(sol, out)
        _dump(rep.to_dict(), os.path.join(out, f"report_{tag}.json"))
    if reports:
        asy.write_family_csv(reports, os.path.join(out, "summary.csv"))
    if failure is not None:
        return _failure_exit(failure, out)
    if not args.check:
        return EXIT_OK
    ok = write_verdict(family_checks(cfg, reports, sols, records), os.path.join(out, "verdict.json"))
    return EXIT_OK if ok else EXIT_CHECK


def _stored_p(out, prefix, ext):
    pat = re.compile(rf"^{prefix}_p(.+)\.{ext}$")
    found = []
    for path in glob.glob(os.path.join(out, f"{prefix}_p*.{ext}")):
        m = pat.match(os.path.basename(path))
        if m:
            found.append(float(m.group(1)))
    return sorted(found)


def cmd_report(cfg, out, args):
    """Re-run the asymptotics on stored solutions and rewrite reports, summary and verdict."""
    from .fem.mesh import Mesh
    from .fem.solver import load_solution_csv
    sols, records = [], []
    if cfg.solver == "radial":
        for p in _stored_p(out, "radial", "json"):
            with open(os.path.join(out, f"radial_{_ptag(p)}.json")) as fh:
                rec = json.load(fh)
            sols.append(read_trajectory(os.path.join(out, f"trajectory_{_ptag(p)}.csv"), rec))
            records.append(rec)
    else:
        for p in _stored_p(out, "solution", "csv"):
            mesh = Mesh.load(os.path.join(out, f"mesh_{_ptag(p)}.txt"))
            sols.append(load_solution_csv(os.path.join(out, f"solution_{_ptag(p)}.csv"), mesh,
                                          p, cfg.theta))
    if not sols:
        raise ConfigError(f"no stored solutions found in {out}", "output")
    reports = _analyze_all(sols, cfg, _oracle(cfg), args.jobs)
    for rep in reports:
        _dump(rep.to_dict(), os.path.join(out, f"report_{_ptag(rep.p)}.json"))
    asy.write_family_csv(reports, os.path.join(out, "summary.csv"))
    if not args.check:
        return EXIT_OK
    ok = write_verdict(family_checks(cfg, reports, sols, records), os.path.join(out, "verdict.json"))
    return EXIT_OK if ok else EXIT_CHECK


COMMANDS = {
    "radial-sweep": (cmd_radial_sweep, "radial continuation and per-p diagnostics"),
    "fem-solve": (cmd_fem_solve, "one 2-D solve at the first p of p_grid"),
    "fem-continue": (cmd_fem_continue, "2-D continuation over p_grid"),
    "greens": (cmd_greens, "Robin (and Green) tables on a point grid"),
    "concentration": (cmd_concentration, "stationary points of the Kirchhoff-Routh function"),
    "verify": (cmd_verify, "solve, analyse and evaluate the acceptance checks"),
    "report": (cmd_report, "re-render reports from stored solutions"),
}


def build_parser():
    ap = argparse.ArgumentParser(prog="lel", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", metavar="subcommand")
    for name, (_, helptext) in COMMANDS.items():
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--out", default=None, help="output directory (overrides 'output')")
        sp.add_argument("--jobs", type=int, default=1, help="worker threads for per-p analysis")
        sp.add_argument("--check", action=argparse.BooleanOptionalAction, default=True,
                        help="evaluate acceptance checks (verify, report)")
    return ap


def _setup_logging():
    level = os.environ.get("LEL_LOG", "error").lower()
    logging.basicConfig(level=LOG_LEVELS.get(level, logging.ERROR),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if level not in LOG_LEVELS:
        log.warning("LEL_LOG=%r not one of %s; using 'error'", level, sorted(LOG_LEVELS))


def main(argv=None):
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
        out = args.out or cfg.output
        os.makedirs(out, exist_ok=True)
        return COMMANDS[args.command][0](cfg, out, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LELError as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
