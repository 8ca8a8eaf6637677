"""Command-line interface: ``gradmetric {build,verify,qms,counterexample,selftest}``.

Exit codes: 0 success, 1 verification failed, 2 existence condition violated,
3 unreadable input, 4 degenerate critical point, 5 generator not ergodic,
6 singular stationary state.
"""
import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .assembler import (AtlasSettings, GlobalMetric, build_global_metric,
                        counterexample_probe, samples_csv, verify_global)
from .errors import (ConditionThreeViolated, ConditionViolated, DegenerateForm,
                     InvalidHamiltonian, NonPositivePairing, NotCritical, NotErgodic, SingularState,
                     SpecParseError)
from .jets import locate_critical_points, parse_field_spec
from .noncritical import PAIRING_TOL
from .qms import build_simplex_metric, check_gradient_structure, parse_generator_spec

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONDITION = 2
EXIT_PARSE = 3
EXIT_DEGENERATE = 4
EXIT_NOT_ERGODIC = 5
EXIT_SINGULAR = 6

DEFAULTS = {"order": 6, "grid": 64, "tol_residual": 1e-8, "seed": 0, "samples": 200,
            "simplex_order": 3, "input": None, "output": None, "emit_csv": None}
GRID_POINT_BUDGET = 4096


def effective_grid(grid, dim):
    """Per-axis resolution, capped so that the grid has about 4096 points."""
    cap = max(2, int(round(GRID_POINT_BUDGET ** (1.0 / dim))))
    return min(grid, cap)


def _parser():
    p = argparse.ArgumentParser(prog="gradmetric",
                                description="Construct or refute metrics with Y = g X.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in [("build", "build a global metric from a field spec"),
                           ("verify", "re-verify a metric artifact"),
                           ("qms", "analyse a Lindblad generator"),
                           ("counterexample", "reproduce the two-dimensional counterexample"),
                           ("selftest", "run quick internal consistency checks")]:
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--input")
        s.add_argument("--output")
        s.add_argument("--config", help="JSON file with default values; flags win")
        s.add_argument("--order", type=int)
        s.add_argument("--grid", type=int)
        s.add_argument("--tol-residual", dest="tol_residual", type=float)
        s.add_argument("--seed", type=int)
        s.add_argument("--samples", type=int, help="states sampled by 'qms'")
        s.add_argument("--simplex-order", dest="simplex_order", type=int,
                       help="series order of the state-space metric in 'qms'")
        s.add_argument("--emit-csv", dest="emit_csv", help="write sampled metric entries")
    return p


def resolve_config(args):
    cfg = dict(DEFAULTS)
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise SpecParseError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise SpecParseError("config file must hold a JSON object")
        for key, value in loaded.items():
            key = key.replace("-", "_")
            if key not in cfg:
                raise SpecParseError(f"unknown config key {key!r}")
            cfg[key] = value
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    cfg["command"] = args.command
    return cfg


def _read_input(cfg):
    if not cfg["input"]:
        raise SpecParseError("--input is required")
    try:
        return Path(cfg["input"]).read_text()
    except OSError as exc:
        raise SpecParseError(f"cannot read {cfg['input']}: {exc}") from exc


def _emit(doc, cfg):
    text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if cfg.get("output"):
        Path(cfg["output"]).write_text(text)
    else:
        sys.stdout.write(text)


def _echo(cfg):
    return {k: cfg[k] for k in ("order", "grid", "tol_residual", "seed")}


def _failure(cfg, exc, code):
    doc = {"command": cfg["command"], "status": "error", "exit_code": code,
           "error": type(exc).__name__, "message": str(exc), "config": _echo(cfg)}
    if isinstance(exc, ConditionViolated):
        doc["certificate"] = exc.certificate()
    _emit(doc, cfg)
    return code


def check_pairing_on_grid(fp, grid):
    """Raise :class:`NonPositivePairing` at the first grid point with ``X.Y <= 0``
    away from the zeros of ``Y``."""
    pts = fp.domain.grid(grid)
    xs, ys = fp.eval_X(pts), fp.eval_Y(pts)
    yn = np.linalg.norm(ys, axis=-1)
    pairing = np.sum(xs * ys, axis=-1)
    bad = (yn > 0) & ~(pairing > PAIRING_TOL * np.linalg.norm(xs, axis=-1) * yn)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise NonPositivePairing(f"<X, Y> = {pairing[i]:.3e} at {pts[i].tolist()}",
                                 pts[i], pairing[i])


def check_critical_zeros(fp, points, tol=1e-10):
    for c in points:
        xn = float(np.linalg.norm(fp.eval_X(np.asarray(c.point))))
        if xn > tol:
            raise NotCritical(f"Y vanishes at {list(c.point)} but |X| = {xn:.3e}",
                              xn, c.residual)


def cmd_build(cfg):
    fp = parse_field_spec(_read_input(cfg))
    if fp.domain is None:
        raise SpecParseError("field spec needs a domain for 'build'")
    grid = effective_grid(int(cfg["grid"]), fp.dim)
    check_pairing_on_grid(fp, grid)
    crit = locate_critical_points(fp)
    if any(c.degenerate for c in crit):
        bad = [list(c.point) for c in crit if c.degenerate]
        raise DegenerateForm(f"degenerate critical points {bad}")
    check_critical_zeros(fp, crit)
    settings = AtlasSettings(order=int(cfg["order"]), tol_residual=float(cfg["tol_residual"]),
                             seed=int(cfg["seed"]))
    gm, info = build_global_metric(fp, settings, grid)
    report = verify_global(gm, fp, grid)
    passed = (report["condition_i_violations"] == 0
              and report["max_residual"] <= cfg["tol_residual"] * report["scale"]
              and report["min_eigenvalue"] > 0)
    report["passed"] = bool(passed)
    if cfg.get("emit_csv"):
        Path(cfg["emit_csv"]).write_text(samples_csv(gm, fp.domain.grid(grid)))
    _emit({"command": "build", "status": "ok" if passed else "failed",
           "critical_points": info, "metric": gm.to_dict(), "report": report,
           "config": _echo(cfg), "grid_per_axis": grid}, cfg)
    return EXIT_OK if passed else EXIT_FAILED


def cmd_verify(cfg):
    try:
        doc = json.loads(_read_input(cfg))
        gm = GlobalMetric.from_dict(doc["metric"] if "metric" in doc else doc)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise SpecParseError(f"not a metric artifact: {exc}") from exc
    grid = effective_grid(int(cfg["grid"]), gm.dim)
    report = verify_global(gm, gm.fp, grid)
    passed = (report["condition_i_violations"] == 0
              and report["max_residual"] <= cfg["tol_residual"] * report["scale"]
              and report["min_eigenvalue"] > 0)
    report["passed"] = bool(passed)
    if cfg.get("emit_csv"):
        Path(cfg["emit_csv"]).write_text(samples_csv(gm, gm.domain.grid(grid)))
    _emit({"command": "verify", "status": "ok" if passed else "failed", "report": report,
           "config": _echo(cfg), "grid_per_axis": grid}, cfg)
    return EXIT_OK if passed else EXIT_FAILED


def cmd_qms(cfg):
    try:
        gen = parse_generator_spec(_read_input(cfg))
    except (InvalidHamiltonian, ValueError) as exc:
        raise SpecParseError(str(exc)) from exc
    report = check_gradient_structure(gen, samples=int(cfg["samples"]), seed=int(cfg["seed"]))
    doc = {"command": "qms", "status": "ok", "generator": gen.to_dict(),
           "report": report.to_dict(),
           "statement": {"detailed_balance_implies_gradient_flow":
                         (not report.bkm_detailed_balance) or report.verdict,
                         "gradient_flow_implies_detailed_balance":
                         (not report.verdict) or report.bkm_detailed_balance},
           "config": _echo(cfg)}
    try:
        res = build_simplex_metric(gen, int(cfg["simplex_order"]))
        doc["simplex_metric"] = res.to_dict()
    except ConditionThreeViolated as exc:
        doc["simplex_metric"] = {"certificate": exc.certificate()}
    _emit(doc, cfg)
    return EXIT_OK


def cmd_counterexample(cfg):
    probe = counterexample_probe(grid=int(cfg["grid"]))
    _emit({"command": "counterexample", "status": "ok", "probe": probe,
           "config": _echo(cfg)}, cfg)
    return EXIT_OK


def cmd_selftest(cfg):
    from .tensor_core import MultiTensor, symmetrize
    from .tensor_solver import equation_residual, scale_of, solve_orderN

    rng = np.random.default_rng(int(cfg["seed"]))
    checks = {}
    worst = 0.0
    for n, N in [(2, 2), (3, 4), (4, 5)]:
        U = rng.normal(size=(n, n)) + n * np.eye(n)
        R = symmetrize(MultiTensor.from_array(rng.normal(size=(n,) * (N + 1)), 1, N),
                       range(1, N + 1))
        T = solve_orderN(U, R)
        worst = max(worst, equation_residual(U, T, R, N) / scale_of(U, R, T))
    checks["tensor_equation"] = {"relative_residual": worst, "passed": worst <= 1e-10}
    probe = counterexample_probe(grid=int(cfg["grid"]))
    lim = probe["limits"]
    ok = (abs(lim["x2=0"]) <= 1e-4 and abs(lim["x2=x1"] + 0.5) <= 1e-4
          and abs(probe["g11_at_point"]["value"] - 1.25) <= 1e-10)
    checks["counterexample"] = {"limits": lim, "passed": ok}
    passed = all(c["passed"] for c in checks.values())
    _emit({"command": "selftest", "status": "ok" if passed else "failed", "checks": checks,
           "config": _echo(cfg)}, cfg)
    return EXIT_OK if passed else EXIT_FAILED


COMMANDS = {"build": cmd_build, "verify": cmd_verify, "qms": cmd_qms,
            "counterexample": cmd_counterexample, "selftest": cmd_selftest}


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except SpecParseError as exc:
        cfg = dict(DEFAULTS, command=args.command)
        return _failure(cfg, exc, EXIT_PARSE)
    try:
        return COMMANDS[cfg["command"]](cfg)
    except SpecParseError as exc:
        return _failure(cfg, exc, EXIT_PARSE)
    except ConditionViolated as exc:
        return _failure(cfg, exc, EXIT_CONDITION)
    except DegenerateForm as exc:
        return _failure(cfg, exc, EXIT_DEGENERATE)
    except NotErgodic as exc:
        return _failure(cfg, exc, EXIT_NOT_ERGODIC)
    except SingularState as exc:
        return _failure(cfg, exc, EXIT_SINGULAR)


if __name__ == "__main__":
    sys.exit(main())
