"""Command-line front end.

Exit codes: 0 success, 1 check failure or domain error, 2 usage / schema /
parse error, 3 model outside the scope of the quantum engine.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from fractions import Fraction

import numpy as np

from . import __version__
from .angular import (check_angular_algebra, p_dot_J_residual, s_system_determinant,
                      s_system_singular)
from .closure import closure_check, decompose_L
from .dynamics import DomainExitError, conservation_report, csv_text, integrate
from .expr import EvalError, ParseError, Sym, parse, to_str
from .modelfile import BUNDLED, ModelFileError, load_model
from .opalg import QuantumModel, jacobi_report
from .poly import NonPolynomialError
from .solver import (NotIntegrableError, Poly2D, SolverError, check_integrability,
                     solve_a_from_f, solve_f_line_integral, solve_f_polynomial,
                     solve_f_polynomial_2d, solve_f_radial)
from .structure import DEFAULT_SEED, nondegeneracy_report

REPORT_VERSION = 1

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_SCOPE = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _seed(args) -> int:
    env = os.environ.get("GUP_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"GUP_SEED must be an integer, got {env!r}") from None
    return args.seed


def _floats(text: str, what: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{what} must be a comma-separated list of numbers") from None


def _params(items) -> dict:
    out = {}
    for item in items or []:
        name, _, value = item.partition("=")
        if not value:
            raise UsageError(f"--param expects name=value, got {item!r}")
        try:
            out[name.strip()] = Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise UsageError(f"--param {name}: not a number") from None
    return out


def _emit(doc: dict, out: str | None = None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _header(lm) -> dict:
    return {"tool": "gupphase", "version": __version__, "report_version": REPORT_VERSION,
            "model": {"name": lm.model.name, "sha256": lm.sha256, "dimension": lm.model.d}}


# ---------------------------------------------------------------------------
# commands


def cmd_check(args) -> int:
    lm = load_model(args.model)
    m = lm.model
    seed = _seed(args)
    region = m.domain
    checks = []
    nd = nondegeneracy_report(m, region, args.points, seed)
    checks.append(nd.to_dict())
    if nd.passed:
        cl = closure_check(m, region, args.points, seed, args.tol)
        checks.append(cl.to_dict())
        if lm.scheme is not None:
            ang = check_angular_algebra(lm.scheme, region.sample(args.points, seed), args.tol)
            ang.residuals["p_dot_J"] = p_dot_J_residual(lm.scheme, region.sample(args.points, seed))
            ang.tolerances["p_dot_J"] = 1e-12
            ang.passed = ang.passed and ang.residuals["p_dot_J"] <= 1e-12
            checks.append(ang.to_dict())
    else:
        checks.append({"name": "closure", "pass": False, "notes": ["skipped: f is not positive"]})
    verdict = all(c["pass"] for c in checks)
    doc = {**_header(lm), "environment": {"seed": seed, "n": args.points, "tol": args.tol,
                                          "region": region.to_dict()},
           "checks": checks, "pass": verdict}
    _emit(doc, args.out)
    return EXIT_OK if verdict else EXIT_FAIL


def _target(args, d: int) -> list[float]:
    if args.target is None:
        return [0.0] * d
    t = _floats(args.target, "--target")
    if len(t) != d:
        raise UsageError(f"--target needs {d} components")
    return t


def cmd_solve_f(args) -> int:
    params = _params(args.param)
    c = args.c
    out: dict = {"c": c}
    if args.a is not None:
        a = parse(args.a, tuple(params) + ("rho",))
        sol = solve_f_radial(a, c, params)
        if sol.expr is not None:
            out["closed_form"] = to_str(sol.expr)
        if args.target_rho is not None:
            out["rho"] = args.target_rho
            out["f"] = sol(args.target_rho)
        _emit(out)
        return EXIT_OK
    if args.g is not None:
        g = [parse(t, None) for t in args.g.split(",")]
    elif args.l is not None:
        l = parse(args.l, None)
        from .expr import Var, diff, simplify
        g = [simplify(diff(l, Var("q", 2))), simplify(-diff(l, Var("q", 1)))]
    elif args.model is not None:
        lm = load_model(args.model)
        m = lm.model
        params = {**m.params, **params}
        dec = decompose_L(m)
        if not dec.exact:
            raise NotIntegrableError("L is not affine in q, so no f can close the form")
        g = dec.g
    else:
        raise UsageError("give a model, --g, --l or --a")
    d = len(g)
    free = set().union(*(_free(e) for e in g)) - set(params)
    target = _target(args, d)
    pts = np.random.default_rng(DEFAULT_SEED).uniform(-0.5, 0.5, size=(32, d))
    pts = np.vstack([pts, [target]])
    if not free:
        ok, r = check_integrability(g, pts, params)
        if not ok:
            raise NotIntegrableError(f"g is not a gradient field (curl residual {r:.3g})")
        out["target"] = target
        out["f"] = solve_f_line_integral(g, target, c, params=params)
    if args.closed_form or free:
        try:
            if d == 2 and args.l is None and args.model is not None and not free:
                expr = solve_f_polynomial_2d(Poly2D.from_expr(lm.model.L_entry(1, 2), params), c)
            else:
                expr = solve_f_polynomial(g, c, params)
            out["closed_form"] = to_str(expr)
        except NonPolynomialError:
            out["closed_form"] = None
    _emit(out)
    return EXIT_OK


def _free(e) -> set:
    from .expr import free_symbols
    return free_symbols(e)


def cmd_solve_a(args) -> int:
    params = _params(args.param)
    f = parse(args.f, None)
    a = solve_a_from_f(f, params)
    out = {"a": to_str(a)}
    if args.at_rho:
        from .solver import a_value
        out["values"] = [[r, a_value(f, r, params)] for r in _floats(args.at_rho, "--at-rho")]
    _emit(out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    if not args.dt > 0:
        raise UsageError("--dt must be positive")
    if not args.t_end > 0:
        raise UsageError("--t-end must be positive")
    lm = load_model(args.model)
    m = lm.model
    H = parse(args.h, tuple(m.params)) if args.h else lm.hamiltonian
    if H is None:
        raise UsageError("no Hamiltonian: pass --h or add one to the model file")
    seed = _seed(args)
    if not args.force:
        nd = nondegeneracy_report(m, m.domain, 256, seed)
        cl = closure_check(m, m.domain, 100, seed) if nd.passed else None
        if cl is None or not cl.passed:
            sys.stderr.write("model fails its checks; use --force to simulate anyway\n")
            return EXIT_FAIL
    if args.x0:
        x0 = _floats(args.x0, "--x0")
        if len(x0) != 2 * m.d:
            raise UsageError(f"--x0 needs {2 * m.d} components")
    else:
        x0 = list(m.domain.sample(1, seed)[0])
    try:
        tr = integrate(m, H, x0, args.t_end, args.dt, args.method)
    except DomainExitError as exc:
        _emit({**_header(lm), "error": str(exc), "pass": False})
        return EXIT_FAIL
    diag = conservation_report(tr, m, H, lm.scheme)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(csv_text(tr, m, H, lm.scheme))
    _emit({**_header(lm), "method": tr.method, "dt": tr.dt, "steps": len(tr) - 1,
           "x0": [float(v) for v in x0], "final": [float(v) for v in tr.x[-1]],
           "hamiltonian": to_str(H), "diagnostics": diag, "pass": True})
    return EXIT_OK


def cmd_quantum(args) -> int:
    lm = load_model(args.model)
    ordering = args.ordering or lm.ordering
    try:
        qm = QuantumModel.from_model(lm.model, ordering)
    except NonPolynomialError as exc:
        _emit({**_header(lm), "error": f"outside the polynomial scope: {exc}", "pass": False})
        return EXIT_SCOPE
    except ValueError as exc:
        _emit({**_header(lm), "error": str(exc), "pass": False})
        return EXIT_SCOPE
    rep = jacobi_report(qm, args.triples)
    _emit({**_header(lm), **rep})
    return EXIT_OK if rep["pass"] else EXIT_FAIL


def cmd_angular(args) -> int:
    lm = load_model(args.model)
    if lm.scheme is None:
        raise UsageError("model has no scheme block")
    seed = _seed(args)
    X = lm.model.domain.sample(args.points, seed)
    rep = check_angular_algebra(lm.scheme, X, args.tol)
    pdj = p_dot_J_residual(lm.scheme, X)
    dets = [s_system_determinant(lm.scheme, x) for x in X]
    singular = sum(s_system_singular(lm.scheme, x) for x in X)
    ok = rep.passed and pdj <= 1e-12
    _emit({**_header(lm), "environment": {"seed": seed, "n": args.points, "tol": args.tol},
           "algebra": rep.to_dict(), "p_dot_J": pdj,
           "s_system": {"min_determinant": float(min(dets)), "singular_points": int(singular)},
           "pass": ok})
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gupphase", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"gupphase {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    model_help = f"model JSON path or bundled name ({', '.join(BUNDLED)})"

    p = sub.add_parser("check", help="non-degeneracy, closure, Jacobi and angular checks")
    p.add_argument("model", help=model_help)
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--out")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("solve-f", help="reconstruct f from g, l, a model or a(rho)")
    p.add_argument("model", nargs="?", help=model_help)
    p.add_argument("--g", help="comma-separated components g_i(p)")
    p.add_argument("--l", help="planar l(q, p)")
    p.add_argument("--a", help="radial a(rho)")
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--target", help="comma-separated momenta")
    p.add_argument("--target-rho", type=float)
    p.add_argument("--closed-form", action="store_true")
    p.add_argument("--param", action="append", metavar="NAME=VALUE")
    p.set_defaults(func=cmd_solve_f)

    p = sub.add_parser("solve-a", help="a(rho) = -f f'/rho")
    p.add_argument("--f", required=True)
    p.add_argument("--at-rho", help="comma-separated radii to evaluate at")
    p.add_argument("--param", action="append", metavar="NAME=VALUE")
    p.set_defaults(func=cmd_solve_a)

    p = sub.add_parser("simulate", help="integrate the deformed Hamiltonian flow")
    p.add_argument("model", help=model_help)
    p.add_argument("--h", help="Hamiltonian (defaults to the model's)")
    p.add_argument("--x0", help="comma-separated q1..qd,p1..pd")
    p.add_argument("--t-end", type=float, default=10.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--method", choices=("rk4", "rk45"), default="rk4")
    p.add_argument("--csv")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("quantum-jacobi", help="exact Jacobi identities of the quantum algebra")
    p.add_argument("model", help=model_help)
    p.add_argument("--ordering", choices=("left", "right"))
    p.add_argument("--triples", choices=("all", "q-only"), default="all")
    p.set_defaults(func=cmd_quantum)

    p = sub.add_parser("angular-check", help="rotation algebra of a scheme model")
    p.add_argument("model", help=model_help)
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_angular)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (ModelFileError, ParseError, UsageError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except (NotIntegrableError, SolverError, EvalError, ArithmeticError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
