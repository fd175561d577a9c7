"""Reconstruction of the deformation function f.

* from a gradient field g(p) by line integration (any d),
* in closed form for polynomial data (the planar family and general d),
* from the radial function a(rho) of the angular scheme, and back.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

from . import poly as _poly
from .expr import (Const, EvalError, Expr, Func, Mul, Neg, PhasePoint, Pow, Sym, Var, depends_on_q,
                   diff, evaluate, free_symbols, simplify, to_str, variables)
from .kernels import compile_exprs
from .poly import NonPolynomialError, Poly, exact_rational

INTEGRABILITY_TOL = 1e-10
PATH_TOL = 1e-7
SIMPSON_TOL = 1e-10


class SolverError(ValueError):
    pass


class NotIntegrableError(SolverError):
    pass


class DegenerateFError(SolverError):
    """The radicand of the radial solution is not positive."""

    def __init__(self, message: str, rho: float | None = None):
        super().__init__(message)
        self.rho = rho


# ---------------------------------------------------------------------------
# quadrature


def adaptive_simpson(fn: Callable[[float], float], a: float, b: float,
                     tol: float = SIMPSON_TOL, max_depth: int = 50) -> float:
    """Adaptive Simpson rule with Richardson correction."""

    def simpson(fa, fm, fb, h):
        return h / 6.0 * (fa + 4.0 * fm + fb)

    def rec(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = fn(lm), fn(rm)
        left = simpson(fa, flm, fm, m - a)
        right = simpson(fm, frm, fb, b - m)
        delta = left + right - whole
        if depth <= 0 or abs(delta) <= 15.0 * tol:
            return left + right + delta / 15.0
        return (rec(a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(m, b, fm, frm, fb, right, tol / 2.0, depth - 1))

    if a == b:
        return 0.0
    fa, fb, fm = fn(a), fn(b), fn(0.5 * (a + b))
    return rec(a, b, fa, fm, fb, simpson(fa, fm, fb, b - a), tol, max_depth)


# ---------------------------------------------------------------------------
# gradient fields


def _check_p_only(g: Sequence[Expr]) -> None:
    for e in g:
        if depends_on_q(e):
            raise SolverError(f"g must depend on momenta only, got '{to_str(e)}'")
    d = len(g)
    for e in g:
        for v in variables(e):
            if v.index > d:
                raise SolverError(f"'{to_str(e)}' uses {v.kind}{v.index} but g has {d} components")


def _pad(d: int, P) -> np.ndarray:
    P = np.atleast_2d(np.asarray(P, dtype=float))
    if P.shape[1] == 2 * d:
        return P
    if P.shape[1] != d:
        raise SolverError(f"points must have {d} momentum components")
    return np.hstack([np.zeros_like(P), P])


def curl_exprs(g: Sequence[Expr]) -> dict:
    d = len(g)
    return {(i, j): simplify(diff(g[i - 1], Var("p", j)) - diff(g[j - 1], Var("p", i)))
            for i in range(1, d + 1) for j in range(i + 1, d + 1)}


def check_integrability(g: Sequence[Expr], points, params: Mapping | None = None,
                        tol: float = INTEGRABILITY_TOL) -> tuple[bool, float]:
    """Max of |dg_i/dp_j - dg_j/dp_i| over ``points`` (momentum rows)."""
    g = list(g)
    _check_p_only(g)
    d = len(g)
    curls = [e for e in curl_exprs(g).values() if e != Const(0)]
    if not curls:
        return True, 0.0
    vals = compile_exprs(curls, d, params).batch(_pad(d, points))
    r = float(np.max(np.abs(vals)))
    return r <= tol, r


@dataclass(frozen=True)
class PathSpec:
    """Piecewise-linear path in momentum space through ``vertices``."""

    vertices: tuple
    tol: float = SIMPSON_TOL
    bounds: tuple | None = None  # optional ((lo, hi), ...) per momentum

    @classmethod
    def axis(cls, target: Sequence[float], order: Sequence[int] | None = None, **kw) -> "PathSpec":
        """Origin -> (t1, 0, ..) -> (t1, t2, 0, ..) -> ... -> target."""
        d = len(target)
        order = list(order) if order is not None else list(range(d))
        cur = [0.0] * d
        verts = [tuple(cur)]
        for i in order:
            cur[i] = float(target[i])
            verts.append(tuple(cur))
        return cls(tuple(verts), **kw)

    @classmethod
    def straight(cls, target: Sequence[float], **kw) -> "PathSpec":
        return cls((tuple(0.0 for _ in target), tuple(float(t) for t in target)), **kw)

    def check_bounds(self) -> None:
        if self.bounds is None:
            return
        for v in self.vertices:
            for x, (lo, hi) in zip(v, self.bounds):
                if not lo <= x <= hi:
                    raise SolverError(f"path vertex {v} leaves the domain")


def _line_integral(prog, d: int, path: PathSpec) -> float:
    total = 0.0
    x = np.zeros(2 * d)
    for a, b in zip(path.vertices[:-1], path.vertices[1:]):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        step = b - a
        if not np.any(step):
            continue

        def integrand(t, a=a, step=step):
            x[d:] = a + t * step
            return float(prog(x) @ step)

        total += adaptive_simpson(integrand, 0.0, 1.0, path.tol)
    return total


def solve_f_line_integral(g: Sequence[Expr], target: Sequence[float], c: float = 1.0,
                          path: PathSpec | None = None, params: Mapping | None = None,
                          verify: bool = True) -> float:
    """f(target) = c + integral of sum_i g_i dp_i along ``path``.

    With ``verify`` the field is checked for integrability around the path
    and the result is compared against the straight segment to the target.
    """
    g = list(g)
    _check_p_only(g)
    d = len(g)
    target = [float(t) for t in target]
    if len(target) != d:
        raise SolverError(f"target has {len(target)} components, g has {d}")
    path = path or PathSpec.axis(target)
    if not np.allclose(path.vertices[-1], target) or np.any(path.vertices[0]):
        raise SolverError("path must run from the origin to the target")
    path.check_bounds()
    prog = compile_exprs(g, d, params)
    value = c + _line_integral(prog, d, path)
    if verify:
        verts = np.asarray(path.vertices)
        lo, hi = verts.min(axis=0), verts.max(axis=0)
        rng = np.random.default_rng(0)
        sample = lo + (hi - lo) * rng.random((16, d))
        ok, r = check_integrability(g, np.vstack([verts, sample]), params)
        if not ok:
            raise NotIntegrableError(f"g is not a gradient field (curl residual {r:.3g})")
        other = c + _line_integral(prog, d, PathSpec.straight(target, tol=path.tol))
        if abs(other - value) > PATH_TOL:
            raise NotIntegrableError(f"line integral depends on the path ({abs(other - value):.3g})")
    return value


def path_difference(g: Sequence[Expr], target, params=None, paths=None) -> float:
    """|difference| of the line integral over two distinct paths."""
    g = list(g)
    d = len(g)
    if paths is None:
        paths = (PathSpec.axis(target), PathSpec.axis(target, order=range(d - 1, -1, -1))
                 if d > 1 else PathSpec.straight(target))
    prog = compile_exprs(g, d, params)
    a, b = (_line_integral(prog, d, p) for p in paths)
    return abs(a - b)


def solve_f_polynomial(g: Sequence[Expr], c=1, params: Mapping | None = None) -> Expr:
    """Exact f for a polynomial gradient field, integrated along the axis path."""
    g = list(g)
    _check_p_only(g)
    d = len(g)
    polys = [_poly.from_expr(e, params) for e in g]
    for (i, j), e in curl_exprs(g).items():
        if not _poly.from_expr(e, params).is_zero():
            raise NotIntegrableError(f"dg_{i}/dp_{j} != dg_{j}/dp_{i}")
    f = Poly.const(exact_rational(c))
    for i in range(1, d + 1):
        later = {f"p{j}": 0 for j in range(i + 1, d + 1)}
        f = f + _antiderivative(polys[i - 1].subs(later), f"p{i}")
    return f.to_expr()


def _antiderivative(P: Poly, var: str) -> Poly:
    out = {}
    for mono, c in P.terms.items():
        dm = dict(mono)
        e = dm.get(var, 0) + 1
        dm[var] = e
        key = tuple(sorted(dm.items(), key=lambda kv: _poly._gen_key(kv[0])))
        out[key] = out.get(key, 0) + c / e
    return Poly(out)


# ---------------------------------------------------------------------------
# planar polynomial family


@dataclass
class Poly2D:
    """l = sum alpha_mn p1^m p2^n + q1 sum beta_mn p1^m p2^n + q2 sum gamma_mn p1^m p2^n."""

    alpha: dict = field(default_factory=dict)
    beta: dict = field(default_factory=dict)
    gamma: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            clean = {k: Fraction(v) for k, v in getattr(self, name).items() if v != 0}
            setattr(self, name, clean)
        bad = self.constraint_violations()
        if bad:
            m, n = bad[0]
            raise NotIntegrableError(f"m*beta[m,n-1] + n*gamma[m-1,n] != 0 at m={m}, n={n}")

    def constraint_violations(self) -> list:
        keys = {(m + 0, n + 1) for m, n in self.beta} | {(m + 1, n) for m, n in self.gamma}
        out = []
        for m, n in sorted(keys):
            if m < 1 or n < 1:
                continue
            if m * self.beta.get((m, n - 1), 0) + n * self.gamma.get((m - 1, n), 0) != 0:
                out.append((m, n))
        return out

    @classmethod
    def from_expr(cls, l: Expr, params: Mapping | None = None) -> "Poly2D":
        P = _poly.from_expr(l, params)
        extra = P.gens() - {"q1", "q2", "p1", "p2"}
        if extra:
            raise NonPolynomialError(f"unbound symbols {sorted(extra)}")
        parts = {(): {}, ("q1",): {}, ("q2",): {}}
        for mono, c in P.terms.items():
            dm = dict(mono)
            qs = tuple(sorted(k for k in dm if k[0] == "q"))
            if qs not in parts or any(dm[k] != 1 for k in qs):
                raise SolverError("l must be affine in q1, q2 with no q1*q2 term")
            parts[qs][(dm.get("p1", 0), dm.get("p2", 0))] = c
        return cls(parts[()], parts[("q1",)], parts[("q2",)])

    @classmethod
    def from_free(cls, alpha=None, beta_n=None, gamma_m=None, beta_mixed=None) -> "Poly2D":
        """Admissible l from its free coefficients.

        ``beta_n[n]`` is beta_{0n}, ``gamma_m[m]`` is -gamma_{m0} and
        ``beta_mixed[(m, n)]`` (m >= 1) are the remaining beta_{mn}; the
        q2 coefficients with n >= 1 follow from the constraint.
        """
        beta = {(0, n): Fraction(v) for n, v in (beta_n or {}).items()}
        gamma = {(m, 0): -Fraction(v) for m, v in (gamma_m or {}).items()}
        for (m, n), v in (beta_mixed or {}).items():
            if m < 1:
                raise ValueError("beta_mixed keys need m >= 1")
            beta[(m, n)] = Fraction(v)
            gamma[(m - 1, n + 1)] = -Fraction(m, n + 1) * Fraction(v)
        return cls(dict(alpha or {}), beta, gamma)

    @classmethod
    def random(cls, degree: int, seed: int = 0, scale: int = 5) -> "Poly2D":
        rng = np.random.default_rng(seed)

        def r():
            return Fraction(int(rng.integers(-scale, scale + 1)), int(rng.integers(1, scale + 1)))

        alpha = {(m, n): r() for m in range(degree + 1) for n in range(degree + 1 - m)}
        beta_n = {n: r() for n in range(degree)}
        gamma_m = {m: r() for m in range(degree)}
        mixed = {(m, n): r() for m in range(1, degree) for n in range(degree - m)}
        return cls.from_free(alpha, beta_n, gamma_m, mixed)

    def _poly(self, coeffs: dict) -> Poly:
        return Poly({tuple(x for x in (("p1", m), ("p2", n)) if x[1]): c for (m, n), c in coeffs.items()})

    def to_poly(self) -> Poly:
        return (self._poly(self.alpha) + Poly.gen("q1") * self._poly(self.beta)
                + Poly.gen("q2") * self._poly(self.gamma))

    def to_expr(self) -> Expr:
        return self.to_poly().to_expr()

    def gradient(self) -> tuple[Expr, Expr]:
        """(dl/dq2, -dl/dq1): the field whose potential is f."""
        return (self._poly(self.gamma).to_expr(), (-self._poly(self.beta)).to_expr())


def solve_f_polynomial_2d(l: Poly2D, c=1) -> Expr:
    """Closed-form f for an admissible planar polynomial l.

    f = -sum gamma_m/(m+1) p1^(m+1) - sum beta_n/(n+1) p2^(n+1)
        - sum_{m,n>=1} beta_{m,n-1}/n p1^m p2^n + c
    with beta_n = beta_{0n} and gamma_m = -gamma_{m0}.
    """
    bad = l.constraint_violations()
    if bad:
        raise NotIntegrableError(f"constraint violated at (m, n) = {bad[0]}")
    terms: dict = {(): exact_rational(c)}

    def add(m, n, v):
        key = tuple(x for x in (("p1", m), ("p2", n)) if x[1])
        terms[key] = terms.get(key, 0) + v

    for (m, n), v in l.gamma.items():
        if n == 0:
            add(m + 1, 0, v / (m + 1))          # -gamma_m/(m+1), gamma_m = -gamma_{m0}
    for (m, n), v in l.beta.items():
        if m == 0:
            add(0, n + 1, -v / (n + 1))
        else:
            add(m, n + 1, -v / (n + 1))
    return Poly(terms).to_expr()


# ---------------------------------------------------------------------------
# radial functions


RHO = Sym("rho")


def _radial_poly(e: Expr, params, symbolic: bool = False) -> Poly | None:
    """Polynomial in rho (unbound parameters kept as generators if ``symbolic``)."""
    try:
        P = _poly.from_expr(e, params)
    except NonPolynomialError:
        return None
    return P if symbolic or P.gens() <= {"rho"} else None


def _check_radial(e: Expr, params, symbolic: bool = False) -> None:
    if variables(e):
        raise SolverError(f"'{to_str(e)}' must depend on rho only")
    unbound = free_symbols(e) - {"rho"} - set(params or {})
    if unbound and not symbolic:
        raise SolverError(f"unbound parameters {sorted(unbound)} in '{to_str(e)}'")


@dataclass
class RadialSolution:
    """f(rho) = sqrt(c - 2 * integral_0^rho a(r) r dr)."""

    a: Expr
    c: float
    params: dict
    expr: Expr | None
    _prog: object = None

    def __post_init__(self):
        self._prog = compile_exprs([self.a], 0, self.params, extra=("rho",))

    def _a(self, r: float) -> float:
        return float(self._prog([r])[0])

    def radicand(self, rho: float) -> float:
        return self.c - 2.0 * adaptive_simpson(lambda r: self._a(r) * r, 0.0, float(rho))

    def critical_rho(self, rho: float) -> float:
        lo, hi = 0.0, float(rho)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if self.radicand(mid) > 0:
                lo = mid
            else:
                hi = mid
        return hi

    def __call__(self, rho):
        scalar = np.ndim(rho) == 0
        out = []
        for r in np.atleast_1d(np.asarray(rho, dtype=float)):
            if r < 0:
                raise SolverError("rho must be nonnegative")
            R = self.radicand(r)
            if not R > 0:
                crit = self.critical_rho(r) if self.c > 0 else 0.0
                raise DegenerateFError(f"degenerate f: radicand {R:.3g} <= 0 at rho={r:g} "
                                       f"(first zero near rho={crit:.10g})", crit)
            out.append(math.sqrt(R))
        return out[0] if scalar else np.array(out)


def solve_f_radial(a: Expr, c: float = 1.0, params: Mapping | None = None) -> RadialSolution:
    """Radial solution of the angular scheme; ``expr`` is set when a is polynomial."""
    params = dict(params or {})
    _check_radial(a, params)
    expr = None
    P = _radial_poly(a, params)
    if P is not None:
        R = Poly.const(exact_rational(c)) - Poly.const(2) * _antiderivative(P * Poly.gen("rho"), "rho")
        root = _poly.univariate_sqrt(R, "rho")
        expr = root.to_expr() if root is not None else simplify(Func("sqrt", R.to_expr()))
    return RadialSolution(a, float(c), params, expr)


def solve_a_from_f(f: Expr, params: Mapping | None = None) -> Expr:
    """a(rho) = -f(rho) f'(rho) / rho.

    Polynomial f and f = sqrt(polynomial) are handled exactly, so the
    removable singularity at rho = 0 disappears from the result.
    """
    params = dict(params or {})
    _check_radial(f, params, symbolic=True)
    P = _radial_poly(f, params, symbolic=True)
    if P is not None:
        dP = P.diff("rho")
        return simplify(-(_divide_by_rho(dP).to_expr() * P.to_expr()))
    if isinstance(f, Func) and f.name == "sqrt":
        R = _radial_poly(f.arg, params, symbolic=True)
        if R is not None:
            # f f' = R'/2
            return (Poly.const(Fraction(-1, 2)) * _divide_by_rho(R.diff("rho"))).to_expr()
    fp = diff(f, RHO)
    x0 = PhasePoint(0, (), (), {**params, "rho": 0.0})
    try:
        slope0 = evaluate(fp, x0)
    except EvalError:
        slope0 = math.nan
    if not abs(slope0) <= 1e-12:
        raise SolverError("f'(rho)/rho is unbounded at rho = 0 (f'(0) != 0)")
    reduced = _drop_rho_factor(fp)
    if reduced is not None:
        return simplify(-(f * reduced))
    return simplify(-(f * fp) / RHO)


def _drop_rho_factor(e: Expr) -> Expr | None:
    """e / rho when rho appears as an explicit factor of the product e."""
    if e == RHO:
        return Const(1)
    if isinstance(e, Neg):
        inner = _drop_rho_factor(e.arg)
        return None if inner is None else Neg(inner)
    if isinstance(e, Pow) and e.base == RHO and e.exp >= 2:
        return RHO if e.exp == 2 else Pow(RHO, e.exp - 1)
    if isinstance(e, Mul):
        left = _drop_rho_factor(e.left)
        if left is not None:
            return left * e.right
        right = _drop_rho_factor(e.right)
        if right is not None:
            return e.left * right
    return None


def _divide_by_rho(P: Poly) -> Poly:
    if not P.coeff_in("rho").get(0, Poly()).is_zero():
        raise SolverError("f'(rho)/rho is unbounded at rho = 0 (f'(0) != 0)")
    return Poly({_shift(mono): c for mono, c in P.terms.items()})


def _shift(mono: tuple) -> tuple:
    dm = dict(mono)
    dm["rho"] -= 1
    if not dm["rho"]:
        del dm["rho"]
    return tuple(sorted(dm.items(), key=lambda kv: _poly._gen_key(kv[0])))


def a_value(f: Expr, rho: float, params: Mapping | None = None) -> float:
    """Numeric -f f'/rho, with the rho -> 0 limit -f(0) f''(0)."""
    params = dict(params or {})
    fp = diff(f, RHO)

    def at(e, r):
        return evaluate(e, PhasePoint(0, (), (), {**params, "rho": float(r)}))

    if rho == 0:
        return -at(f, 0.0) * at(diff(fp, RHO), 0.0)
    return -at(f, rho) * at(fp, rho) / rho
