"""Rotation generators for three-dimensional radial models.

Given a(rho) and f(rho), the scheme sets

    J_k = s_k(p) + (q x p)_k / f,    {q_i, q_j} = a eps_ijk J_k,    {q_i, p_j} = f delta_ij,

and the checks below confirm that J closes the rotation algebra, that
p . J vanishes when s = 0, and how the auxiliary s-system degenerates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import poly as _poly
from .expr import (ZERO, Const, Expr, Var, diff, evaluate, radial_to_momenta,
                   simplify, to_str, variables)
from .structure import (Box, CheckReport, DEFAULT_SEED, GupModel, bracket_expr)

TOL = 1e-9
PDOTJ_TOL = 1e-12

# (q x p)_k written as in the scheme: J_1 ~ p3 q2 - p2 q3 and cyclic
_KERNEL = {1: (3, 2, 2, 3), 2: (1, 3, 3, 1), 3: (2, 1, 1, 2)}


def levi_civita(i: int, j: int, k: int) -> int:
    return (i - j) * (j - k) * (k - i) // 2


def _kernel(k: int) -> Expr:
    a, b, c, d = _KERNEL[k]
    return Var("p", a) * Var("q", b) - Var("p", c) * Var("q", d)


class SchemeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class AngularScheme:
    a: Expr                 # in rho
    f: Expr                 # in rho
    s: tuple                # three Exprs in p
    J: tuple                # three Exprs
    model: GupModel
    a_p: Expr = field(default=ZERO)   # a as a function of the momenta
    f_p: Expr = field(default=ZERO)

    @property
    def params(self):
        return self.model.params


def _ratio(a: Expr, f: Expr) -> Expr | None:
    """a/f as an exact polynomial in rho when possible."""
    try:
        A = _poly.from_expr(a)
        F = _poly.from_expr(f)
    except _poly.NonPolynomialError:
        return None
    if A.is_zero():
        return ZERO
    Q = _poly.exact_quotient(A, F, "rho")
    return None if Q is None else Q.to_expr()


def build_scheme(a: Expr, f: Expr, s: Sequence[Expr] | None = None,
                 params: Mapping | None = None, name: str = "scheme",
                 domain: Box | None = None) -> tuple[AngularScheme, GupModel]:
    """Scheme data and the induced model with L_ij = a eps_ijk J_k."""
    for label, e in (("a", a), ("f", f)):
        if variables(e):
            raise SchemeError(f"{label} must depend on rho only, got '{to_str(e)}'")
    s = tuple(s) if s is not None else (ZERO, ZERO, ZERO)
    if len(s) != 3:
        raise SchemeError("s needs three components")
    for e in s:
        if any(v.kind == "q" for v in variables(e)):
            raise SchemeError(f"s must depend on momenta only, got '{to_str(e)}'")
    a_p = radial_to_momenta(a, 3)
    f_p = radial_to_momenta(f, 3)
    J = tuple(simplify(s[k - 1] + _kernel(k) / f_p) if s[k - 1] != ZERO else simplify(_kernel(k) / f_p)
              for k in (1, 2, 3))
    ratio = _ratio(a, f)
    L = {}
    for i, j in ((1, 2), (1, 3), (2, 3)):
        k = 6 - i - j
        sign = levi_civita(i, j, k)
        if ratio is not None:
            e = radial_to_momenta(ratio, 3) * _kernel(k)
            if s[k - 1] != ZERO:
                e = e + a_p * s[k - 1]
        else:
            e = a_p * J[k - 1]
        e = simplify(e if sign > 0 else -e)
        if e != ZERO:
            L[(i, j)] = e
    model = GupModel(3, simplify(f_p), L, dict(params or {}), name, domain,
                     {"scheme": {"a": to_str(a), "f": to_str(f), "s": [to_str(e) for e in s]}})
    scheme = AngularScheme(a, f, s, J, model, a_p, f_p)
    return scheme, model


# ---------------------------------------------------------------------------
# checks


def _points(scheme: AngularScheme, points, n=200, seed=DEFAULT_SEED) -> np.ndarray:
    if points is None:
        X = scheme.model.domain.sample(n, seed)
    else:
        X = np.atleast_2d(np.asarray(points, dtype=float))
    # rho = 0 is excluded; derivative checks of a(rho) need rho > 0
    return X[np.linalg.norm(X[:, 3:], axis=1) > 0]


def algebra_exprs(scheme: AngularScheme) -> dict:
    """Residual expressions of the three families {J,q}, {J,p}, {J,J}."""
    m = scheme.model
    qs = [Var("q", i) for i in (1, 2, 3)]
    ps = [Var("p", i) for i in (1, 2, 3)]
    J = scheme.J
    fam = {"Jq": {}, "Jp": {}, "JJ": {}}
    for i in (1, 2, 3):
        for j in (1, 2, 3):
            k = 6 - i - j if i != j else None
            eps = levi_civita(i, j, k) if k else 0
            fam["Jq"][(i, j)] = simplify(bracket_expr(m, J[i - 1], qs[j - 1]) - Const(eps) * qs[k - 1]
                                         if eps else bracket_expr(m, J[i - 1], qs[j - 1]))
            fam["Jp"][(i, j)] = simplify(bracket_expr(m, J[i - 1], ps[j - 1]) - Const(eps) * ps[k - 1]
                                         if eps else bracket_expr(m, J[i - 1], ps[j - 1]))
            if i < j:
                fam["JJ"][(i, j)] = simplify(bracket_expr(m, J[i - 1], J[j - 1]) - Const(eps) * J[k - 1])
    return fam


def check_angular_algebra(scheme: AngularScheme, points=None, tol: float = TOL,
                          n: int = 200, seed: int = DEFAULT_SEED) -> CheckReport:
    X = _points(scheme, points, n, seed)
    m = scheme.model
    res, worst = {}, {}
    for name, exprs in algebra_exprs(scheme).items():
        es = [e for e in exprs.values() if e != ZERO]
        if not es:
            res[name] = 0.0
            continue
        vals = np.abs(m.compile(es).batch(X))
        r = int(np.argmax(vals.max(axis=1)))
        res[name] = float(vals[r].max())
        worst[name] = X[r]
    passed = all(v <= tol for v in res.values())
    return CheckReport("angular_algebra", passed, res, {k: tol for k in res}, len(X),
                       seed if points is None else None, m.domain.to_dict(), worst)


def p_dot_J_expr(scheme: AngularScheme) -> Expr:
    return simplify(sum((Var("p", k) * scheme.J[k - 1] for k in (2, 3)), Var("p", 1) * scheme.J[0]))


def p_dot_J(scheme: AngularScheme, x) -> float:
    """sum_k p_k J_k at x, with the kernel term summed termwise."""
    pt = scheme.model.point(x)
    fv = evaluate(scheme.f_p, pt)
    q, p = pt.q, pt.p
    total = 0.0
    for k in (1, 2, 3):
        a, b, c, d = _KERNEL[k]
        sk = evaluate(scheme.s[k - 1], pt) if scheme.s[k - 1] != ZERO else 0.0
        total += p[k - 1] * sk + p[k - 1] * (p[a - 1] * q[b - 1] - p[c - 1] * q[d - 1]) / fv
    return total


def p_dot_J_residual(scheme: AngularScheme, points=None) -> float:
    X = _points(scheme, points)
    return max((abs(p_dot_J(scheme, x)) for x in X), default=0.0)


def s_system_determinant(scheme: AngularScheme, x) -> float:
    """f^-2 (f^2 + a rho^2): determinant of the linear system forcing s = 0."""
    pt = scheme.model.point(x)
    fv = evaluate(scheme.f_p, pt)
    av = evaluate(scheme.a_p, pt)
    rho2 = sum(v * v for v in pt.p)
    return (fv * fv + av * rho2) / (fv * fv)


def s_system_singular(scheme: AngularScheme, x, tol: float = 1e-12) -> bool:
    """True on the surface a rho^2 = -f^2.

    On an open set this surface would force f = k*rho, which has no
    undeformed limit; it can therefore only be met on a set of positive
    codimension.
    """
    return abs(s_system_determinant(scheme, x)) <= tol


def f_system_exprs(scheme: AngularScheme) -> list[Expr]:
    """df/dp_i + a p_i / f for i = 1..3."""
    return [simplify(diff(scheme.f_p, Var("p", i)) + scheme.a_p * Var("p", i) / scheme.f_p)
            for i in (1, 2, 3)]


def qpb_system_exprs(scheme: AngularScheme) -> list[Expr]:
    """Nine equations on s coming from {J_m, q_l} = eps_mlk q_k."""
    f2 = scheme.f_p * scheme.f_p
    a = scheme.a_p
    s = scheme.s
    p = [Var("p", i) for i in (1, 2, 3)]
    out = []
    for m in (1, 2, 3):
        others = [k for k in (1, 2, 3) if k != m]
        out.append(f2 * diff(s[m - 1], p[m - 1]) + a * (s[others[0] - 1] * p[others[0] - 1]
                                                         + s[others[1] - 1] * p[others[1] - 1]))
        for l in others:
            out.append(f2 * diff(s[m - 1], p[l - 1]) - a * p[l - 1] * s[m - 1])
    return [simplify(e) for e in out]


def system_residual(scheme: AngularScheme, exprs: Sequence[Expr], points=None) -> float:
    X = _points(scheme, points)
    es = [e for e in exprs if e != ZERO]
    if not es:
        return 0.0
    return float(np.max(np.abs(scheme.model.compile(es).batch(X))))


def rotation_invariance_residual(scheme: AngularScheme, H: Expr, points=None) -> float:
    """max_k |{J_k, H}| over the points."""
    m = scheme.model
    es = [bracket_expr(m, scheme.J[k], H) for k in range(3)]
    return system_residual(scheme, es, points)
