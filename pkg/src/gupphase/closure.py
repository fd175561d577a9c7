"""Closure of the symplectic form: equation systems, L decomposition and Jacobi.

For a model (d, f, L) the condition d(omega) = 0 is equivalent to

* f independent of q,
* L affine in q: L_ij = S_ij(p) - g_j(p) q_i + g_i(p) q_j,
* the gradient equation df/dp_i = g_i,
* for d >= 3 the cyclic constraint
  2 (f_k L_ij + f_i L_jk + f_j L_ki) - f (d_k L_ij + d_i L_jk + d_j L_ki) = 0
  over index triples i < j < k (f_k = df/dp_k, d_k = d/dp_k).

The same information is carried by the Jacobi identity of the bivector,
which :func:`jacobi_residual` evaluates independently.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import numpy as np

from .expr import (ZERO, Const, Expr, Var, diff, simplify, substitute, to_str)
from .structure import Box, CheckReport, DEFAULT_SEED, GupModel, bracket_expr

TOL = 1e-9
EXACT_TOL = 1e-10


class NonconformingError(ValueError):
    """L is not of the affine form S(p) - g_j q_i + g_i q_j."""


@dataclass
class LDecomposition:
    S: dict
    g: list
    exact: bool
    reason: str | None = None
    residual: float = 0.0

    def S_entry(self, i: int, j: int) -> Expr:
        if i == j:
            return ZERO
        if i < j:
            return self.S.get((i, j), ZERO)
        e = self.S.get((j, i), ZERO)
        return ZERO if e == ZERO else simplify(-e)


@dataclass
class ClosureReport:
    residuals: dict
    passes: dict
    passed: bool
    worst_points: dict = field(default_factory=dict)
    reason: str | None = None
    tol: float = TOL
    n: int = 0
    seed: int | None = None
    region: dict | None = None

    def to_check_report(self) -> CheckReport:
        notes = [self.reason] if self.reason else []
        return CheckReport("closure", self.passed, dict(self.residuals),
                           {k: self.tol for k in self.residuals}, self.n, self.seed,
                           self.region, dict(self.worst_points), notes)

    def to_dict(self) -> dict:
        d = self.to_check_report().to_dict()
        d["passes"] = {k: bool(v) for k, v in self.passes.items()}
        return d


def _points(m: GupModel, points) -> np.ndarray:
    if points is None:
        return m.domain.sample(64, DEFAULT_SEED)
    return np.atleast_2d(np.asarray(points, dtype=float))


def _max_abs(m: GupModel, exprs, X) -> tuple[float, np.ndarray | None]:
    exprs = [e for e in exprs if e != ZERO]
    if not exprs or len(X) == 0:
        return 0.0, None
    vals = np.abs(m.compile(exprs).batch(X))
    k = int(np.argmax(vals.max(axis=1)))
    return float(vals[k].max()), X[k]


def _qzero(d: int) -> dict:
    return {Var("q", k): ZERO for k in range(1, d + 1)}


# ---------------------------------------------------------------------------
# decomposition


def decompose_L(m: GupModel, points=None) -> LDecomposition:
    """Split L into S_ij = L_ij(q=0) and g_i = dL_ij/dq_j.

    ``exact`` is true when every second q-derivative of L vanishes, the
    first q-derivatives follow the antisymmetric pattern, and g_i does not
    depend on which j it was read from.
    """
    d = m.d
    X = _points(m, points)
    S = {}
    for (i, j), e in m.L.items():
        s = simplify(substitute(e, _qzero(d)))
        if s != ZERO:
            S[(i, j)] = s
    if d == 1:
        return LDecomposition(S, [ZERO], True)

    g = [simplify(diff(m.L_entry(i, 1 if i != 1 else 2), Var("q", 1 if i != 1 else 2)))
         for i in range(1, d + 1)]

    checks = []
    for (i, j), e in m.L.items():
        for k in range(1, d + 1):
            dk = diff(e, Var("q", k))
            # the affine pattern fixes every first q-derivative of L_ij
            if k == i:
                expected = simplify(-g[j - 1])
            elif k == j:
                expected = g[i - 1]
            else:
                expected = ZERO
            checks.append(simplify(dk - expected))
            for l in range(k, d + 1):
                checks.append(diff(dk, Var("q", l)))
    checks = [c for c in checks if c != ZERO]
    resid, _ = _max_abs(m, checks, X)
    if resid > EXACT_TOL:
        return LDecomposition(S, g, False, "nonconforming L", resid)
    return LDecomposition(S, g, True, None, resid)


def reconstruct_L(dec: LDecomposition, d: int) -> dict:
    out = {}
    for i in range(1, d + 1):
        for j in range(i + 1, d + 1):
            e = dec.S_entry(i, j) - dec.g[j - 1] * Var("q", i) + dec.g[i - 1] * Var("q", j)
            out[(i, j)] = simplify(e)
    return out


# ---------------------------------------------------------------------------
# component expressions


def q_independence_exprs(m: GupModel) -> list[Expr]:
    # with d = 1 every 2-form is closed, so nothing constrains f
    if m.d == 1:
        return []
    return [diff(m.f, Var("q", k)) for k in range(1, m.d + 1)]


def gradient_exprs(m: GupModel, dec: LDecomposition | None = None) -> list[Expr]:
    """df/dp_i - g_i for each i."""
    dec = dec or decompose_L(m)
    if not dec.exact:
        raise NonconformingError(dec.reason or "nonconforming L")
    if m.d == 1:
        return []
    return [simplify(diff(m.f, Var("p", i)) - dec.g[i - 1]) for i in range(1, m.d + 1)]


def _cyclic(f: Expr, M, i: int, j: int, k: int) -> Expr:
    fk, fi, fj = (diff(f, Var("p", n)) for n in (k, i, j))
    Mij, Mjk, Mki = M(i, j), M(j, k), M(k, i)
    first = fk * Mij + fi * Mjk + fj * Mki
    second = diff(Mij, Var("p", k)) + diff(Mjk, Var("p", i)) + diff(Mki, Var("p", j))
    return simplify(Const(2) * first - f * second)


def strange_exprs(m: GupModel) -> dict:
    """Cyclic constraint on L for each triple i < j < k (empty for d < 3)."""
    return {t: _cyclic(m.f, m.L_entry, *t) for t in combinations(range(1, m.d + 1), 3)}


def strange_s_exprs(m: GupModel, dec: LDecomposition | None = None) -> dict:
    """The same constraint with L replaced by its q-independent part S."""
    dec = dec or decompose_L(m)
    return {t: _cyclic(m.f, dec.S_entry, *t) for t in combinations(range(1, m.d + 1), 3)}


def jacobi_exprs(m: GupModel) -> dict:
    """Cyclic nested-bracket sum for every coordinate triple a < b < c.

    Coordinates are numbered 0..2d-1 as x = (q_1..q_d, p_1..p_d).
    """
    coords = m.coords()
    pi = m.poisson_exprs()
    out = {}
    for a, b, c in combinations(range(2 * m.d), 3):
        e = (bracket_expr(m, coords[a], pi[b][c]) + bracket_expr(m, coords[b], pi[c][a])
             + bracket_expr(m, coords[c], pi[a][b]))
        out[(a, b, c)] = simplify(e)
    return out


def symplectic_exprs(m: GupModel) -> list[list[Expr]]:
    """omega_ab in closed block form as expressions."""
    d = m.d
    h = Const(1) / m.f
    out = [[ZERO] * (2 * d) for _ in range(2 * d)]
    for i in range(d):
        out[i][d + i] = simplify(-h)
        out[d + i][i] = h
        for j in range(d):
            Lij = m.L_entry(i + 1, j + 1)
            if Lij != ZERO:
                out[d + i][d + j] = simplify(Lij / (m.f * m.f))
    return out


def domega_exprs(m: GupModel) -> dict:
    """(d omega)_abc = d_a w_bc + d_b w_ca + d_c w_ab for a < b < c."""
    w = symplectic_exprs(m)
    coords = m.coords()
    return {(a, b, c): simplify(diff(w[b][c], coords[a]) + diff(w[c][a], coords[b])
                                + diff(w[a][b], coords[c]))
            for a, b, c in combinations(range(2 * m.d), 3)}


def planar_closure_exprs(m: GupModel) -> dict:
    """The four d = 2 closure equations written with h = 1/f and l = L_12.

    Keys are the coordinate triples (0-based) of the matching component of
    d(omega).
    """
    if m.d != 2:
        raise ValueError("planar closure equations need d = 2")
    h = Const(1) / m.f
    hl = h * h * m.L_entry(1, 2)
    q1, q2, p1, p2 = m.coords()
    return {
        (0, 1, 2): simplify(diff(h, q2)),
        (0, 1, 3): simplify(-diff(h, q1)),
        (0, 2, 3): simplify(diff(hl, q1) - diff(h, p2)),
        (1, 2, 3): simplify(diff(hl, q2) + diff(h, p1)),
    }


# ---------------------------------------------------------------------------
# residuals


def q_independence_residual(m: GupModel, points=None) -> float:
    return _max_abs(m, q_independence_exprs(m), _points(m, points))[0]


def gradient_residual(m: GupModel, points=None, dec: LDecomposition | None = None) -> float:
    X = _points(m, points)
    return _max_abs(m, gradient_exprs(m, dec or decompose_L(m, X)), X)[0]


def strange_residual(m: GupModel, points=None) -> float:
    if m.d < 3:
        return 0.0
    return _max_abs(m, list(strange_exprs(m).values()), _points(m, points))[0]


def strange_residual_s(m: GupModel, points=None, dec: LDecomposition | None = None) -> float:
    if m.d < 3:
        return 0.0
    X = _points(m, points)
    return _max_abs(m, list(strange_s_exprs(m, dec or decompose_L(m, X)).values()), X)[0]


def jacobi_residual(m: GupModel, points=None) -> float:
    return _max_abs(m, list(jacobi_exprs(m).values()), _points(m, points))[0]


def domega_residual(m: GupModel, points=None) -> float:
    return _max_abs(m, list(domega_exprs(m).values()), _points(m, points))[0]


def closure_check(m: GupModel, region: Box | None = None, n: int = 100,
                  seed: int = DEFAULT_SEED, tol: float = TOL) -> ClosureReport:
    """Run every closure system on ``n`` seeded points of ``region``."""
    region = region or m.domain
    X = region.sample(n, seed)
    res: dict = {}
    worst: dict = {}
    reason = None

    def run(name, exprs):
        r, x = _max_abs(m, exprs, X)
        res[name] = r
        if x is not None:
            worst[name] = x

    run("q_independence", q_independence_exprs(m))
    dec = decompose_L(m, X)
    if dec.exact:
        run("gradient", gradient_exprs(m, dec))
        run("strange", list(strange_exprs(m).values()))
        run("strange_s", list(strange_s_exprs(m, dec).values()))
    else:
        reason = dec.reason or "nonconforming L"
        res["decomposition"] = dec.residual
    run("jacobi", list(jacobi_exprs(m).values()))
    passes = {k: bool(v <= tol) for k, v in res.items()}
    passed = all(passes.values()) and dec.exact
    return ClosureReport(res, passes, passed, worst, reason, tol, n, seed, region.to_dict())


# ---------------------------------------------------------------------------
# corruption recipes for negative tests


def corrupt(m: GupModel, recipe: str, index: int = 1, amount=Fraction(11, 10)) -> GupModel:
    """Deterministically perturb one of S, g, f.

    Recipes: ``scale-g`` (multiply g_index by ``amount``), ``shift-S``
    (add ``amount`` to S_12), ``q-in-f`` (add ``amount/10 * q_index`` to f),
    ``scale-f`` (multiply f by ``1 + amount/10 * p_index``).
    """
    d = m.d
    a = Const(Fraction(amount))
    if recipe == "scale-g":
        if d < 2:
            raise ValueError("scale-g needs d >= 2")
        dec = decompose_L(m)
        if not dec.exact:
            raise NonconformingError("cannot rescale g of a nonconforming L")
        g = list(dec.g)
        g[index - 1] = simplify(a * g[index - 1])
        L = reconstruct_L(LDecomposition(dec.S, g, True), d)
        return m.replace(L={k: v for k, v in L.items() if v != ZERO}, name=f"{m.name}+scale-g{index}")
    if recipe == "shift-S":
        if d < 2:
            raise ValueError("shift-S needs d >= 2")
        L = dict(m.L)
        L[(1, 2)] = simplify(m.L_entry(1, 2) + a)
        return m.replace(L=L, name=f"{m.name}+shift-S")
    if recipe == "q-in-f":
        return m.replace(f=simplify(m.f + a / Const(10) * Var("q", index)), name=f"{m.name}+q-in-f")
    if recipe == "scale-f":
        return m.replace(f=simplify(m.f * (Const(1) + a / Const(10) * Var("p", index))),
                         name=f"{m.name}+scale-f")
    raise ValueError(f"unknown corruption recipe {recipe!r}")


def describe(dec: LDecomposition) -> dict:
    return {
        "S": {f"{i},{j}": to_str(e) for (i, j), e in sorted(dec.S.items())},
        "g": [to_str(e) for e in dec.g],
        "exact": dec.exact,
        "reason": dec.reason,
    }
