"""Deformed phase-space models and their Poisson / symplectic structure.

A model is the data (d, f, L): {q_i, p_j} = f delta_ij, {q_i, q_j} = L_ij and
{p_i, p_j} = 0.  In coordinates x = (q_1..q_d, p_1..p_d) the Poisson bivector
is [[L, f I], [-f I, 0]] and its inverse, the symplectic matrix, has the closed
block form [[0, -I/f], [I/f, L/f^2]].
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from . import poly as _poly
from .expr import (ONE, ZERO, EvalError, Expr, PhasePoint, Var, diff, evaluate,
                   free_symbols, max_index, simplify, to_str)
from .kernels import compile_exprs

DEFAULT_SEED = 20240917
ABS_TOL = 1e-10
REL_TOL = 1e-9


class ModelError(ValueError):
    """Inconsistent model data (bad indices, unbound symbols, f <= 0)."""


class DegeneratePointError(ArithmeticError):
    """The symplectic form is singular (f = 0) at the requested point."""


@dataclass(frozen=True)
class Box:
    """Axis-aligned sampling region: one (lo, hi) pair per coordinate."""

    q: tuple
    p: tuple

    @classmethod
    def uniform(cls, d: int, q=(-1.0, 1.0), p=(-0.5, 0.5)) -> "Box":
        return cls(tuple((float(q[0]), float(q[1])) for _ in range(d)),
                   tuple((float(p[0]), float(p[1])) for _ in range(d)))

    @property
    def d(self) -> int:
        return len(self.q)

    def bounds(self) -> np.ndarray:
        return np.array(list(self.q) + list(self.p), dtype=float)

    def sample(self, n: int, seed: int = DEFAULT_SEED) -> np.ndarray:
        b = self.bounds()
        rng = np.random.default_rng(seed)
        return rng.uniform(b[:, 0], b[:, 1], size=(n, len(b)))

    def contains(self, x) -> bool:
        b = self.bounds()
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= b[:, 0]) and np.all(x <= b[:, 1]))

    def to_dict(self) -> dict:
        return {"q": [list(v) for v in self.q], "p": [list(v) for v in self.p]}


@dataclass(frozen=True, eq=False)
class GupModel:
    """Deformation data (d, f, L) with parameter bindings.

    ``L`` stores only the upper triangle, keyed by 1-based ``(i, j)`` with
    ``i < j``; missing entries are zero and ``L[j, i] = -L[i, j]``.
    """

    d: int
    f: Expr
    L: Mapping[tuple, Expr] = field(default_factory=dict)
    params: Mapping[str, float] = field(default_factory=dict)
    name: str = "model"
    domain: Box | None = None
    meta: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.d < 1:
            raise ModelError("dimension must be positive")
        clean = {}
        for (i, j), e in dict(self.L).items():
            if not (1 <= i < j <= self.d):
                raise ModelError(f"L entry ({i},{j}) is not in the upper triangle for d={self.d}")
            clean[(i, j)] = e
        object.__setattr__(self, "L", clean)
        object.__setattr__(self, "params", dict(self.params))
        if self.domain is None:
            object.__setattr__(self, "domain", Box.uniform(self.d))
        for e in [self.f, *clean.values()]:
            if max_index(e) > self.d:
                raise ModelError(f"'{to_str(e)}' uses a variable beyond d={self.d}")
            missing = free_symbols(e) - set(self.params)
            if missing:
                raise ModelError(f"unbound parameters {sorted(missing)} in '{to_str(e)}'")

    def L_entry(self, i: int, j: int) -> Expr:
        if i == j:
            return ZERO
        if i < j:
            return self.L.get((i, j), ZERO)
        e = self.L.get((j, i), ZERO)
        return ZERO if e == ZERO else simplify(-e)

    def replace(self, **changes) -> "GupModel":
        return dataclasses.replace(self, **changes)

    def point(self, x) -> PhasePoint:
        """PhasePoint at coordinates ``x`` carrying this model's parameters."""
        if isinstance(x, PhasePoint):
            if x.d != self.d:
                raise ModelError(f"point has dimension {x.d}, model has {self.d}")
            return PhasePoint(x.d, x.q, x.p, {**self.params, **x.params})
        return PhasePoint.from_array(list(x), self.params)

    def coords(self) -> list[Var]:
        return [Var("q", i) for i in range(1, self.d + 1)] + [Var("p", i) for i in range(1, self.d + 1)]

    def poisson_exprs(self) -> list[list[Expr]]:
        d = self.d
        out = [[ZERO] * (2 * d) for _ in range(2 * d)]
        for i in range(d):
            for j in range(d):
                out[i][j] = self.L_entry(i + 1, j + 1)
            out[i][d + i] = self.f
            out[d + i][i] = simplify(-self.f)
        return out

    def compile(self, exprs: Sequence[Expr]):
        return compile_exprs(exprs, self.d, self.params)

    def validate(self, n: int = 256, seed: int = DEFAULT_SEED) -> None:
        """Raise :class:`ModelError` unless f > 0 at sampled domain points."""
        rep = nondegeneracy_report(self, self.domain, n, seed)
        if not rep.passed:
            raise ModelError(f"f is not strictly positive on the domain (min {rep.residuals['min_f']:.3g})")


@dataclass
class CheckReport:
    name: str
    passed: bool
    residuals: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    n: int = 0
    seed: int | None = None
    region: dict | None = None
    worst_points: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "pass": bool(self.passed),
            "residuals": {k: float(v) for k, v in self.residuals.items()},
            "tolerances": {k: float(v) for k, v in self.tolerances.items()},
            "n": self.n,
            "seed": self.seed,
            "region": self.region,
            "worst_points": {k: [float(c) for c in v] for k, v in self.worst_points.items()},
            "notes": list(self.notes),
        }


# ---------------------------------------------------------------------------
# matrices


def _eval(m: GupModel, e: Expr, x: PhasePoint) -> float:
    return evaluate(e, x)


def poisson_matrix(m: GupModel, x) -> np.ndarray:
    """Bivector pi^{ab} = {x^a, x^b} at ``x``."""
    pt = m.point(x)
    d = m.d
    fv = _eval(m, m.f, pt)
    out = np.zeros((2 * d, 2 * d))
    for (i, j), e in m.L.items():
        v = _eval(m, e, pt)
        out[i - 1, j - 1] = v
        out[j - 1, i - 1] = -v
    idx = np.arange(d)
    out[idx, d + idx] = fv
    out[d + idx, idx] = -fv
    return out


def symplectic_matrix(m: GupModel, x) -> np.ndarray:
    """omega_{ab} from its closed block form (no numerical inversion)."""
    pt = m.point(x)
    d = m.d
    fv = _eval(m, m.f, pt)
    if fv == 0.0:
        raise DegeneratePointError(f"f = 0 at q={pt.q}, p={pt.p}")
    out = np.zeros((2 * d, 2 * d))
    idx = np.arange(d)
    out[idx, d + idx] = -1.0 / fv
    out[d + idx, idx] = 1.0 / fv
    for (i, j), e in m.L.items():
        v = _eval(m, e, pt) / fv ** 2
        out[d + i - 1, d + j - 1] = v
        out[d + j - 1, d + i - 1] = -v
    return out


# ---------------------------------------------------------------------------
# brackets


def bracket_expr(m: GupModel, F: Expr, G: Expr) -> Expr:
    """Symbolic {F, G} = dF_a pi^{ab} dG_b."""
    d = m.d
    dFq = [diff(F, Var("q", i)) for i in range(1, d + 1)]
    dFp = [diff(F, Var("p", i)) for i in range(1, d + 1)]
    dGq = [diff(G, Var("q", i)) for i in range(1, d + 1)]
    dGp = [diff(G, Var("p", i)) for i in range(1, d + 1)]
    terms: list[Expr] = []
    for i in range(d):
        if dFq[i] == ZERO:
            continue
        for j in range(d):
            if i == j or dGq[j] == ZERO:
                continue
            Lij = m.L_entry(i + 1, j + 1)
            if Lij != ZERO:
                terms.append(dFq[i] * Lij * dGq[j])
    for i in range(d):
        inner = []
        if dFq[i] != ZERO and dGp[i] != ZERO:
            inner.append(dFq[i] * dGp[i])
        if dFp[i] != ZERO and dGq[i] != ZERO:
            inner.append(-(dFp[i] * dGq[i]))
        if inner:
            s = inner[0] if len(inner) == 1 else inner[0] + inner[1]
            terms.append(m.f * s)
    if not terms:
        return ZERO
    out = terms[0]
    for t in terms[1:]:
        out = out + t
    return simplify(out)


def bracket(m: GupModel, F: Expr, G: Expr, x) -> float:
    """Numeric deformed bracket {F, G}(x) = grad F . pi(x) . grad G."""
    pt = m.point(x)
    coords = m.coords()
    gF = np.array([evaluate(diff(F, v), pt) for v in coords])
    gG = np.array([evaluate(diff(G, v), pt) for v in coords])
    return float(gF @ poisson_matrix(m, pt) @ gG)


# ---------------------------------------------------------------------------
# non-degeneracy


def kmm_radial_form(m: GupModel):
    """(c, k) when f = c + k*(p_1^2 + ... + p_d^2) exactly, else None."""
    try:
        P = _poly.from_expr(m.f, m.params)
    except _poly.NonPolynomialError:
        return None
    c = P.constant()
    rest = P - _poly.Poly.const(c)
    if rest.is_zero():
        return (c, Fraction(0))
    k = rest.terms.get((("p1", 2),))
    if k is None:
        return None
    target = _poly.Poly.const(0)
    for i in range(1, m.d + 1):
        target = target + _poly.Poly.gen(f"p{i}", 2)
    if rest == target * _poly.Poly.const(k):
        return (c, k)
    return None


def nondegeneracy_report(m: GupModel, region: Box | None = None, n: int = 1000,
                         seed: int = DEFAULT_SEED) -> CheckReport:
    """Minimum of f over ``n`` seeded samples; fails unless it is positive."""
    region = region or m.domain
    X = region.sample(n, seed)
    notes = []
    try:
        fv = m.compile([m.f]).batch(X)[:, 0]
        k = int(np.argmin(fv))
        min_f = float(fv[k])
        worst = {"min_f": X[k]}
    except EvalError as exc:
        min_f = float("nan")
        worst = {}
        notes.append(f"f could not be evaluated: {exc}")
    passed = bool(min_f > 0.0)
    form = kmm_radial_form(m)
    if form is not None and form[1] != 0:
        c, k2 = form
        if k2 > 0 and c > 0:
            notes.append("f = c + k*rho^2 with k > 0, c > 0: positive on all of momentum space")
        elif k2 < 0 and c > 0:
            notes.append(f"f = c + k*rho^2 with k < 0: positive only on the momentum ball rho^2 < {float(c / -k2):.12g}")
        else:
            notes.append("f = c + k*rho^2 with c <= 0: not positive near p = 0")
    return CheckReport("nondegeneracy", passed, {"min_f": min_f}, {"min_f": 0.0}, n, seed,
                       region.to_dict(), worst, notes)
