"""Exact normal ordering for deformed Heisenberg algebras.

The algebra is generated by q_1..q_d and commuting momentum functions c(p),
with

    [q_i, p_j] = ih f(p) delta_ij,   [q_i, q_j] = ih L_ij,
    L_ij = S_ij(p) - g_j(p) q_i + g_i(p) q_j,   g = grad f,

and L ordered with its momentum factors on the left ("left") or on the
right ("right").  Operators are kept in the matching normal form: every
term is (ih)^n * c(p) * q_i1 ... q_ik (left) or (ih)^n * q_i1 ... q_ik * c(p)
(right) with i1 <= ... <= ik.  The formal symbol ih is tracked by its power,
so the classical content of an identity can be read off grade by grade.

Everything is exact: coefficients are :class:`~gupphase.poly.Poly` over the
rationals and parameters must be numbers before the model is built.
"""

from __future__ import annotations

import random
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Mapping, Sequence

from . import poly as _poly
from .expr import Expr, to_str
from .poly import NonPolynomialError, Poly

ORDERINGS = ("left", "right")
STRATEGIES = ("leftmost", "rightmost", "random")


class ModelMismatch(ValueError):
    pass


def _p(i: int) -> str:
    return f"p{i}"


class NormalOp:
    """Sum of (ih)^n * coeff(p) * q-monomial terms in a fixed ordering.

    ``terms`` maps ``(n, mono)`` to a nonzero :class:`Poly` in the momenta,
    where ``mono`` is a nondecreasing tuple of q indices.
    """

    __slots__ = ("terms", "ordering", "d")

    def __init__(self, terms: Mapping | None, ordering: str, d: int):
        self.terms = {k: v for k, v in (terms or {}).items() if not v.is_zero()}
        self.ordering = ordering
        self.d = d

    # arithmetic -----------------------------------------------------------
    def _check(self, other: "NormalOp"):
        if not isinstance(other, NormalOp):
            raise TypeError("expected a NormalOp")
        if other.ordering != self.ordering or other.d != self.d:
            raise ModelMismatch("operators belong to different models or orderings")

    def __add__(self, other: "NormalOp") -> "NormalOp":
        self._check(other)
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out[k] + v if k in out else v
        return NormalOp(out, self.ordering, self.d)

    def __neg__(self) -> "NormalOp":
        return NormalOp({k: -v for k, v in self.terms.items()}, self.ordering, self.d)

    def __sub__(self, other: "NormalOp") -> "NormalOp":
        return self + (-other)

    def scale(self, c) -> "NormalOp":
        c = Poly.const(Fraction(c)) if not isinstance(c, Poly) else c
        return NormalOp({k: v * c for k, v in self.terms.items()}, self.ordering, self.d)

    def __eq__(self, other) -> bool:
        if not isinstance(other, NormalOp):
            return NotImplemented
        return (self.ordering, self.d, self.terms) == (other.ordering, other.d, other.terms)

    def __hash__(self):
        return hash((self.ordering, self.d, frozenset(self.terms.items())))

    def is_zero(self) -> bool:
        return not self.terms

    # grading --------------------------------------------------------------
    def grades(self) -> list[int]:
        return sorted({n for n, _ in self.terms})

    def grade(self, n: int) -> "NormalOp":
        return NormalOp({k: v for k, v in self.terms.items() if k[0] == n}, self.ordering, self.d)

    def as_poly(self, n: int | None = None) -> Poly:
        """Commutative reading of grade ``n`` (all grades if None) as a phase-space polynomial."""
        out = Poly()
        for (k, mono), c in self.terms.items():
            if n is not None and k != n:
                continue
            term = c
            for i in mono:
                term = term * Poly.gen(f"q{i}")
            out = out + term
        return out

    def words(self) -> list:
        """(ih power, word) pairs whose normal-ordered sum is this operator."""
        out = []
        for (n, mono), c in sorted(self.terms.items(), key=lambda kv: (kv[0][0], kv[0][1])):
            out.append((n, (c, *mono) if self.ordering == "left" else (*mono, c)))
        return out

    def to_str(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for (n, mono), c in sorted(self.terms.items(), key=lambda kv: (kv[0][0], len(kv[0][1]), kv[0][1])):
            qs = "*".join(f"q{i}" for i in mono)
            cs = c.to_str()
            if not qs:
                body = cs
            elif c == Poly.const(1):
                body = qs
            elif self.ordering == "left":
                body = f"({cs})*{qs}"
            else:
                body = f"{qs}*({cs})"
            parts.append(body if n == 0 else f"(ih)^{n}*[{body}]")
        return " + ".join(parts)

    def __repr__(self):
        return f"NormalOp[{self.ordering}]({self.to_str()})"

    def to_dict(self) -> dict:
        out: dict = {}
        for n in self.grades():
            g = self.grade(n)
            out[str(n)] = g.to_str()
        return out


class QuantumModel:
    """Deformed algebra with polynomial f and S and a fixed operator ordering."""

    def __init__(self, d: int, f: Poly, S: Mapping | None = None, ordering: str = "left"):
        if ordering not in ORDERINGS:
            raise ValueError(f"ordering must be one of {ORDERINGS}")
        self.d = d
        self.f = f
        self.ordering = ordering
        allowed = {_p(i) for i in range(1, d + 1)}
        self.S: dict = {}
        for (i, j), v in (S or {}).items():
            if not (1 <= i < j <= d):
                raise ValueError(f"S entry ({i},{j}) outside the upper triangle")
            if not v.is_zero():
                self.S[(i, j)] = v
        for P in [f, *self.S.values()]:
            extra = P.gens() - allowed
            if extra:
                raise NonPolynomialError(f"coefficients must be polynomials in the momenta, found {sorted(extra)}")
        self.g = [f.diff(_p(i)) for i in range(1, d + 1)]

    # construction ---------------------------------------------------------
    @classmethod
    def from_model(cls, m, ordering: str = "left") -> "QuantumModel":
        """Quantum counterpart of a classical model; needs polynomial f and L.

        The q-linear part of L must be -g_j q_i + g_i q_j with g = grad f;
        only S is read from L.
        """
        params = m.params
        f = _poly.from_expr(m.f, params)
        allowed = {_p(i) for i in range(1, m.d + 1)}
        if f.gens() - allowed:
            raise NonPolynomialError(f"f must be a polynomial in the momenta: '{to_str(m.f)}'")
        qz = {f"q{k}": 0 for k in range(1, m.d + 1)}
        S = {}
        qm = cls(m.d, f, {}, ordering)
        for (i, j), e in m.L.items():
            Lp = _poly.from_expr(e, params)
            S[(i, j)] = Lp.subs(qz)
            lin = Lp - S[(i, j)] + qm.g[j - 1] * Poly.gen(f"q{i}") - qm.g[i - 1] * Poly.gen(f"q{j}")
            if not lin.is_zero():
                raise ValueError(f"L_{i}{j} is not S_{i}{j}(p) - g_{j} q{i} + g_{i} q{j} with g = grad f")
        return cls(m.d, f, S, ordering)

    def S_entry(self, i: int, j: int) -> Poly:
        if i < j:
            return self.S.get((i, j), Poly())
        if i > j:
            return -self.S.get((j, i), Poly())
        return Poly()

    def with_ordering(self, ordering: str) -> "QuantumModel":
        return QuantumModel(self.d, self.f, self.S, ordering)

    def zero(self) -> NormalOp:
        return NormalOp({}, self.ordering, self.d)

    def coeff(self, c) -> NormalOp:
        if isinstance(c, Expr):
            c = _poly.from_expr(c)
        if not isinstance(c, Poly):
            c = Poly.const(Fraction(c))
        return self.normalize([c])

    def gen(self, name: str) -> NormalOp:
        """Operator for a generator name such as ``"q2"`` or ``"p1"``."""
        kind, idx = name[0], int(name[1:])
        if kind not in "qp" or not 1 <= idx <= self.d:
            raise ValueError(f"unknown generator {name!r}")
        if kind == "q":
            return NormalOp({(0, (idx,)): Poly.const(1)}, self.ordering, self.d)
        return NormalOp({(0, ()): Poly.gen(name)}, self.ordering, self.d)

    def L_op(self, i: int, j: int) -> NormalOp:
        """L_ij as an operator in this model's ordering."""
        terms = {}
        if not self.S_entry(i, j).is_zero():
            terms[(0, ())] = self.S_entry(i, j)
        if i != j:
            terms[(0, (i,))] = -self.g[j - 1]
            terms[(0, (j,))] = self.g[i - 1]
        return NormalOp(terms, self.ordering, self.d)

    # rewriting ------------------------------------------------------------
    def _factor(self, x):
        if isinstance(x, int):
            if not 1 <= x <= self.d:
                raise ValueError(f"q index {x} outside 1..{self.d}")
            return x
        if isinstance(x, Poly):
            extra = x.gens() - {_p(i) for i in range(1, self.d + 1)}
            if extra:
                raise NonPolynomialError(f"coefficient depends on {sorted(extra)}")
            return x
        if isinstance(x, str):
            if x[0] == "q":
                return self._factor(int(x[1:]))
            return self._factor(Poly.gen(x))
        if isinstance(x, Expr):
            return self._factor(_poly.from_expr(x))
        if isinstance(x, (Fraction, float)) or type(x) is int:
            return Poly.const(Fraction(x))
        raise TypeError(f"cannot use {x!r} as an operator factor")

    @staticmethod
    def _clean(scalar: Fraction, word: tuple):
        """Merge adjacent coefficients and pull constants out as a scalar."""
        out = []
        for x in word:
            if isinstance(x, Poly):
                if x.is_constant():
                    scalar = scalar * x.constant()
                    continue
                if out and isinstance(out[-1], Poly):
                    out[-1] = out[-1] * x
                    continue
            out.append(x)
        return scalar, tuple(out)

    def _redexes(self, word: tuple) -> list[int]:
        pos = []
        left = self.ordering == "left"
        for i in range(len(word) - 1):
            a, b = word[i], word[i + 1]
            if isinstance(a, int) and isinstance(b, int):
                if a > b:
                    pos.append(i)
            elif left and isinstance(a, int) and isinstance(b, Poly):
                pos.append(i)
            elif not left and isinstance(a, Poly) and isinstance(b, int):
                pos.append(i)
        return pos

    def _rewrite(self, word: tuple, i: int):
        """One reduction at position i; yields (ih increment, sign, new word)."""
        a, b = word[i], word[i + 1]
        pre, post = word[:i], word[i + 2:]
        left = self.ordering == "left"
        if isinstance(a, int) and isinstance(b, int):
            j, k = a, b  # q_j q_k with j > k
            yield 0, 1, pre + (k, j) + post
            s = self.S_entry(j, k)
            if not s.is_zero():
                yield 1, 1, pre + (s,) + post
            gj, gk = self.g[j - 1], self.g[k - 1]
            if not gj.is_zero():
                yield 1, 1, pre + ((gj, k) if left else (k, gj)) + post
            if not gk.is_zero():
                yield 1, -1, pre + ((gk, j) if left else (j, gk)) + post
            return
        if left:
            k, c = a, b
            yield 0, 1, pre + (c, k) + post
            dc = c.diff(_p(k))
            if not dc.is_zero():
                yield 1, 1, pre + (self.f * dc,) + post
        else:
            c, k = a, b
            yield 0, 1, pre + (k, c) + post
            dc = c.diff(_p(k))
            if not dc.is_zero():
                yield 1, -1, pre + (self.f * dc,) + post

    def normalize(self, raw, strategy: str = "leftmost", seed: int | None = None) -> NormalOp:
        """Normal form of a word (sequence of factors) or of a NormalOp.

        Factors are q indices (int), names ("q1", "p2"), momentum polynomials
        (:class:`Poly` or :class:`Expr`) or rational scalars.
        """
        if strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")
        if isinstance(raw, NormalOp):
            if raw.ordering != self.ordering or raw.d != self.d:
                raise ModelMismatch("operator belongs to another model")
            items = [(n, w) for n, w in raw.words()]
        else:
            items = [(0, tuple(self._factor(x) for x in raw))]
        rng = random.Random(seed)
        pending: dict = {}
        for n, w in items:
            s, w = self._clean(Fraction(1), w)
            pending[(n, w)] = pending.get((n, w), 0) + s
        result: dict = {}
        while pending:
            (n, word), scalar = pending.popitem()
            if scalar == 0:
                continue
            pos = self._redexes(word)
            if not pos:
                self._emit(result, n, word, scalar)
                continue
            if strategy == "leftmost":
                i = pos[0]
            elif strategy == "rightmost":
                i = pos[-1]
            else:
                i = rng.choice(pos)
            for dn, sign, w in self._rewrite(word, i):
                s, w = self._clean(scalar * sign, w)
                key = (n + dn, w)
                pending[key] = pending.get(key, 0) + s
        return NormalOp(result, self.ordering, self.d)

    @staticmethod
    def _emit(result: dict, n: int, word: tuple, scalar: Fraction):
        coeff = Poly.const(scalar)
        mono = []
        for x in word:
            if isinstance(x, Poly):
                coeff = coeff * x
            else:
                mono.append(x)
        key = (n, tuple(mono))
        result[key] = result[key] + coeff if key in result else coeff

    # algebra --------------------------------------------------------------
    def mul(self, A: NormalOp, B: NormalOp) -> NormalOp:
        for X in (A, B):
            if X.ordering != self.ordering or X.d != self.d:
                raise ModelMismatch("operator belongs to another model")
        out = self.zero()
        for na, wa in A.words():
            for nb, wb in B.words():
                prod = self.normalize(wa + wb)
                if na + nb:
                    prod = NormalOp({(n + na + nb, m): c for (n, m), c in prod.terms.items()},
                                    self.ordering, self.d)
                out = out + prod
        return out

    def commutator(self, A: NormalOp, B: NormalOp) -> NormalOp:
        return self.mul(A, B) - self.mul(B, A)

    def as_op(self, x) -> NormalOp:
        if isinstance(x, NormalOp):
            return x
        if isinstance(x, str):
            return self.gen(x)
        return self.normalize(x if isinstance(x, (list, tuple)) else [x])

    def jacobi(self, A, B, C) -> NormalOp:
        A, B, C = (self.as_op(x) for x in (A, B, C))
        cm = self.commutator
        return cm(A, cm(B, C)) + cm(B, cm(C, A)) + cm(C, cm(A, B))

    # classical side -------------------------------------------------------
    def L_poly(self, i: int, j: int) -> Poly:
        return self.S_entry(i, j) - self.g[j - 1] * Poly.gen(f"q{i}") + self.g[i - 1] * Poly.gen(f"q{j}")

    def poisson(self, F: Poly, G: Poly) -> Poly:
        """Commutative deformed bracket of two phase-space polynomials."""
        d = self.d
        out = Poly()
        for i in range(1, d + 1):
            Fq, Gq = F.diff(f"q{i}"), G.diff(f"q{i}")
            Fp, Gp = F.diff(_p(i)), G.diff(_p(i))
            out = out + self.f * (Fq * Gp - Fp * Gq)
            if Fq.is_zero():
                continue
            for j in range(1, d + 1):
                if j != i:
                    Gqj = G.diff(f"q{j}")
                    if not Gqj.is_zero():
                        out = out + Fq * self.L_poly(i, j) * Gqj
        return out

    def classical_jacobi(self, a: str, b: str, c: str) -> Poly:
        A, B, C = (Poly.gen(x) for x in (a, b, c))
        br = self.poisson
        return br(A, br(B, C)) + br(B, br(C, A)) + br(C, br(A, B))


def generators(d: int) -> list[str]:
    return [f"q{i}" for i in range(1, d + 1)] + [f"p{i}" for i in range(1, d + 1)]


def triples(d: int, which: str = "all") -> list[tuple]:
    names = [f"q{i}" for i in range(1, d + 1)] if which == "q-only" else generators(d)
    if which not in ("all", "q-only"):
        raise ValueError("triples must be 'all' or 'q-only'")
    return list(combinations(names, 3))


# module-level API ---------------------------------------------------------


def normalize(m: QuantumModel, raw, strategy: str = "leftmost", seed: int | None = None) -> NormalOp:
    return m.normalize(raw, strategy, seed)


def commutator(m: QuantumModel, A: NormalOp, B: NormalOp) -> NormalOp:
    return m.commutator(A, B)


def quantum_jacobi_residual(m: QuantumModel, triple: Sequence) -> NormalOp:
    """[A,[B,C]] + [B,[C,A]] + [C,[A,B]] in normal form."""
    return m.jacobi(*triple)


CLASSICAL_GRADE = 2  # a double commutator carries (ih)^2 times the nested Poisson bracket


def jacobi_report(m: QuantumModel, which: str = "all") -> dict:
    """Per-triple graded residuals plus the classical comparison."""
    rows = []
    for t in triples(m.d, which):
        r = quantum_jacobi_residual(m, t)
        classical = m.classical_jacobi(*t)
        rows.append({
            "triple": list(t),
            "zero": r.is_zero(),
            "grades": r.to_dict(),
            "classical_defect": classical.to_str(),
            "classical_grade_matches": r.as_poly(CLASSICAL_GRADE) == classical,
        })
    return {"ordering": m.ordering, "triples": rows, "pass": all(r["zero"] for r in rows)}


def reverse_word(word: Iterable) -> tuple:
    return tuple(reversed(tuple(word)))
