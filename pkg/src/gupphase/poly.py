"""Sparse commutative polynomials with exact rational coefficients.

Generators are identified by name (``"q1"``, ``"p2"``, ``"beta"``, ...), so
polynomials over different generator sets mix freely.  A monomial is a
sorted tuple of ``(name, exponent)`` pairs.
"""

from __future__ import annotations

import math
import re
from fractions import Fraction
from typing import Iterable, Mapping

from .expr import (Add, Const, Div, Expr, Func, Mul, Neg, Pow, Sub, Sym, Var,
                   simplify)

_VAR = re.compile(r"([qp])(\d+)$")


class NonPolynomialError(ValueError):
    pass


def _gen_key(name: str):
    m = _VAR.match(name)
    if m:
        return (0 if m.group(1) == "q" else 1, int(m.group(2)), "")
    return (2, 0, name)


def _mono_mul(a: tuple, b: tuple) -> tuple:
    if not a:
        return b
    if not b:
        return a
    d = dict(a)
    for g, e in b:
        d[g] = d.get(g, 0) + e
    return tuple(sorted(d.items(), key=lambda kv: _gen_key(kv[0])))


class Poly:
    __slots__ = ("terms", "_hash")

    def __init__(self, terms: Mapping[tuple, Fraction] | None = None):
        self.terms = {m: Fraction(c) for m, c in (terms or {}).items() if c != 0}
        self._hash = None

    # construction -------------------------------------------------------
    @classmethod
    def const(cls, c) -> "Poly":
        return cls({(): Fraction(c)})

    @classmethod
    def gen(cls, name: str, power: int = 1) -> "Poly":
        return cls({((name, power),): Fraction(1)} if power else {(): Fraction(1)})

    # arithmetic ---------------------------------------------------------
    def __add__(self, other) -> "Poly":
        other = _as_poly(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, 0) + c
        return Poly(out)

    __radd__ = __add__

    def __neg__(self) -> "Poly":
        return Poly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other) -> "Poly":
        return self + (-_as_poly(other))

    def __rsub__(self, other) -> "Poly":
        return _as_poly(other) - self

    def __mul__(self, other) -> "Poly":
        other = _as_poly(other)
        out: dict = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = _mono_mul(m1, m2)
                out[m] = out.get(m, 0) + c1 * c2
        return Poly(out)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "Poly":
        if n < 0:
            raise NonPolynomialError("negative power of a polynomial")
        out = Poly.const(1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            other = Poly.const(other)
        if not isinstance(other, Poly):
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self.terms.items()))
        return self._hash

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __repr__(self):
        return f"Poly({self.to_str()})"

    # queries ------------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(m == () for m in self.terms)

    def constant(self) -> Fraction:
        return self.terms.get((), Fraction(0))

    def gens(self) -> set[str]:
        return {g for m in self.terms for g, _ in m}

    def degree(self, name: str | None = None) -> int:
        if not self.terms:
            return -1
        if name is None:
            return max(sum(e for _, e in m) for m in self.terms)
        return max(dict(m).get(name, 0) for m in self.terms)

    def diff(self, name: str) -> "Poly":
        out: dict = {}
        for m, c in self.terms.items():
            d = dict(m)
            e = d.get(name, 0)
            if e == 0:
                continue
            if e == 1:
                del d[name]
            else:
                d[name] = e - 1
            key = tuple(sorted(d.items(), key=lambda kv: _gen_key(kv[0])))
            out[key] = out.get(key, 0) + c * e
        return Poly(out)

    def subs(self, values: Mapping[str, "Poly | Fraction | int"]) -> "Poly":
        out = Poly()
        for m, c in self.terms.items():
            term = Poly.const(c)
            rest = []
            for g, e in m:
                if g in values:
                    term = term * (_as_poly(values[g]) ** e)
                else:
                    rest.append((g, e))
            out = out + term * Poly({tuple(rest): 1})
        return out

    def evaluate(self, values: Mapping[str, float]) -> float:
        total = 0.0
        for m, c in self.terms.items():
            v = float(c)
            for g, e in m:
                v *= values[g] ** e
            total += v
        return total

    def coeff_in(self, name: str) -> dict[int, "Poly"]:
        """Coefficients with respect to one generator: {power: Poly in the rest}."""
        out: dict[int, dict] = {}
        for m, c in self.terms.items():
            d = dict(m)
            e = d.pop(name, 0)
            key = tuple(sorted(d.items(), key=lambda kv: _gen_key(kv[0])))
            out.setdefault(e, {})[key] = c
        return {e: Poly(t) for e, t in out.items()}

    # conversion ---------------------------------------------------------
    def sorted_terms(self):
        def key(item):
            m, _ = item
            return (sum(e for _, e in m), [(_gen_key(g), e) for g, e in m])
        return sorted(self.terms.items(), key=key)

    def to_expr(self) -> Expr:
        out: Expr | None = None
        for m, c in self.sorted_terms():
            factors: list[Expr] = []
            for g, e in m:
                mm = _VAR.match(g)
                base = Var(mm.group(1), int(mm.group(2))) if mm else Sym(g)
                factors.append(base if e == 1 else Pow(base, e))
            term: Expr = Const(c)
            for f in factors:
                term = Mul(term, f)
            out = term if out is None else Add(out, term)
        return simplify(out if out is not None else Const(0))

    def to_str(self) -> str:
        from .expr import to_str
        return to_str(self.to_expr())


def _as_poly(x) -> Poly:
    if isinstance(x, Poly):
        return x
    if isinstance(x, (int, Fraction)):
        return Poly.const(x)
    raise TypeError(f"cannot convert {type(x).__name__} to Poly")


def exact_rational(v) -> Fraction:
    """Exact rational for a parameter value; floats go through their repr."""
    if isinstance(v, Fraction):
        return v
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, float):
        return Fraction(repr(v))
    return Fraction(str(v))


def from_expr(e: Expr, params: Mapping | None = None, symbolic: Iterable[str] | None = None) -> Poly:
    """Convert an expression to a polynomial.

    Symbols found in ``params`` become exact rational constants; the rest
    are kept as generators (or rejected if ``symbolic`` is given and does
    not list them).  Raises :class:`NonPolynomialError` for ``sqrt``/``exp``
    of non-constant arguments, negative powers, and division by a
    non-constant.
    """
    params = {k: exact_rational(v) for k, v in (params or {}).items()}
    allowed = None if symbolic is None else set(symbolic)

    def conv(n: Expr) -> Poly:
        if isinstance(n, Const):
            return Poly.const(n.value)
        if isinstance(n, Var):
            return Poly.gen(f"{n.kind}{n.index}")
        if isinstance(n, Sym):
            if n.name in params:
                return Poly.const(params[n.name])
            if allowed is not None and n.name not in allowed:
                raise NonPolynomialError(f"unbound symbol {n.name!r}")
            return Poly.gen(n.name)
        if isinstance(n, Neg):
            return -conv(n.arg)
        if isinstance(n, Add):
            return conv(n.left) + conv(n.right)
        if isinstance(n, Sub):
            return conv(n.left) - conv(n.right)
        if isinstance(n, Mul):
            return conv(n.left) * conv(n.right)
        if isinstance(n, Div):
            den = conv(n.right)
            if not den.is_constant() or den.is_zero():
                raise NonPolynomialError("division by a non-constant")
            return conv(n.left) * Poly.const(1 / den.constant())
        if isinstance(n, Pow):
            base = conv(n.base)
            if n.exp < 0:
                if base.is_constant() and not base.is_zero():
                    return Poly.const(base.constant() ** n.exp)
                raise NonPolynomialError("negative power")
            return base ** n.exp
        if isinstance(n, Func):
            arg = conv(n.arg)
            if arg.is_constant():
                s = simplify(Func(n.name, Const(arg.constant())))
                if isinstance(s, Const):
                    return Poly.const(s.value)
            raise NonPolynomialError(f"{n.name} is not polynomial")
        raise TypeError(f"not an expression: {n!r}")

    return conv(e)


def is_polynomial(e: Expr, params: Mapping | None = None) -> bool:
    try:
        from_expr(e, params)
    except NonPolynomialError:
        return False
    return True


def exact_quotient(num: Poly, den: Poly, var: str) -> Poly | None:
    """``num / den`` when it is a polynomial, else ``None``.

    Division proceeds from the lowest power of ``var`` upward, so ``den``
    must have a rational constant as its lowest-order coefficient in
    ``var`` (true for every f with f(0) != 0).
    """
    if den.is_zero():
        raise ZeroDivisionError("polynomial division by zero")
    dcoef = den.coeff_in(var)
    dmin = min(dcoef)
    lead = dcoef[dmin]
    if not lead.is_constant():
        return None
    c0 = lead.constant()
    bound = num.degree(var) - den.degree(var)
    quot = Poly()
    rem = num
    while not rem.is_zero():
        rcoef = rem.coeff_in(var)
        k = min(rcoef)
        shift = k - dmin
        if shift < 0 or shift > bound:
            return None
        term = rcoef[k] * Poly.const(1 / c0) * Poly.gen(var, shift)
        quot = quot + term
        rem = rem - term * den
    return quot


def univariate_sqrt(P: Poly, var: str) -> Poly | None:
    """Exact square root of a polynomial in one variable, if it exists.

    The root is normalised to have a nonnegative constant term.
    """
    if P.is_zero():
        return Poly()
    if P.gens() - {var}:
        return None
    n = P.degree(var)
    if n % 2:
        return None
    m = n // 2
    coeffs = {dict(mono).get(var, 0): c for mono, c in P.terms.items()}
    top = coeffs[n]
    if top < 0:
        return None
    rn, rd = math.isqrt(top.numerator), math.isqrt(top.denominator)
    if rn * rn != top.numerator or rd * rd != top.denominator:
        return None
    s_top = Fraction(rn, rd)
    S = Poly.const(s_top) * Poly.gen(var, m)
    for _ in range(m + 1):
        rem = P - S * S
        if rem.is_zero():
            break
        k = rem.degree(var)
        if k < m:
            return None
        lead = rem.coeff_in(var)[k].constant()
        S = S + Poly.const(lead / (2 * s_top)) * Poly.gen(var, k - m)
    if not (P - S * S).is_zero():
        return None
    if S.constant() < 0:
        S = -S
    return S
