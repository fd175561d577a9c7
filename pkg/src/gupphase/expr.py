"""Small expression language for phase-space functions.

Expressions are immutable trees built from exact rational constants, named
parameters, the phase-space variables ``q<i>``/``p<i>`` (1-based), the unary
operations ``-``, ``sqrt`` and ``exp``, the binary arithmetic operations and
integer powers.  Grammar (EBNF)::

    expr    = term { ("+" | "-") term } ;
    term    = unary { ("*" | "/") unary } ;
    unary   = "-" unary | power ;
    power   = atom [ "^" [ "-" ] integer ] ;
    atom    = number | ident | ident "(" expr ")" | "(" expr ")" ;
    number  = digit { digit } [ "." digit { digit } ] ;
    ident   = lower { lower | digit } ;

Identifiers of the form ``q<n>``/``p<n>`` are variables; ``sqrt`` and ``exp``
are the only functions.  Decimal literals become exact fractions.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Union

__all__ = [
    "Expr", "Const", "Sym", "Var", "Neg", "Add", "Sub", "Mul", "Div", "Pow", "Func",
    "PhasePoint", "ParseError", "EvalError",
    "parse", "to_str", "evaluate", "diff", "substitute", "simplify",
    "const", "q", "p", "sym", "free_symbols", "variables", "max_index",
    "depends_on_q", "radial_to_momenta",
]

FUNCTIONS = ("sqrt", "exp")


class ParseError(ValueError):
    """Syntax or symbol error, with the byte offset where it was detected."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class EvalError(ArithmeticError):
    """Evaluation failure (domain error or unbound symbol)."""

    def __init__(self, message: str, subexpr: "Expr | None" = None):
        if subexpr is not None:
            message = f"{message} in '{to_str(subexpr)}'"
        super().__init__(message)
        self.subexpr = subexpr


class Expr:
    __slots__ = ()

    # operator sugar so tests and library code can build trees directly
    def __add__(self, other):
        return Add(self, _wrap(other))

    def __radd__(self, other):
        return Add(_wrap(other), self)

    def __sub__(self, other):
        return Sub(self, _wrap(other))

    def __rsub__(self, other):
        return Sub(_wrap(other), self)

    def __mul__(self, other):
        return Mul(self, _wrap(other))

    def __rmul__(self, other):
        return Mul(_wrap(other), self)

    def __truediv__(self, other):
        return Div(self, _wrap(other))

    def __rtruediv__(self, other):
        return Div(_wrap(other), self)

    def __neg__(self):
        return Neg(self)

    def __pow__(self, n: int):
        if not isinstance(n, int):
            raise TypeError("only integer exponents are supported")
        return Pow(self, n)

    def __str__(self):
        return to_str(self)


@dataclass(frozen=True, repr=False)
class Const(Expr):
    value: Fraction

    def __post_init__(self):
        object.__setattr__(self, "value", Fraction(self.value))

    def __repr__(self):
        return f"Const({self.value})"


@dataclass(frozen=True, repr=False)
class Sym(Expr):
    name: str

    def __repr__(self):
        return f"Sym({self.name})"


@dataclass(frozen=True, repr=False)
class Var(Expr):
    kind: str  # "q" or "p"
    index: int

    def __repr__(self):
        return f"{self.kind}{self.index}"


@dataclass(frozen=True, repr=False)
class Neg(Expr):
    arg: Expr

    def __repr__(self):
        return f"Neg({self.arg!r})"


@dataclass(frozen=True, repr=False)
class _Binary(Expr):
    left: Expr
    right: Expr

    def __repr__(self):
        return f"{type(self).__name__}({self.left!r}, {self.right!r})"


class Add(_Binary):
    pass


class Sub(_Binary):
    pass


class Mul(_Binary):
    pass


class Div(_Binary):
    pass


@dataclass(frozen=True, repr=False)
class Pow(Expr):
    base: Expr
    exp: int

    def __repr__(self):
        return f"Pow({self.base!r}, {self.exp})"


@dataclass(frozen=True, repr=False)
class Func(Expr):
    name: str
    arg: Expr

    def __repr__(self):
        return f"{self.name}({self.arg!r})"


ZERO = Const(0)
ONE = Const(1)

Number = Union[int, Fraction]


def _wrap(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, Fraction)):
        return Const(x)
    if isinstance(x, float):
        return Const(Fraction(str(x)))
    raise TypeError(f"cannot use {type(x).__name__} in an expression")


def const(v) -> Const:
    return Const(Fraction(v) if not isinstance(v, float) else Fraction(str(v)))


def q(i: int) -> Var:
    return Var("q", i)


def p(i: int) -> Var:
    return Var("p", i)


def sym(name: str) -> Sym:
    return Sym(name)


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(r"\s*(?:(\d+(?:\.\d+)?)|([a-z][a-z0-9]*)|(.))")
_VARNAME = re.compile(r"([qp])(\d+)$")


class _Parser:
    def __init__(self, text: str, params: "frozenset[str] | None"):
        self.text = text
        self.params = params
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if m is None:
                break
            start = m.start(m.lastindex)
            if m.group(1) is not None:
                self.tokens.append(("num", m.group(1), start))
            elif m.group(2) is not None:
                self.tokens.append(("id", m.group(2), start))
            else:
                ch = m.group(3)
                if ch not in "+-*/^()":
                    raise ParseError(f"unexpected character {ch!r}", start)
                self.tokens.append(("op", ch, start))
            pos = m.end()
        self.tokens.append(("end", "", len(text)))
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, off = self.take()
        if val != value or kind != "op":
            raise ParseError(f"expected {value!r}", off)

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, off = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {val!r}", off)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            e = Add(e, rhs) if op == "+" else Sub(e, rhs)
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            e = Mul(e, rhs) if op == "*" else Div(e, rhs)
        return e

    def unary(self) -> Expr:
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            sign = 1
            if self.peek()[:2] == ("op", "-"):
                self.take()
                sign = -1
            kind, val, off = self.take()
            if kind != "num" or "." in val:
                raise ParseError("exponent must be an integer literal", off)
            if self.peek()[:2] == ("op", "^"):
                raise ParseError("chained exponents need parentheses", self.peek()[2])
            return Pow(base, sign * int(val))
        return base

    def atom(self) -> Expr:
        kind, val, off = self.take()
        if kind == "num":
            return Const(Fraction(val))
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "id":
            if self.peek()[:2] == ("op", "("):
                if val not in FUNCTIONS:
                    raise ParseError(f"unknown function {val!r}", off)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Func(val, arg)
            if val in FUNCTIONS:
                raise ParseError(f"function {val!r} needs an argument", off)
            m = _VARNAME.match(val)
            if m:
                idx = int(m.group(2))
                if idx < 1:
                    raise ParseError("variable indices are 1-based", off)
                return Var(m.group(1), idx)
            if self.params is not None and val not in self.params:
                raise ParseError(f"unknown symbol {val!r}", off)
            return Sym(val)
        if kind == "end":
            raise ParseError("unexpected end of input", off)
        raise ParseError(f"unexpected token {val!r}", off)


def parse(text: str, params: "Iterable[str] | None" = ()) -> Expr:
    """Parse ``text`` into an expression tree.

    Identifiers other than variables must be listed in ``params``; pass
    ``params=None`` to accept any identifier as a parameter.
    """
    allowed = None if params is None else frozenset(params)
    return _Parser(text, allowed).parse()


# ---------------------------------------------------------------------------
# printing

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4}


def _prec(e: Expr) -> int:
    if isinstance(e, Const):
        if e.value.denominator != 1:
            return 2
        return 3 if e.value < 0 else 5
    return _PREC.get(type(e), 5)


def _fmt_const(v: Fraction) -> str:
    if v.denominator == 1:
        return str(v.numerator)
    return f"{v.numerator}/{v.denominator}"


def to_str(e: Expr) -> str:
    """Print ``e`` in the input grammar; ``parse(to_str(e))`` rebuilds the tree."""
    if isinstance(e, Const):
        return _fmt_const(e.value)
    if isinstance(e, Sym):
        return e.name
    if isinstance(e, Var):
        return f"{e.kind}{e.index}"
    if isinstance(e, Func):
        return f"{e.name}({to_str(e.arg)})"
    if isinstance(e, Neg):
        inner = to_str(e.arg)
        if _prec(e.arg) < 3:
            inner = f"({inner})"
        return "-" + inner
    if isinstance(e, Pow):
        base = to_str(e.base)
        if _prec(e.base) <= 4:
            base = f"({base})"
        return f"{base}^{e.exp}"
    op = {Add: " + ", Sub: " - ", Mul: "*", Div: "/"}[type(e)]
    prec = _PREC[type(e)]
    lhs = to_str(e.left)
    if _prec(e.left) < prec:
        lhs = f"({lhs})"
    rhs = to_str(e.right)
    if _prec(e.right) <= prec:
        rhs = f"({rhs})"
    return lhs + op + rhs


# ---------------------------------------------------------------------------
# evaluation


@dataclass(frozen=True)
class PhasePoint:
    """A point (q_1..q_d, p_1..p_d) of phase space plus parameter values.

    ``d = 0`` is allowed for expressions in parameters only, such as a(rho).
    """

    d: int
    q: tuple
    p: tuple
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "q", tuple(float(v) for v in self.q))
        object.__setattr__(self, "p", tuple(float(v) for v in self.p))
        if self.d < 0 or len(self.q) != self.d or len(self.p) != self.d:
            raise ValueError(f"phase point needs {self.d} q and p coordinates")

    @classmethod
    def from_array(cls, x, params=None) -> "PhasePoint":
        n = len(x) // 2
        return cls(n, tuple(x[:n]), tuple(x[n:]), dict(params or {}))

    def as_tuple(self) -> tuple:
        return self.q + self.p


def _eval(e: Expr, x: PhasePoint) -> float:
    if isinstance(e, Const):
        return float(e.value)
    if isinstance(e, Var):
        if e.index > x.d:
            raise EvalError(f"variable {e!r} out of range for d={x.d}", e)
        return (x.q if e.kind == "q" else x.p)[e.index - 1]
    if isinstance(e, Sym):
        try:
            return float(x.params[e.name])
        except KeyError:
            raise EvalError(f"unbound symbol {e.name!r}", e) from None
    if isinstance(e, Neg):
        return -_eval(e.arg, x)
    if isinstance(e, Add):
        return _eval(e.left, x) + _eval(e.right, x)
    if isinstance(e, Sub):
        return _eval(e.left, x) - _eval(e.right, x)
    if isinstance(e, Mul):
        return _eval(e.left, x) * _eval(e.right, x)
    if isinstance(e, Div):
        den = _eval(e.right, x)
        if den == 0.0:
            raise EvalError("division by zero", e)
        return _eval(e.left, x) / den
    if isinstance(e, Pow):
        b = _eval(e.base, x)
        if b == 0.0 and e.exp < 0:
            raise EvalError("division by zero", e)
        try:
            return b ** e.exp
        except OverflowError:
            raise EvalError("overflow", e) from None
    if isinstance(e, Func):
        v = _eval(e.arg, x)
        if e.name == "sqrt":
            if v < 0.0:
                raise EvalError("sqrt of negative value", e)
            return math.sqrt(v)
        try:
            return math.exp(v)
        except OverflowError:
            raise EvalError("overflow", e) from None
    raise TypeError(f"not an expression: {e!r}")


def evaluate(e: Expr, x: PhasePoint) -> float:
    """IEEE double value of ``e`` at ``x``; raises :class:`EvalError`."""
    return _eval(e, x)


# ---------------------------------------------------------------------------
# structural queries


def _children(e: Expr):
    if isinstance(e, (Neg, Func)):
        return (e.arg,)
    if isinstance(e, _Binary):
        return (e.left, e.right)
    if isinstance(e, Pow):
        return (e.base,)
    return ()


def _walk(e: Expr):
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(_children(node))


def free_symbols(e: Expr) -> set[str]:
    return {n.name for n in _walk(e) if isinstance(n, Sym)}


def variables(e: Expr) -> set[Var]:
    return {n for n in _walk(e) if isinstance(n, Var)}


def max_index(e: Expr) -> int:
    return max((v.index for v in variables(e)), default=0)


def depends_on_q(e: Expr) -> bool:
    return any(v.kind == "q" for v in variables(e))


# ---------------------------------------------------------------------------
# differentiation


def _d(e: Expr, v) -> Expr:
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e == v else ZERO
    if isinstance(e, Sym):
        return ONE if e == v else ZERO
    if isinstance(e, Neg):
        return _neg(_d(e.arg, v))
    if isinstance(e, Add):
        return _add(_d(e.left, v), _d(e.right, v))
    if isinstance(e, Sub):
        return _sub(_d(e.left, v), _d(e.right, v))
    if isinstance(e, Mul):
        return _add(_mul(_d(e.left, v), e.right), _mul(e.left, _d(e.right, v)))
    if isinstance(e, Div):
        du, dw = _d(e.left, v), _d(e.right, v)
        if dw == ZERO:
            return _div(du, e.right)
        num = _sub(_mul(du, e.right), _mul(e.left, dw))
        return _div(num, _pow(e.right, 2))
    if isinstance(e, Pow):
        db = _d(e.base, v)
        if db == ZERO or e.exp == 0:
            return ZERO
        return _mul(_mul(Const(e.exp), _pow(e.base, e.exp - 1)), db)
    if isinstance(e, Func):
        da = _d(e.arg, v)
        if da == ZERO:
            return ZERO
        if e.name == "sqrt":
            return _div(da, _mul(Const(2), e))
        return _mul(e, da)
    raise TypeError(f"not an expression: {e!r}")


def diff(e: Expr, v: "Var | Sym | str") -> Expr:
    """Exact derivative of ``e`` with respect to a variable (or a symbol)."""
    if isinstance(v, str):
        m = _VARNAME.match(v)
        v = Var(m.group(1), int(m.group(2))) if m else Sym(v)
    return simplify(_d(e, v))


# ---------------------------------------------------------------------------
# smart constructors: fold constants and 0/1 identities only


def _neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def _add(a: Expr, b: Expr) -> Expr:
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    return Add(a, b)


def _sub(a: Expr, b: Expr) -> Expr:
    if b == ZERO:
        return a
    if a == ZERO:
        return _neg(b)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    return Sub(a, b)


def _mul(a: Expr, b: Expr) -> Expr:
    if a == ZERO or b == ZERO:
        return ZERO
    if a == ONE:
        return b
    if b == ONE:
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    return Mul(a, b)


def _div(a: Expr, b: Expr) -> Expr:
    if a == ZERO:
        return ZERO
    if b == ONE:
        return a
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0:
        return Const(a.value / b.value)
    return Div(a, b)


def _pow(a: Expr, n: int) -> Expr:
    if n == 0:
        return ONE
    if n == 1:
        return a
    if isinstance(a, Const) and not (a.value == 0 and n < 0):
        return Const(a.value ** n)
    return Pow(a, n)


# ---------------------------------------------------------------------------
# simplification


def _exact_sqrt(v: Fraction):
    if v < 0:
        return None
    rn, rd = math.isqrt(v.numerator), math.isqrt(v.denominator)
    if rn * rn == v.numerator and rd * rd == v.denominator:
        return Fraction(rn, rd)
    return None


def _sum_terms(e: Expr, sign: int, out: list):
    if isinstance(e, Add):
        _sum_terms(e.left, sign, out)
        _sum_terms(e.right, sign, out)
    elif isinstance(e, Sub):
        _sum_terms(e.left, sign, out)
        _sum_terms(e.right, -sign, out)
    elif isinstance(e, Neg):
        _sum_terms(e.arg, -sign, out)
    else:
        out.append((sign, e))


def _product_factors(e: Expr, num: list, den: list, coef: list):
    if isinstance(e, Mul):
        _product_factors(e.left, num, den, coef)
        _product_factors(e.right, num, den, coef)
    elif isinstance(e, Div):
        _product_factors(e.left, num, den, coef)
        _product_factors(e.right, den, num, coef)
    elif isinstance(e, Neg):
        coef[0] = -coef[0]
        _product_factors(e.arg, num, den, coef)
    else:
        num.append(e)


def _strip_leading_const(e: Expr):
    """(c, rest) for a left-associated product chain starting with a constant."""
    if isinstance(e, Const):
        return e.value, None
    if isinstance(e, Mul):
        c, rest = _strip_leading_const(e.left)
        if rest is None and c != 1:
            return c, e.right
        if c != 1:
            return c, Mul(rest, e.right)
    return Fraction(1), e


def _split_coefficient(e: Expr) -> tuple[Fraction, Expr | None]:
    """Split a simplified term into (rational coefficient, rest)."""
    if isinstance(e, Const):
        return e.value, None
    if isinstance(e, Neg):
        c, rest = _split_coefficient(e.arg)
        return -c, rest
    if isinstance(e, Mul):
        return _strip_leading_const(e)
    if isinstance(e, Div):
        c, rest = _split_coefficient(e.left)
        if c != 1:
            return c, Div(rest if rest is not None else ONE, e.right)
    return Fraction(1), e


def _prepend_const(c: Fraction, rest: Expr) -> Expr:
    if isinstance(rest, Mul):
        return Mul(_prepend_const(c, rest.left), rest.right)
    return Mul(Const(c), rest)


def _scaled(c: Fraction, rest: "Expr | None") -> Expr:
    if rest is None:
        return Const(c)
    if c == 1:
        return rest
    if c == -1:
        return _negate_product(rest)
    if isinstance(rest, Div) and rest.left == ONE:
        return Div(Const(c), rest.right)
    if isinstance(rest, Div):
        return Div(_scaled(c, rest.left), rest.right)
    return _prepend_const(c, rest)


def _negate_product(rest: Expr) -> Expr:
    if isinstance(rest, Const):
        return Const(-rest.value)
    if isinstance(rest, Div):
        return Div(_negate_product(rest.left), rest.right)
    return Neg(rest)


def _rebuild_product(factors: list) -> "Expr | None":
    if not factors:
        return None
    out = factors[0]
    for f in factors[1:]:
        out = Mul(out, f)
    return out


def _simplify_product(e: Expr) -> Expr:
    num: list = []
    den: list = []
    coef = [Fraction(1)]
    _product_factors(e, num, den, coef)
    c = coef[0]
    num_s, den_s = [], []
    for f in num:
        f = simplify(f)
        fc, frest = _split_coefficient(f)
        c *= fc
        if frest is not None:
            num_s.append(frest)
    for f in den:
        f = simplify(f)
        fc, frest = _split_coefficient(f)
        if fc == 0:
            # division by an exact zero: keep it visible for eval to report
            return Div(_scaled(c, _rebuild_product(num_s)), f)
        c /= fc
        if frest is not None:
            den_s.append(frest)
    if c == 0:
        return ZERO
    top = _rebuild_product(num_s)
    if den_s:
        bottom = _rebuild_product(den_s)
        top_expr = ONE if top is None else top
        return _scaled(c, Div(top_expr, bottom))
    return _scaled(c, top)


def _simplify_sum(e: Expr) -> Expr:
    raw: list = []
    _sum_terms(e, 1, raw)
    constant = Fraction(0)
    terms: list[tuple[int, Expr]] = []
    for sign, t in raw:
        t = simplify(t)
        c, rest = _split_coefficient(t)
        if rest is None:
            constant += sign * c
            continue
        if c == 0:
            continue
        if isinstance(rest, (Add, Sub)) and abs(c) == 1:
            # flatten nested sums; a scaled sum stays a single term
            sub: list = []
            _sum_terms(rest, sign * (1 if c > 0 else -1), sub)
            for s2, t2 in sub:
                c2, r2 = _split_coefficient(t2)
                if r2 is None:
                    constant += s2 * abs(c) * c2
                else:
                    terms.append((s2, _scaled(abs(c) * c2, r2)))
            continue
        s = sign if c > 0 else -sign
        terms.append((s, _scaled(abs(c), rest)))
    norm: list[tuple[int, Expr]] = []
    for s, t in terms:
        c, rest = _split_coefficient(t)
        if c < 0:
            s, t = -s, _scaled(-c, rest)
        norm.append((s, t))
    if constant != 0:
        norm.append((1 if constant > 0 else -1, Const(abs(constant))))
    if not norm:
        return ZERO
    s0, t0 = norm[0]
    out = t0 if s0 > 0 else _negate_term(t0)
    for s, t in norm[1:]:
        out = Add(out, t) if s > 0 else Sub(out, t)
    return out


def _negate_term(t: Expr) -> Expr:
    c, rest = _split_coefficient(t)
    return _scaled(-c, rest)


def simplify(e: Expr) -> Expr:
    """Conservative normalisation: constant folding, 0/1 identities, flattening.

    Sums and products are flattened into left-associated chains with rational
    coefficients collected; no other algebraic rewriting is attempted.
    """
    if isinstance(e, (Const, Sym, Var)):
        return e
    if isinstance(e, (Add, Sub)):
        return _simplify_sum(e)
    if isinstance(e, (Mul, Div, Neg)):
        return _simplify_product(e)
    if isinstance(e, Pow):
        base = simplify(e.base)
        n = e.exp
        if isinstance(base, Pow):
            base, n = base.base, base.exp * n
        if n == 0:
            return ONE
        if n == 1:
            return base
        if isinstance(base, Const):
            if base.value == 0 and n < 0:
                return Pow(base, n)
            return Const(base.value ** n)
        c, rest = _split_coefficient(base)
        if c != 1 and rest is not None:
            return _scaled(c ** n, Pow(rest, n)) if n > 0 else Pow(base, n)
        return Pow(base, n)
    if isinstance(e, Func):
        arg = simplify(e.arg)
        if isinstance(arg, Const):
            if e.name == "sqrt":
                r = _exact_sqrt(arg.value)
                if r is not None:
                    return Const(r)
            elif arg.value == 0:
                return ONE
        return Func(e.name, arg)
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# substitution


def _key(s) -> Expr:
    if isinstance(s, Expr):
        return s
    m = _VARNAME.match(s)
    return Var(m.group(1), int(m.group(2))) if m else Sym(s)


def _subst(e: Expr, table: dict) -> Expr:
    hit = table.get(e) if isinstance(e, (Sym, Var)) else None
    if hit is not None:
        return hit
    if isinstance(e, (Const, Sym, Var)):
        return e
    if isinstance(e, Neg):
        a = _subst(e.arg, table)
        return e if a is e.arg else Neg(a)
    if isinstance(e, Func):
        a = _subst(e.arg, table)
        return e if a is e.arg else Func(e.name, a)
    if isinstance(e, Pow):
        b = _subst(e.base, table)
        return e if b is e.base else Pow(b, e.exp)
    lhs, rhs = _subst(e.left, table), _subst(e.right, table)
    if lhs is e.left and rhs is e.right:
        return e
    return type(e)(lhs, rhs)


def substitute(e: Expr, bindings: Mapping) -> Expr:
    """Simultaneous substitution of symbols/variables; untouched nodes are kept."""
    if not bindings:
        return e
    table = {_key(k): _wrap(v) for k, v in bindings.items()}
    return _subst(e, table)


def radial_to_momenta(e: Expr, d: int, name: str = "rho") -> Expr:
    """Replace the radial symbol by |p|; even powers become powers of p.p.

    Keeping even powers free of ``sqrt`` leaves functions such as
    ``1 + beta*rho^2`` smooth (and polynomial) at p = 0.
    """
    rho2 = None
    for i in range(1, d + 1):
        t = Pow(Var("p", i), 2)
        rho2 = t if rho2 is None else Add(rho2, t)
    target = Sym(name)

    def walk(n: Expr) -> Expr:
        if n == target:
            return Func("sqrt", rho2)
        if isinstance(n, Pow) and n.base == target and n.exp % 2 == 0:
            return rho2 if n.exp == 2 else Pow(rho2, n.exp // 2)
        if isinstance(n, (Const, Sym, Var)):
            return n
        if isinstance(n, Neg):
            return Neg(walk(n.arg))
        if isinstance(n, Func):
            return Func(n.name, walk(n.arg))
        if isinstance(n, Pow):
            return Pow(walk(n.base), n.exp)
        return type(n)(walk(n.left), walk(n.right))

    return walk(e)
