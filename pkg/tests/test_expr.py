from fractions import Fraction
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gupphase.expr import (Add, Const, Div, EvalError, Func, Mul, Neg, ParseError, PhasePoint,
                           Pow, Sub, Sym, Var, diff, evaluate, parse, simplify, substitute,
                           to_str)

D = 3

leaves = st.one_of(
    st.fractions(min_value=-5, max_value=5, max_denominator=7).map(Const),
    st.builds(Var, st.sampled_from(["q", "p"]), st.integers(1, D)),
    st.just(Sym("beta")),
)


def _extend(children):
    return st.one_of(
        st.builds(Neg, children),
        st.builds(Add, children, children),
        st.builds(Sub, children, children),
        st.builds(Mul, children, children),
        st.builds(Pow, children, st.integers(0, 3)),
        st.builds(Func, st.sampled_from(["exp"]), children),
    )


exprs = st.recursive(leaves, _extend, max_leaves=12)
# smooth, division-free, so derivatives are safe everywhere in the unit box
smooth = st.recursive(leaves, lambda c: st.one_of(st.builds(Add, c, c), st.builds(Sub, c, c),
                                                  st.builds(Mul, c, c), st.builds(Pow, c, st.integers(1, 3))),
                      max_leaves=10)

PARAMS = {"beta": 0.1}


def _pt(x):
    return PhasePoint.from_array(x, PARAMS)


def _points(n, seed=0):
    return np.random.default_rng(seed).uniform(-1, 1, size=(n, 2 * D))


# ----------------------------------------------------------------- parsing


def test_parse_precedence():
    assert parse("1+2*3^2") == parse("1 + (2*(3^2))")
    assert evaluate(parse("-2^2"), _pt(np.zeros(6))) == -4.0
    assert evaluate(parse("2*3/4"), _pt(np.zeros(6))) == 1.5
    assert evaluate(parse("1-2-3"), _pt(np.zeros(6))) == -4.0


def test_parse_decimal_is_exact_rational():
    e = parse("0.5")
    assert isinstance(e, Const) and e.value == Fraction(1, 2)


def test_parse_rejects_bad_input():
    for bad in ["", "1+", "q0", "p1^q1", "2^1.5", "foo(p1)", "(p1", "p1 p2", "beta"]:
        with pytest.raises(ParseError):
            parse(bad)


def test_parse_unknown_symbol_is_error_unless_declared():
    with pytest.raises(ParseError):
        parse("kappa*p1")
    assert parse("kappa*p1", ("kappa",)) == Mul(Sym("kappa"), Var("p", 1))
    assert parse("kappa*p1", None) == Mul(Sym("kappa"), Var("p", 1))


@given(exprs)
@settings(max_examples=200)
def test_round_trip_of_simplified_form(e):
    s = simplify(e)
    assert simplify(parse(to_str(s), None)) == s
    assert simplify(parse(to_str(e), None)) == s


@given(exprs)
def test_printed_form_evaluates_like_the_tree(e):
    x = _pt(_points(1, 3)[0])
    try:
        v = evaluate(e, x)
    except (EvalError, OverflowError):
        return
    w = evaluate(parse(to_str(e), None), x)
    assert math.isclose(v, w, rel_tol=1e-9, abs_tol=1e-9)


@given(exprs)
def test_simplify_preserves_value(e):
    x = _pt(_points(1, 5)[0])
    try:
        v = evaluate(e, x)
    except (EvalError, OverflowError):
        return
    assert math.isclose(v, evaluate(simplify(e), x), rel_tol=1e-9, abs_tol=1e-9)


# ----------------------------------------------------------------- diff


def test_diff_examples():
    assert to_str(simplify(diff(parse("1+beta*(p1^2+p2^2)", ("beta",)), Var("p", 1)))) == "2*beta*p1"
    assert simplify(diff(parse("q1*p2-q2*p1"), Var("q", 1))) == Var("p", 2)
    got = simplify(diff(parse("sqrt(1+p1^2)"), Var("p", 1)))
    want = parse("p1/sqrt(1+p1^2)")
    for x in _points(20, 1):
        assert math.isclose(evaluate(got, _pt(x)), evaluate(want, _pt(x)), rel_tol=1e-12)


def _fd(e, v, x, h=1e-5):
    k = (v.index - 1) if v.kind == "q" else D + v.index - 1
    xp, xm = x.copy(), x.copy()
    xp[k] += h
    xm[k] -= h
    return (evaluate(e, _pt(xp)) - evaluate(e, _pt(xm))) / (2 * h)


@given(smooth, st.sampled_from([Var(k, i) for k in "qp" for i in range(1, D + 1)]))
def test_diff_matches_central_difference(e, v):
    de = diff(e, v)
    for x in np.random.default_rng(11).uniform(0, 1, size=(100, 2 * D))[::10]:
        exact = evaluate(de, _pt(x))
        assert abs(exact - _fd(e, v, x)) <= 1e-6 * (1 + abs(exact))


def test_diff_matches_central_difference_on_100_points():
    e = parse("sqrt(1 + beta*(p1^2+p2^2+p3^2)) * exp(q1*p2) / (2 + q3^2) - p1^3*q2", ("beta",))
    for x in np.random.default_rng(7).uniform(0, 1, size=(100, 2 * D)):
        for v in (Var("q", 1), Var("q", 3), Var("p", 1), Var("p", 2)):
            exact = evaluate(diff(e, v), _pt(x))
            assert abs(exact - _fd(e, v, x)) <= 1e-6 * (1 + abs(exact))


@given(smooth, smooth, st.fractions(min_value=-3, max_value=3, max_denominator=5))
def test_diff_is_linear(e1, e2, a):
    v = Var("p", 1)
    lhs = diff(Add(Mul(Const(a), e1), e2), v)
    for x in _points(5, 2):
        pt = _pt(x)
        left = evaluate(lhs, pt)
        right = float(a) * evaluate(diff(e1, v), pt) + evaluate(diff(e2, v), pt)
        assert abs(left - right) <= 1e-12 * max(1.0, abs(left), abs(right))


def test_diff_by_symbol():
    e = parse("beta*p1^2 + beta^2", ("beta",))
    assert to_str(simplify(diff(e, "beta"))) == "p1^2 + 2*beta"


# ----------------------------------------------------------------- evaluation and substitution


def test_evaluate_errors():
    with pytest.raises(EvalError):
        evaluate(parse("1/(p1-p1)"), _pt(np.zeros(6)))
    with pytest.raises(EvalError):
        evaluate(parse("sqrt(p1-1)"), _pt(np.zeros(6)))
    with pytest.raises(EvalError):
        evaluate(parse("beta*p1", ("beta",)), PhasePoint.from_array(np.zeros(6)))


def test_substitute_examples():
    e = parse("kappa*l0", ("kappa", "l0"))
    assert to_str(substitute(e, {"kappa": parse("-2*beta", ("beta",))})) == "-2*beta*l0"
    assert substitute(e, {}) is e
    L12 = parse("-2*beta*(q1*p2 - q2*p1)", ("beta",))
    assert simplify(substitute(L12, {Var("q", 1): Const(0), Var("q", 2): Const(0)})) == Const(0)


def test_substitute_is_simultaneous():
    e = parse("q1 + 2*q2")
    out = substitute(e, {Var("q", 1): Var("q", 2), Var("q", 2): Var("q", 1)})
    assert out == parse("q2 + 2*q1")
