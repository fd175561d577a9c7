import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gupphase.angular import (SchemeError, build_scheme, check_angular_algebra, f_system_exprs,
                              levi_civita, p_dot_J, p_dot_J_residual, qpb_system_exprs,
                              rotation_invariance_residual, s_system_determinant,
                              s_system_singular, system_residual)
from gupphase.closure import closure_check, gradient_residual
from gupphase.expr import Const, evaluate, parse, simplify
from gupphase.poly import from_expr
from gupphase.structure import Box

from corpus import kmm

R = ("rho",)
B = ("beta", "rho")


def _kmm_scheme(beta="1/10"):
    return build_scheme(parse("-2*beta*(1 + beta*rho^2)", B), parse("1 + beta*rho^2", B),
                        params={"beta": from_expr(parse(beta)).constant()})


def _maggiore():
    return build_scheme(parse("-1"), parse("sqrt(1 + rho^2)", R))


def _points(n=200, seed=20240917):
    return Box.uniform(3).sample(n, seed)


def test_levi_civita():
    assert levi_civita(1, 2, 3) == 1 and levi_civita(2, 1, 3) == -1 and levi_civita(1, 1, 3) == 0


def test_kmm_scheme_reproduces_the_kmm_algebra():
    scheme, model = _kmm_scheme()
    direct = kmm(3)
    for (i, j) in ((1, 2), (1, 3), (2, 3)):
        assert from_expr(model.L_entry(i, j), model.params) == from_expr(direct.L_entry(i, j), direct.params)
    for x in _points(50):
        for (i, j) in ((1, 2), (1, 3), (2, 3)):
            a = evaluate(model.L_entry(i, j), model.point(x))
            b = evaluate(direct.L_entry(i, j), direct.point(x))
            assert abs(a - b) <= 1e-12


def test_trivial_scheme_is_orbital_angular_momentum():
    scheme, model = build_scheme(Const(0), Const(1))
    assert model.L == {}
    assert simplify(scheme.J[2]) == simplify(parse("p2*q1 - p1*q2"))


def test_scheme_rejects_angular_dependence():
    with pytest.raises(SchemeError):
        build_scheme(parse("p1"), Const(1))
    with pytest.raises(SchemeError):
        build_scheme(Const(0), Const(1), [parse("q1"), Const(0), Const(0)])


@pytest.mark.parametrize("make", [_kmm_scheme, _maggiore, lambda: build_scheme(Const(0), Const(1))],
                         ids=["kmm", "maggiore", "trivial"])
def test_algebra_closes(make):
    scheme, model = make()
    assert closure_check(model).passed
    rep = check_angular_algebra(scheme, _points())
    assert rep.passed
    assert set(rep.residuals) == {"Jq", "Jp", "JJ"}
    assert max(rep.residuals.values()) <= 1e-9
    assert p_dot_J_residual(scheme, _points()) <= 1e-12


@pytest.mark.parametrize("s", [["1", "0", "0"], ["0", "0", "p1"]])
def test_nonzero_s_breaks_the_JJ_family(s):
    scheme, _ = build_scheme(parse("-1"), parse("sqrt(1 + rho^2)", R), [parse(t) for t in s])
    rep = check_angular_algebra(scheme, _points())
    assert not rep.passed and rep.residuals["JJ"] > 1e-3


def test_p_dot_J_examples():
    scheme, _ = build_scheme(parse("-1"), parse("sqrt(1 + rho^2)", R), [Const(0), Const(0), Const(1)])
    x = [0.1, 0.2, 0.3, 0.2, -0.1, 0.4]
    assert p_dot_J(scheme, x) == pytest.approx(0.4, abs=1e-15)
    kmm_scheme, _ = _kmm_scheme()
    assert p_dot_J(kmm_scheme, [0.3, 0.1, -0.2, 0, 0, 0]) == 0.0


@given(st.lists(st.floats(-1, 1), min_size=6, max_size=6))
def test_p_dot_J_vanishes_for_s_zero(x):
    for scheme in (_kmm_scheme()[0], _maggiore()[0]):
        assert abs(p_dot_J(scheme, x)) <= 1e-12


def test_s_system_determinant():
    scheme, _ = _kmm_scheme()
    x = [0, 0, 0, 0.5, 0, 0]
    f, a = 1.025, -0.2 * 1.025
    assert s_system_determinant(scheme, x) == pytest.approx((f * f + a * 0.25) / f ** 2, abs=1e-12)
    assert s_system_determinant(scheme, x) == pytest.approx(0.9512195, abs=1e-6)
    trivial, _ = build_scheme(Const(0), parse("1 + rho^2", R))
    assert s_system_determinant(trivial, x) == 1.0
    # a = -f^2/rho^2 makes the system singular everywhere it is defined
    sing, _ = build_scheme(parse("-(1 + rho^2)^2/rho^2", R), parse("1 + rho^2", R))
    assert s_system_singular(sing, [0, 0, 0, 0.3, 0.2, 0.1])
    assert not s_system_singular(scheme, x)


def test_gradient_system_equals_f_system():
    for scheme, model in (_kmm_scheme(), _maggiore()):
        X = _points(100)
        assert system_residual(scheme, f_system_exprs(scheme), X) <= 1e-10
        assert gradient_residual(model, X) <= 1e-10


def test_qpb_system_vanishes_for_s_zero():
    for scheme, _ in (_kmm_scheme(), _maggiore()):
        assert system_residual(scheme, qpb_system_exprs(scheme), _points()) <= 1e-12
    bad, _ = build_scheme(parse("-1"), parse("sqrt(1 + rho^2)", R), [Const(1), Const(0), Const(0)])
    assert system_residual(bad, qpb_system_exprs(bad), _points()) > 1e-3


def test_rotation_invariance():
    scheme, _ = _kmm_scheme()
    X = _points(100)
    assert rotation_invariance_residual(scheme, parse("(p1^2+p2^2+p3^2)/2"), X) <= 1e-9
    assert rotation_invariance_residual(scheme, parse("(q1^2+q2^2+q3^2)*(p1^2+p2^2+p3^2)"), X) <= 1e-9
    assert rotation_invariance_residual(scheme, parse("(q1*p1+q2*p2+q3*p3)^2 + q1^2+q2^2+q3^2"), X) <= 1e-9
    assert rotation_invariance_residual(scheme, parse("p1"), X) > 1e-3
