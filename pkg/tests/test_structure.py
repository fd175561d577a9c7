import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gupphase.expr import Var, evaluate, parse
from gupphase.structure import (Box, DegeneratePointError, GupModel, ModelError, bracket,
                                bracket_expr, nondegeneracy_report, poisson_matrix,
                                symplectic_matrix)

from corpus import conforming, kmm, planar

KMM2 = kmm(2)
KMM3 = kmm(3)


def test_undeformed_matrices():
    m = GupModel(1, parse("1"))
    assert np.array_equal(poisson_matrix(m, [0.3, 0.2]), [[0, 1], [-1, 0]])
    assert np.array_equal(symplectic_matrix(m, [0.3, 0.2]), [[0, -1], [1, 0]])


def test_kmm2d_entries():
    P = poisson_matrix(KMM2, [1, 0, 0.5, 0.5])
    assert math.isclose(P[0, 1], -0.1, abs_tol=1e-15)
    assert math.isclose(P[0, 2], 1.05, abs_tol=1e-15)
    assert math.isclose(bracket(KMM2, Var("q", 1), Var("p", 1), [1, 0, 0.5, 0.5]), 1.05, abs_tol=1e-12)
    assert math.isclose(bracket(KMM2, Var("q", 1), Var("q", 2), [1, 0, 0.5, 0.5]), -0.1, abs_tol=1e-12)


@pytest.mark.parametrize("m", [KMM2, KMM3, planar(1), conforming()[7]], ids=lambda m: m.name)
def test_matrix_identities(m):
    for x in m.domain.sample(100, 3):
        P = poisson_matrix(m, x)
        W = symplectic_matrix(m, x)
        f = evaluate(m.f, m.point(x))
        assert np.max(np.abs(P + P.T)) <= 1e-12
        assert np.max(np.abs(W + W.T)) <= 1e-12
        assert np.max(np.abs(P @ W - np.eye(2 * m.d))) <= 1e-10
        assert abs(np.linalg.det(W) - f ** (-2 * m.d)) <= 1e-9 * f ** (-2 * m.d)
        assert abs(np.linalg.det(P) - f ** (2 * m.d)) <= 1e-9 * f ** (2 * m.d)


def test_degenerate_point_reported():
    m = GupModel(1, parse("p1"))
    with pytest.raises(DegeneratePointError, match="f = 0"):
        symplectic_matrix(m, [0.1, 0.0])


@pytest.mark.parametrize("m", [KMM3, planar(2)], ids=lambda m: m.name)
def test_fundamental_brackets(m):
    d = m.d
    for x in m.domain.sample(20, 4):
        pt = m.point(x)
        for i in range(1, d + 1):
            for j in range(1, d + 1):
                qq = bracket(m, Var("q", i), Var("q", j), x)
                assert abs(qq - evaluate(m.L_entry(i, j), pt)) <= 1e-10
                qp = bracket(m, Var("q", i), Var("p", j), x)
                assert abs(qp - (evaluate(m.f, pt) if i == j else 0.0)) <= 1e-10
                assert bracket(m, Var("p", i), Var("p", j), x) == 0.0


polys = st.lists(st.tuples(st.integers(-3, 3), st.sampled_from(["q1", "q2", "q3", "p1", "p2", "p3"]),
                           st.sampled_from(["q1", "q2", "q3", "p1", "p2", "p3"]), st.integers(0, 2)),
                 min_size=1, max_size=4).map(
    lambda ts: parse(" + ".join(f"({c})*{a}*{b}^{n}" for c, a, b, n in ts)))


@given(polys, polys, polys)
def test_bracket_is_antisymmetric_and_leibniz(F, G, H):
    for x in KMM3.domain.sample(3, 9):
        assert abs(bracket(KMM3, F, F, x)) <= 1e-12
        fg = bracket(KMM3, F, G, x)
        assert abs(fg + bracket(KMM3, G, F, x)) <= 1e-12 * (1 + abs(fg))
        pt = KMM3.point(x)
        lhs = bracket(KMM3, F * G, H, x)
        rhs = evaluate(F, pt) * bracket(KMM3, G, H, x) + evaluate(G, pt) * bracket(KMM3, F, H, x)
        assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(lhs))


@given(polys, polys)
def test_symbolic_bracket_matches_numeric(F, G):
    e = bracket_expr(KMM3, F, G)
    for x in KMM3.domain.sample(3, 2):
        num = bracket(KMM3, F, G, x)
        assert abs(evaluate(e, KMM3.point(x)) - num) <= 1e-10 * (1 + abs(num))


def test_nondegeneracy_examples():
    assert nondegeneracy_report(KMM3, Box.uniform(3, p=(-3, 3)), 500).passed
    # kappa = 2: f = 1 - rho^2 is positive on the ball rho^2 < 1
    m = GupModel(2, parse("1 - (p1^2 + p2^2)"), {(1, 2): parse("2*(q1*p2 - q2*p1)")})
    inside = nondegeneracy_report(m, Box.uniform(2, p=(-0.7, 0.7)), 500)
    assert inside.passed and any("ball" in n for n in inside.notes)
    assert not nondegeneracy_report(m, Box.uniform(2, p=(-2, 2)), 500).passed
    assert not nondegeneracy_report(GupModel(1, parse("p1")), None, 200).passed


def test_model_validation():
    with pytest.raises(ModelError):
        GupModel(2, parse("1"), {(2, 1): parse("q1")})
    with pytest.raises(ModelError):
        GupModel(2, parse("1 + p3"))
    with pytest.raises(ModelError):
        GupModel(2, parse("1 + beta*p1", ("beta",)))
    with pytest.raises(ModelError):
        GupModel(1, parse("p1")).validate()
    pt = KMM3.point([1, 2, 3, 4, 5, 6])
    assert evaluate(KMM3.L_entry(2, 1), pt) == -evaluate(KMM3.L_entry(1, 2), pt)
    assert KMM3.L_entry(2, 2) == parse("0")


def test_box_sampling_is_seeded_and_inside():
    b = Box.uniform(3)
    X = b.sample(50, 1)
    assert np.array_equal(X, b.sample(50, 1))
    assert all(b.contains(x) for x in X)
    assert not np.array_equal(X, b.sample(50, 2))
