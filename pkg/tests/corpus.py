"""Shared model corpus: conforming models and deterministic corruptions."""

from fractions import Fraction

from gupphase.closure import corrupt
from gupphase.expr import parse
from gupphase.modelfile import BUNDLED, load_model
from gupphase.solver import Poly2D, solve_f_polynomial_2d
from gupphase.structure import GupModel


def kmm(d, beta="1/10", S=None):
    f = parse(f"1 + beta*({' + '.join(f'p{i}^2' for i in range(1, d + 1))})", ("beta",))
    L = {}
    for i in range(1, d + 1):
        for j in range(i + 1, d + 1):
            text = f"-2*beta*(q{i}*p{j} - q{j}*p{i})"
            if S is not None:
                text = f"{S} + {text}"
            L[(i, j)] = parse(text, ("beta",))
    tag = "" if S is None else "-S"
    return GupModel(d, f, L, {"beta": Fraction(beta)}, name=f"kmm{d}d-beta{beta}{tag}")


def planar(seed, degree=3, scale=3):
    l = Poly2D.random(degree, seed=seed, scale=scale)
    return GupModel(2, solve_f_polynomial_2d(l, 4), {(1, 2): l.to_expr()}, name=f"planar{seed}")


def conforming():
    out = [load_model(name).model for name in BUNDLED]
    out += [
        kmm(2, "1"),
        kmm(4),
        kmm(3, S="-(1 + beta*(p1^2 + p2^2 + p3^2))^2"),
        GupModel(1, parse("1 + q1^2/4 + p1^2"), {}, name="oned-q"),
        planar(0),
        planar(5),
    ]
    return out


# corruptions that leave the gradient system intact keep the f^-d density
S_ONLY = {"kmm3d-beta1/10+shift-S"}


def corrupted():
    k2, k3 = kmm(2), kmm(3)
    rnd = load_model("polynomial-random").model
    out = [
        corrupt(k2, "scale-g", 1),
        corrupt(k3, "scale-g", 1),
        corrupt(k3, "scale-g", 3),
        corrupt(k3, "shift-S"),
        corrupt(k2, "q-in-f", 2),
        corrupt(k3, "q-in-f", 1),
        corrupt(k2, "scale-f", 1),
        corrupt(k3, "scale-f", 2),
        corrupt(rnd, "scale-f", 1),
        GupModel(2, parse("1"), {(1, 2): parse("q1")}, name="f1-L12-q1"),
        GupModel(2, parse("1 + p1"), {}, name="L0-f-1+p1"),
        GupModel(3, k3.f, {**k3.L, (1, 2): parse("p1*q1^2")}, k3.params, name="quadratic-L"),
    ]
    return out
