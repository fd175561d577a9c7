import math

import numpy as np
import pytest

from gupphase.angular import build_scheme
from gupphase.closure import closure_check
from gupphase.dynamics import (DomainExitError, conservation_report, csv_text,
                               hamiltonian_vector_field, integrate, liouville_residual)
from gupphase.expr import Var, evaluate, parse
from gupphase.structure import GupModel, bracket

from corpus import S_ONLY, conforming, corrupted, kmm

KMM2, KMM3 = kmm(2), kmm(3)
FREE3 = parse("(p1^2 + p2^2 + p3^2)/2")
OSC3 = parse("(p1^2 + p2^2 + p3^2)/2 + (q1^2 + q2^2 + q3^2)/2")
QUARTIC3 = parse("(p1^2 + p2^2 + p3^2)^2/4 + (q1^2 + q2^2 + q3^2)^2/4")
X0 = [0.3, -0.2, 0.1, 0.2, 0.1, -0.3]


def _osc(d):
    return parse(" + ".join(f"p{i}^2/2 + q{i}^2/2" for i in range(1, d + 1)))


# ----------------------------------------------------------------- vector field


def test_vector_field_examples():
    und = GupModel(1, parse("1"))
    assert np.allclose(hamiltonian_vector_field(und, parse("p1^2/2"), [0.4, 0.7]), [0.7, 0.0])
    x = np.array(X0)
    v = hamiltonian_vector_field(KMM3, FREE3, x)
    f = 1 + 0.1 * np.sum(x[3:] ** 2)
    assert np.allclose(v[:3], f * x[3:], atol=1e-15) and np.all(v[3:] == 0)
    y = [0.5, -0.4, 0.3, 0.2]
    v = hamiltonian_vector_field(KMM2, parse("q1"), y)
    pt = KMM2.point(y)
    assert v[2] == pytest.approx(-evaluate(KMM2.f, pt), abs=1e-15)
    assert v[1] == pytest.approx(evaluate(KMM2.L_entry(2, 1), pt), abs=1e-15)


# ----------------------------------------------------------------- trajectories


def test_oscillator_returns_after_one_period():
    m = GupModel(1, parse("1"))
    tr = integrate(m, parse("(p1^2 + q1^2)/2"), [1.0, 0.0], 2 * math.pi, 2 * math.pi / 6283)
    assert np.max(np.abs(tr.x[-1] - tr.x[0])) <= 1e-6


def test_free_particle_on_kmm3d():
    tr = integrate(KMM3, FREE3, X0, 10.0, 1e-3)
    assert len(tr) == 10_001
    assert np.max(np.abs(tr.p - tr.p[0])) == 0.0
    p0 = np.array(X0[3:])
    slope = (1 + 0.1 * p0 @ p0) * p0
    assert np.allclose(tr.q, tr.q[0] + tr.t[:, None] * slope, atol=1e-11)
    assert conservation_report(tr, KMM3, FREE3)["energy_drift"] <= 1e-8


def test_energy_drift_is_fourth_order():
    drifts = []
    for dt in (0.04, 0.02, 0.01):
        tr = integrate(KMM3, QUARTIC3, X0, 4.0, dt)
        drifts.append(conservation_report(tr, KMM3, QUARTIC3)["energy_drift"])
    exps = [math.log2(drifts[i] / drifts[i + 1]) for i in range(2)]
    slope = np.polyfit(np.log([0.04, 0.02, 0.01]), np.log(drifts), 1)[0]
    assert abs(slope - 4) <= 0.3, (drifts, exps)


def test_rotation_invariant_flow_conserves_J():
    scheme, model = build_scheme(parse("-2*beta*(1 + beta*rho^2)", ("beta", "rho")),
                                 parse("1 + beta*rho^2", ("beta", "rho")), params={"beta": 0.1})
    tr = integrate(model, OSC3, X0, 10.0, 1e-3)
    rep = conservation_report(tr, model, OSC3, scheme)
    assert rep["J_drift"] <= 1e-7 and rep["energy_drift"] <= 1e-8
    broken = integrate(model, parse("p1 + (q1^2+q2^2+q3^2)/2"), X0, 2.0, 1e-3)
    assert conservation_report(broken, model, parse("p1"), scheme)["J_drift"] > 1e-3


@pytest.mark.parametrize("F", ["q1", "p1", "q1*p2"])
def test_time_derivative_matches_bracket(F):
    F = parse(F)
    H = _osc(2) + parse("q1*q2*p1")
    errs = []
    for dt in (0.02, 0.01):
        tr = integrate(KMM2, H, [0.4, -0.3, 0.2, 0.1], 0.5, dt)
        vals = np.array([evaluate(F, KMM2.point(x)) for x in tr.x])
        n = len(tr) // 2
        deriv = (vals[n + 1] - vals[n - 1]) / (2 * dt)
        errs.append(abs(deriv - bracket(KMM2, F, H, tr.x[n])))
    assert errs[1] <= 1e-5
    assert errs[0] / errs[1] >= 3.0     # second order: ratio ~4


def test_undeformed_limit_rate():
    und = GupModel(3, parse("1"))
    ref = integrate(und, OSC3, X0, 5.0, 1e-3).x
    betas = [1e-2, 1e-3, 1e-4]
    errs = [np.max(np.abs(integrate(kmm(3).replace(params={"beta": b}), OSC3, X0, 5.0, 1e-3).x - ref))
            for b in betas]
    slope = np.polyfit(np.log(betas), np.log(errs), 1)[0]
    assert abs(slope - 1.0) <= 0.2


def test_rk45_agrees_with_rk4():
    a = integrate(KMM3, OSC3, X0, 2.0, 1e-2, "rk4")
    b = integrate(KMM3, OSC3, X0, 2.0, 1e-2, "rk45")
    assert b.method == "rk45" and len(a) == len(b)
    assert np.max(np.abs(a.x - b.x)) <= 1e-7


def test_domain_exit():
    m = GupModel(1, parse("1 - p1"))
    # p1' = -f dH/dq1 = 1 reaches f = 0 at t = 1
    H = parse("-q1/(1 - p1)")
    with pytest.raises(DomainExitError) as err:
        integrate(m, H, [0.0, 0.0], 5.0, 1e-2)
    assert err.value.trajectory is not None and err.value.trajectory.t[-1] < 1.0
    with pytest.raises(DomainExitError):
        integrate(m, H, [0.0, 0.0], 5.0, 1e-2, "rk45")
    with pytest.raises(ValueError):
        integrate(m, parse("q1"), [0.0, 0.0], 1.0, 0.0)


# ----------------------------------------------------------------- Liouville


def test_liouville_examples():
    assert liouville_residual(GupModel(2, parse("1")), parse("q1^3*p2 + p1^2*q2")) == 0.0
    assert liouville_residual(KMM2, parse("(p1^2 + p2^2)/2 + q1^2")) <= 1e-10


@pytest.mark.parametrize("m", conforming(), ids=lambda m: m.name)
def test_liouville_holds_on_conforming_models(m):
    H = _osc(m.d) + parse("q1*p1^3")
    assert liouville_residual(m, H, m.domain.sample(100)) <= 1e-9


@pytest.mark.parametrize("m", conforming() + corrupted(), ids=lambda m: m.name)
def test_liouville_iff_closure(m):
    H = _osc(m.d) + parse("q1*p1^3")
    ok = liouville_residual(m, H, m.domain.sample(100)) <= 1e-9
    if m.name in S_ONLY:
        # the f^-d density only sees the gradient system, so S-only defects keep it
        assert ok and not closure_check(m).passed
    else:
        assert ok == closure_check(m).passed


# ----------------------------------------------------------------- CSV


def test_csv_output():
    tr = integrate(KMM3, FREE3, X0, 0.05, 1e-3)
    text = csv_text(tr, KMM3, FREE3)
    lines = text.splitlines()
    assert lines[0] == "t,q1,q2,q3,p1,p2,p3,H"
    rows = np.array([[float(v) for v in l.split(",")] for l in lines[1:]])
    assert rows.shape == (51, 8)
    assert np.max(np.abs(rows[:, 4:7] - rows[0, 4:7])) <= 1e-14
    scheme, model = build_scheme(parse("-1"), parse("sqrt(1 + rho^2)", ("rho",)))
    tr = integrate(model, OSC3, X0, 0.01, 1e-3)
    assert csv_text(tr, model, OSC3, scheme).splitlines()[0].endswith(",H,J1,J2,J3")
