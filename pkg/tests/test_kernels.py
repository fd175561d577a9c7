import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gupphase import _pykernels, kernels
from gupphase.expr import EvalError, parse
from gupphase.kernels import CompiledExprs

from test_expr import exprs

compiled = pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled extension not built")
PARAMS = {"beta": 0.1}


def _both(es, d=3):
    from gupphase import _ckernels
    return (CompiledExprs(es, d, PARAMS, impl=_pykernels), CompiledExprs(es, d, PARAMS, impl=_ckernels))


@compiled
@given(st.lists(exprs, min_size=1, max_size=4))
def test_backends_agree(es):
    py, cy = _both(es)
    X = np.random.default_rng(0).uniform(-1, 1, size=(16, 6))
    a = py.batch(X, check=False)
    b = cy.batch(X, check=False)
    assert np.array_equal(np.isfinite(a), np.isfinite(b))
    ok = np.isfinite(a)
    assert np.allclose(a[ok], b[ok], rtol=1e-12, atol=1e-12)


@compiled
def test_backends_agree_on_rk4():
    es = [parse(t) for t in ("p1", "p2", "-q1", "-q2", "1 + p1^2")]
    py, cy = _both(es, d=2)
    x0 = np.array([1.0, 0.0, 0.0, 0.5])
    ta, na = kernels.rk4(py, x0, 1e-2, 200, 4, 1e-6)
    tb, nb = kernels.rk4(cy, x0, 1e-2, 200, 4, 1e-6)
    assert na == nb == 200
    assert np.allclose(ta, tb, rtol=0, atol=1e-13)


def test_rk4_guard_stops_early():
    # p1' = 1 drives the guard f = 1 - p1 to zero at t = 1
    es = [parse("0"), parse("1"), parse("1 - p1")]
    prog = CompiledExprs(es, 1)
    traj, done = kernels.rk4(prog, np.array([0.0, 0.0]), 0.1, 100, 2, 1e-6)
    assert done < 100
    assert 1 - traj[-1][1] > 1e-6


def test_nonfinite_values_raise_with_a_message():
    prog = CompiledExprs([parse("1/(p1 - 0.5)")], 1)
    with pytest.raises(EvalError):
        prog(np.array([0.0, 0.5]))
    out = prog.batch(np.array([[0.0, 0.5]]), check=False)
    assert not np.isfinite(out).any()


def test_unbound_symbol_is_rejected_at_compile_time():
    with pytest.raises(EvalError):
        CompiledExprs([parse("kappa*p1", None)], 1)


def test_env_var_forces_the_fallback():
    env = dict(os.environ, GUPPHASE_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import gupphase.kernels as k; print(k.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "python"
