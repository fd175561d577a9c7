"""Compare the compiled kernels with the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--points 20000] [--steps 5000]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from gupphase import _pykernels, kernels
from gupphase.dynamics import vector_field_exprs
from gupphase.expr import parse
from gupphase.modelfile import load_model


def _time(fn, repeat: int = 3) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--points", type=int, default=20000)
    ap.add_argument("--steps", type=int, default=5000)
    args = ap.parse_args()

    m = load_model("kmm3d").model
    H = parse("(p1^2 + p2^2 + p3^2)/2 + (q1^2 + q2^2 + q3^2)/2")
    exprs = [*vector_field_exprs(m, H), m.f]
    X = m.domain.sample(args.points, 0)
    x0 = X[0]

    print(f"compiled backend available: {kernels.BACKEND == 'cython'}")
    rows = []
    for label, impl in (("python", _pykernels), ("cython", kernels._impl)):
        if label == "cython" and kernels.BACKEND != "cython":
            continue
        prog = kernels.CompiledExprs(exprs, m.d, m.params, impl=impl)
        t_batch = _time(lambda: prog.batch(X, check=False))
        steps = args.steps if label == "cython" else max(args.steps // 10, 1)
        t_rk4 = _time(lambda: kernels.rk4(prog, x0, 1e-3, steps, 2 * m.d, 1e-6), repeat=1)
        rows.append((label, t_batch, t_rk4 / steps))
        ref = prog.batch(X[:100], check=False)
        if label == "python":
            reference = ref
        else:
            print(f"max |cython - python| on 100 points: {np.max(np.abs(ref - reference)):.3g}")

    print(f"{'backend':8s} {'batch eval (s)':>15s} {'rk4 per step (us)':>18s}")
    for label, tb, ts in rows:
        print(f"{label:8s} {tb:15.4f} {ts * 1e6:18.2f}")
    if len(rows) == 2:
        print(f"speed-up: batch x{rows[0][1] / rows[1][1]:.1f}, rk4 x{rows[0][2] / rows[1][2]:.1f}")


if __name__ == "__main__":
    main()
