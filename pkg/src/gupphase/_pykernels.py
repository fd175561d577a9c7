"""Pure-Python implementation of the tape kernels.

Same interface as the compiled ``_ckernels`` module.  Each tape is turned
into a Python expression once and compiled with :func:`compile`; evaluation
failures (domain errors, overflow) come back as NaN, as in the C kernel.
"""

import math

import numpy as np

OP_CONST, OP_VAR, OP_ADD, OP_SUB, OP_MUL, OP_DIV, OP_NEG, OP_POW, OP_SQRT, OP_EXP = range(10)

_BINARY = {OP_ADD: "+", OP_SUB: "-", OP_MUL: "*", OP_DIV: "/"}


def _source(ops, args, consts, lo, hi):
    stack = []
    for k in range(lo, hi):
        op, a = ops[k], args[k]
        if op == OP_CONST:
            stack.append(f"({float(consts[a])!r})")
        elif op == OP_VAR:
            stack.append(f"x[{a}]")
        elif op in _BINARY:
            rhs = stack.pop()
            lhs = stack.pop()
            stack.append(f"({lhs} {_BINARY[op]} {rhs})")
        elif op == OP_NEG:
            stack.append(f"(-{stack.pop()})")
        elif op == OP_POW:
            stack.append(f"({stack.pop()} ** {int(a)})")
        elif op == OP_SQRT:
            stack.append(f"_sqrt({stack.pop()})")
        elif op == OP_EXP:
            stack.append(f"_exp({stack.pop()})")
        else:
            raise ValueError(f"bad opcode {op}")
    return stack[0]


class Program:
    """A set of expression tapes evaluated over a common variable vector."""

    def __init__(self, ops, args, consts, starts, nvar):
        self.ops = np.asarray(ops, dtype=np.int32)
        self.args = np.asarray(args, dtype=np.int64)
        self.consts = np.asarray(consts, dtype=np.float64)
        self.starts = np.asarray(starts, dtype=np.int64)
        self.nvar = int(nvar)
        self.ntapes = len(self.starts) - 1
        env = {"_sqrt": math.sqrt, "_exp": math.exp}
        self._single = []
        for t in range(self.ntapes):
            src = _source(self.ops, self.args, self.consts, self.starts[t], self.starts[t + 1])
            self._single.append(eval(compile(f"lambda x: {src}", "<tape>", "eval"), env))

    def _one(self, t, x):
        try:
            return float(self._single[t](x))
        except (ValueError, ZeroDivisionError, OverflowError):
            return math.nan

    def eval(self, x):
        xs = [float(v) for v in x]
        return np.array([self._one(t, xs) for t in range(self.ntapes)])

    def eval_batch(self, X):
        X = np.asarray(X, dtype=np.float64)
        out = np.empty((X.shape[0], self.ntapes))
        for i in range(X.shape[0]):
            xs = X[i].tolist()
            for t in range(self.ntapes):
                out[i, t] = self._one(t, xs)
        return out


def rk4(program, x0, dt, nsteps, guard_index=-1, guard_min=0.0):
    """Fixed-step RK4 on dx/dt = tapes[0:n](x), n = len(x0).

    Returns ``(trajectory, steps_done)``; integration stops early when the
    guard tape drops below ``guard_min`` or the state becomes non-finite.
    """
    dt = float(dt)
    n = len(x0)
    one = program._one
    traj = np.empty((nsteps + 1, n))
    x = [float(v) for v in x0]
    traj[0] = x
    if guard_index >= 0 and not one(guard_index, x) >= guard_min:
        return traj[:1], 0
    for step in range(nsteps):
        k1 = [one(t, x) for t in range(n)]
        y = [x[i] + 0.5 * dt * k1[i] for i in range(n)]
        k2 = [one(t, y) for t in range(n)]
        y = [x[i] + 0.5 * dt * k2[i] for i in range(n)]
        k3 = [one(t, y) for t in range(n)]
        y = [x[i] + dt * k3[i] for i in range(n)]
        k4 = [one(t, y) for t in range(n)]
        x = [x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) for i in range(n)]
        if not all(math.isfinite(v) for v in x):
            return traj[: step + 1], step
        if guard_index >= 0 and not one(guard_index, x) >= guard_min:
            return traj[: step + 1], step
        traj[step + 1] = x
    return traj, nsteps
