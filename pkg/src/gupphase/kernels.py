"""Batch evaluation of expressions through flat postfix tapes.

The hot loops (evaluating many expressions at many points, fixed-step RK4)
run in the compiled ``_ckernels`` extension when it is importable and fall
back to ``_pykernels`` otherwise.  Set ``GUPPHASE_PURE_PYTHON=1`` to force
the fallback.
"""

from __future__ import annotations

import os
from typing import Mapping, Sequence

import numpy as np

from . import _pykernels
from .expr import (Add, Const, Div, EvalError, Expr, Func, Mul, Neg, PhasePoint,
                   Pow, Sub, Sym, Var, evaluate)

if os.environ.get("GUPPHASE_PURE_PYTHON"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
        BACKEND = "python"

OP = _pykernels
_BIN = {Add: OP.OP_ADD, Sub: OP.OP_SUB, Mul: OP.OP_MUL, Div: OP.OP_DIV}


def _push_const(v: float, ops, args, consts, cindex):
    if v not in cindex:
        cindex[v] = len(consts)
        consts.append(v)
    ops.append(OP.OP_CONST)
    args.append(cindex[v])


def _emit(e: Expr, slots, params, ops, args, consts, cindex):
    if isinstance(e, Const):
        _push_const(float(e.value), ops, args, consts, cindex)
    elif isinstance(e, Var):
        key = (e.kind, e.index)
        if key not in slots:
            raise EvalError(f"variable {e!r} out of range", e)
        ops.append(OP.OP_VAR)
        args.append(slots[key])
    elif isinstance(e, Sym):
        if e.name in slots:
            ops.append(OP.OP_VAR)
            args.append(slots[e.name])
        elif e.name in params:
            _push_const(float(params[e.name]), ops, args, consts, cindex)
        else:
            raise EvalError(f"unbound symbol {e.name!r}", e)
    elif isinstance(e, Neg):
        _emit(e.arg, slots, params, ops, args, consts, cindex)
        ops.append(OP.OP_NEG)
        args.append(0)
    elif isinstance(e, Pow):
        _emit(e.base, slots, params, ops, args, consts, cindex)
        ops.append(OP.OP_POW)
        args.append(e.exp)
    elif isinstance(e, Func):
        _emit(e.arg, slots, params, ops, args, consts, cindex)
        ops.append(OP.OP_SQRT if e.name == "sqrt" else OP.OP_EXP)
        args.append(0)
    else:
        _emit(e.left, slots, params, ops, args, consts, cindex)
        _emit(e.right, slots, params, ops, args, consts, cindex)
        ops.append(_BIN[type(e)])
        args.append(0)


class CompiledExprs:
    """Expressions compiled against the layout x = (q_1..q_d, p_1..p_d, extra...)."""

    def __init__(self, exprs: Sequence[Expr], d: int, params: Mapping[str, float] | None = None,
                 extra: Sequence[str] = (), impl=None):
        self.exprs = list(exprs)
        self.d = d
        self.params = dict(params or {})
        slots: dict = {}
        for i in range(1, d + 1):
            slots[("q", i)] = i - 1
            slots[("p", i)] = d + i - 1
        for k, name in enumerate(extra):
            slots[name] = 2 * d + k
        self.extra = tuple(extra)
        ops: list = []
        args: list = []
        consts: list = []
        starts = [0]
        cindex: dict = {}
        for e in self.exprs:
            _emit(e, slots, self.params, ops, args, consts, cindex)
            starts.append(len(ops))
        if not consts:
            consts.append(0.0)
        impl = impl or _impl
        self.program = impl.Program(np.array(ops, dtype=np.int32), np.array(args, dtype=np.int64),
                                    np.array(consts, dtype=np.float64),
                                    np.array(starts, dtype=np.int64), 2 * d + len(extra))

    def __len__(self):
        return len(self.exprs)

    def _raise_for(self, row, x):
        # the kernels only signal failure as a non-finite value; redo the
        # offending entry with the tree evaluator to get a useful message
        bad = int(np.flatnonzero(~np.isfinite(row))[0])
        point = PhasePoint(self.d, x[: self.d], x[self.d: 2 * self.d],
                           {**self.params, **dict(zip(self.extra, x[2 * self.d:]))})
        evaluate(self.exprs[bad], point)
        raise EvalError("non-finite value", self.exprs[bad])

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        out = self.program.eval(x)
        if not np.all(np.isfinite(out)):
            self._raise_for(out, x)
        return out

    def batch(self, X, check: bool = True) -> np.ndarray:
        """Values of every expression at every row of ``X``; shape (n, m)."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        out = self.program.eval_batch(X)
        if check and not np.all(np.isfinite(out)):
            i = int(np.flatnonzero(~np.all(np.isfinite(out), axis=1))[0])
            self._raise_for(out[i], X[i])
        return out


def compile_exprs(exprs: Sequence[Expr], d: int, params=None, extra: Sequence[str] = ()) -> CompiledExprs:
    return CompiledExprs(exprs, d, params, extra)


def rk4(compiled: CompiledExprs, x0, dt: float, nsteps: int, guard_index: int = -1,
        guard_min: float = 0.0):
    """Fixed-step RK4 using the first ``len(x0)`` tapes as the vector field."""
    mod = _pykernels if isinstance(compiled.program, _pykernels.Program) else _impl
    return mod.rk4(compiled.program, np.asarray(x0, dtype=np.float64), float(dt), int(nsteps),
                   int(guard_index), float(guard_min))
