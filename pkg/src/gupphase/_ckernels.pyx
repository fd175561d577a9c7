# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled tape kernels: stack-machine evaluation and fixed-step RK4.

Mirrors ``_pykernels``; domain errors surface as NaN/inf, never exceptions.
"""

from libc.math cimport sqrt, exp, pow, isfinite, NAN
from libc.stdlib cimport malloc, free

import numpy as np

DEF OP_CONST = 0
DEF OP_VAR = 1
DEF OP_ADD = 2
DEF OP_SUB = 3
DEF OP_MUL = 4
DEF OP_DIV = 5
DEF OP_NEG = 6
DEF OP_POW = 7
DEF OP_SQRT = 8
DEF OP_EXP = 9


cdef inline double _ipow(double b, long n) nogil:
    cdef double r = 1.0
    cdef long m = n if n >= 0 else -n
    while m:
        if m & 1:
            r *= b
        b *= b
        m >>= 1
    if n < 0:
        return 1.0 / r
    return r


cdef class Program:
    cdef int[::1] ops
    cdef long long[::1] args
    cdef double[::1] consts
    cdef long long[::1] starts
    cdef readonly int nvar
    cdef readonly int ntapes
    cdef double* stack
    cdef int depth

    def __cinit__(self, ops, args, consts, starts, nvar):
        self.ops = np.ascontiguousarray(ops, dtype=np.int32)
        self.args = np.ascontiguousarray(args, dtype=np.int64)
        self.consts = np.ascontiguousarray(consts, dtype=np.float64)
        self.starts = np.ascontiguousarray(starts, dtype=np.int64)
        self.nvar = nvar
        self.ntapes = len(starts) - 1
        self.depth = max(1, len(ops))
        self.stack = <double*> malloc(self.depth * sizeof(double))
        if self.stack == NULL:
            raise MemoryError()

    def __dealloc__(self):
        if self.stack != NULL:
            free(self.stack)

    cdef double run(self, int t, const double* x) noexcept nogil:
        cdef long long k
        cdef int sp = -1
        cdef int op
        cdef double* s = self.stack
        for k in range(self.starts[t], self.starts[t + 1]):
            op = self.ops[k]
            if op == OP_CONST:
                sp += 1
                s[sp] = self.consts[self.args[k]]
            elif op == OP_VAR:
                sp += 1
                s[sp] = x[self.args[k]]
            elif op == OP_ADD:
                sp -= 1
                s[sp] = s[sp] + s[sp + 1]
            elif op == OP_SUB:
                sp -= 1
                s[sp] = s[sp] - s[sp + 1]
            elif op == OP_MUL:
                sp -= 1
                s[sp] = s[sp] * s[sp + 1]
            elif op == OP_DIV:
                sp -= 1
                s[sp] = s[sp] / s[sp + 1]
            elif op == OP_NEG:
                s[sp] = -s[sp]
            elif op == OP_POW:
                s[sp] = _ipow(s[sp], self.args[k])
            elif op == OP_SQRT:
                if s[sp] < 0.0:
                    s[sp] = NAN
                else:
                    s[sp] = sqrt(s[sp])
            elif op == OP_EXP:
                s[sp] = exp(s[sp])
        return s[0]

    def eval(self, x):
        cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
        out = np.empty(self.ntapes)
        cdef double[::1] ov = out
        cdef int t
        for t in range(self.ntapes):
            ov[t] = self.run(t, &xv[0])
        return out

    def eval_batch(self, X):
        cdef double[:, ::1] xv = np.ascontiguousarray(X, dtype=np.float64)
        cdef Py_ssize_t n = xv.shape[0]
        out = np.empty((n, self.ntapes))
        cdef double[:, ::1] ov = out
        cdef Py_ssize_t i
        cdef int t
        with nogil:
            for i in range(n):
                for t in range(self.ntapes):
                    ov[i, t] = self.run(t, &xv[i, 0])
        return out

    cdef void field(self, int n, const double* x, double* k) noexcept nogil:
        cdef int t
        for t in range(n):
            k[t] = self.run(t, x)


def rk4(Program program, x0, double dt, long nsteps, int guard_index=-1, double guard_min=0.0):
    """Fixed-step RK4 on dx/dt = tapes[0:n](x), n = len(x0).

    Returns ``(trajectory, steps_done)``; stops early when the guard tape
    drops below ``guard_min`` or the state becomes non-finite.
    """
    cdef int n = len(x0)
    traj = np.empty((nsteps + 1, n))
    cdef double[:, ::1] tv = traj
    cdef double* buf = <double*> malloc(6 * n * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    cdef double* x = buf
    cdef double* y = buf + n
    cdef double* k1 = buf + 2 * n
    cdef double* k2 = buf + 3 * n
    cdef double* k3 = buf + 4 * n
    cdef double* k4 = buf + 5 * n
    cdef int i
    cdef long step
    cdef long done = nsteps
    cdef bint ok
    cdef double g
    for i in range(n):
        x[i] = x0[i]
        tv[0, i] = x[i]
    try:
        if guard_index >= 0:
            g = program.run(guard_index, x)
            if not (g >= guard_min):
                return traj[:1], 0
        with nogil:
            for step in range(nsteps):
                program.field(n, x, k1)
                for i in range(n):
                    y[i] = x[i] + 0.5 * dt * k1[i]
                program.field(n, y, k2)
                for i in range(n):
                    y[i] = x[i] + 0.5 * dt * k2[i]
                program.field(n, y, k3)
                for i in range(n):
                    y[i] = x[i] + dt * k3[i]
                program.field(n, y, k4)
                ok = True
                for i in range(n):
                    x[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                    if not isfinite(x[i]):
                        ok = False
                if ok and guard_index >= 0:
                    g = program.run(guard_index, x)
                    ok = g >= guard_min
                if not ok:
                    done = step
                    break
                for i in range(n):
                    tv[step + 1, i] = x[i]
    finally:
        free(buf)
    if done < nsteps:
        return traj[: done + 1], done
    return traj, nsteps
