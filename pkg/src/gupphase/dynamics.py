"""Hamiltonian flow of a deformed bracket: x' = pi(x) grad H."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from . import kernels
from .expr import Const, Expr, Pow, diff, simplify
from .structure import GupModel, bracket_expr

F_MIN = 1e-6
DEFAULT_DT = 1e-3
DEFAULT_T_END = 10.0


class DomainExitError(ArithmeticError):
    """The trajectory reached f <= f_min (or a non-finite state)."""

    def __init__(self, message: str, trajectory: "Trajectory | None" = None):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray            # shape (n, 2d)
    method: str
    dt: float
    d: int
    diagnostics: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)

    @property
    def q(self) -> np.ndarray:
        return self.x[:, : self.d]

    @property
    def p(self) -> np.ndarray:
        return self.x[:, self.d:]


def vector_field_exprs(m: GupModel, H: Expr) -> list[Expr]:
    """v^a = {x^a, H} = pi^{ab} dH/dx^b."""
    return [bracket_expr(m, x, H) for x in m.coords()]


def hamiltonian_vector_field(m: GupModel, H: Expr, x) -> np.ndarray:
    pt = m.point(x)
    X = np.array([*pt.q, *pt.p], dtype=float)
    return m.compile(vector_field_exprs(m, H))(X)


def integrate(m: GupModel, H: Expr, x0, t_end: float = DEFAULT_T_END, dt: float = DEFAULT_DT,
              method: str = "rk4", f_min: float = F_MIN, rtol: float = 1e-10,
              atol: float = 1e-12) -> Trajectory:
    """Integrate the flow from ``x0``.

    ``rk4`` is fixed-step (compiled kernel when available); ``rk45`` is the
    adaptive Dormand-Prince pair sampled every ``dt``.  Raises
    :class:`DomainExitError` when f drops to ``f_min``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    d = m.d
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (2 * d,):
        raise ValueError(f"x0 must have {2 * d} components")
    prog = m.compile([*vector_field_exprs(m, H), m.f])
    f0 = float(prog(x0)[-1])
    if not f0 > f_min:
        raise DomainExitError(f"initial point has f = {f0:.3g} <= {f_min:g}")
    nsteps = int(round(t_end / dt))
    if method == "rk4":
        traj, done = kernels.rk4(prog, x0, dt, nsteps, guard_index=2 * d, guard_min=f_min)
        t = dt * np.arange(len(traj))
        tr = Trajectory(t, np.asarray(traj), "rk4", dt, d)
        if done < nsteps:
            raise DomainExitError(f"f fell below {f_min:g} near t = {dt * (done + 1):.6g}", tr)
        return tr
    if method == "rk45":
        field_prog = m.compile(vector_field_exprs(m, H))
        fprog = m.compile([m.f])

        def rhs(_t, x):
            return field_prog.program.eval(x)

        def guard(_t, x):
            return fprog.program.eval(x)[0] - f_min

        guard.terminal = True
        guard.direction = -1
        t_eval = dt * np.arange(nsteps + 1)
        t_eval[-1] = min(t_eval[-1], t_end)
        sol = solve_ivp(rhs, (0.0, t_eval[-1]), x0, method="RK45", t_eval=t_eval,
                        events=guard, rtol=rtol, atol=atol)
        tr = Trajectory(sol.t, sol.y.T.copy(), "rk45", dt, d)
        if sol.status == 1 or not sol.success:
            raise DomainExitError(f"integration stopped at t = {sol.t[-1]:.6g}: {sol.message}", tr)
        return tr
    raise ValueError(f"unknown method {method!r}")


def _values(m: GupModel, exprs, X) -> np.ndarray:
    return m.compile(exprs).batch(X)


def conservation_report(tr: Trajectory, m: GupModel, H: Expr, scheme=None) -> dict:
    """Max drift of H and, with a scheme, of each J_k along the trajectory."""
    if len(tr) == 0:
        raise ValueError("empty trajectory")
    out = {}
    h = _values(m, [H], tr.x)[:, 0]
    out["energy_drift"] = float(np.max(np.abs(h - h[0])))
    if scheme is not None:
        J = _values(m, list(scheme.J), tr.x)
        out["J_drift"] = float(np.max(np.abs(J - J[0])))
    tr.diagnostics.update(out)
    return out


def liouville_exprs(m: GupModel, H: Expr) -> Expr:
    """div(f^-d X_H): zero when f^-d is an invariant density of the flow."""
    w = Const(1) / Pow(m.f, m.d) if m.d > 1 else Const(1) / m.f
    v = vector_field_exprs(m, H)
    terms = [diff(w * va, xa) for va, xa in zip(v, m.coords())]
    out = terms[0]
    for t in terms[1:]:
        out = out + t
    return simplify(out)


def liouville_residual(m: GupModel, H: Expr, points=None) -> float:
    X = m.domain.sample(100) if points is None else np.atleast_2d(np.asarray(points, dtype=float))
    return float(np.max(np.abs(_values(m, [liouville_exprs(m, H)], X))))


def csv_text(tr: Trajectory, m: GupModel, H: Expr, scheme=None) -> str:
    """CSV with header t,q1..qd,p1..pd,H[,J1..J3]."""
    d = tr.d
    header = ["t", *(f"q{i}" for i in range(1, d + 1)), *(f"p{i}" for i in range(1, d + 1)), "H"]
    cols = [tr.t[:, None], tr.x, _values(m, [H], tr.x)]
    if scheme is not None:
        header += ["J1", "J2", "J3"]
        cols.append(_values(m, list(scheme.J), tr.x))
    data = np.hstack(cols)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in data:
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()
