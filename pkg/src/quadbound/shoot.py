"""Single-shooting boundary value problem for periodic gaits.

The unknown is the 14-vector

    Z = (y, phi, alpha_F, alpha_H, xdot, ydot, phidot, alphadot_F, alphadot_H,
         t_Htd, t_Hlo, t_Ftd, t_Flo, t_stride)

at the apex (x = 0 by convention, ydot = 0 hard-coded). The residual stacks
periodicity of every state except x, the apex condition at the end of the
stride, and full leg extension at the four footfall events.

Because the model is conservative, gaits come in one-parameter families and
the square Jacobian is rank deficient by one at regular solutions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import _kernels as K
from .integrate import DEFAULT_OPTIONS, EventSchedule, IntegratorOptions, run_timed_raw
from .model import HybridState, ModelParams

log = logging.getLogger(__name__)

Z_NAMES = (
    "y", "phi", "alpha_F", "alpha_H", "xdot", "ydot", "phidot", "alphadot_F", "alphadot_H",
    "t_Htd", "t_Hlo", "t_Ftd", "t_Flo", "t_stride",
)
R_NAMES = (
    "R_y", "R_phi", "R_alpha_F", "R_alpha_H", "R_xdot", "R_ydot", "R_phidot",
    "R_alphadot_F", "R_alphadot_H", "R_apex", "R_Htd", "R_Hlo", "R_Ftd", "R_Flo",
)
IY, IPHI, IAF, IAH, IXD, IYD, IPHID, IAFD, IAHD, ITHTD, ITHLO, ITFTD, ITFLO, IT = range(14)
TIMES = slice(9, 13)

# ydot is pinned to zero; R_ydot duplicates the apex condition
_ACTIVE_FINITE = tuple(i for i in range(14) if i != IYD)
_ACTIVE_RIGID = tuple(i for i in _ACTIVE_FINITE if i not in (IPHI, IPHID))
_ROWS_FINITE = tuple(i for i in range(14) if i != 5)
_ROWS_RIGID = tuple(i for i in _ROWS_FINITE if i not in (1, 6))


class InfeasibleError(RuntimeError):
    """The stride could not be integrated from this solution vector."""

    def __init__(self, status, t=None):
        self.status = status
        self.t = t
        super().__init__(f"{K.STATUS_NAMES.get(status, status)}" + (f" at t={t:.6g}" if t is not None else ""))


class ConvergenceError(RuntimeError):
    """Newton iteration failed."""


def active_columns(params: ModelParams) -> tuple[int, ...]:
    return _ACTIVE_RIGID if params.rigid else _ACTIVE_FINITE


def active_rows(params: ModelParams) -> tuple[int, ...]:
    return _ROWS_RIGID if params.rigid else _ROWS_FINITE


def reduced_rows(params: ModelParams) -> tuple[int, ...]:
    """Active rows without y-periodicity, which energy conservation implies."""
    return tuple(r for r in active_rows(params) if r != 0)


@dataclass(frozen=True, eq=False)
class SolutionVector:
    z: np.ndarray

    def __post_init__(self):
        z = np.array(self.z, dtype=float).reshape(14)
        z.setflags(write=False)
        object.__setattr__(self, "z", z)

    def __getattr__(self, name):
        if name in Z_NAMES:
            return float(self.z[Z_NAMES.index(name)])
        raise AttributeError(name)

    def __eq__(self, other):
        return isinstance(other, SolutionVector) and np.array_equal(self.z, other.z)

    @classmethod
    def from_parts(cls, y, phi=0.0, alpha_F=0.0, alpha_H=0.0, xdot=0.0, phidot=0.0,
                   alphadot_F=0.0, alphadot_H=0.0, t_Htd=0.0, t_Hlo=0.0, t_Ftd=0.0, t_Flo=0.0,
                   t_stride=1.0) -> "SolutionVector":
        return cls(np.array([y, phi, alpha_F, alpha_H, xdot, 0.0, phidot, alphadot_F, alphadot_H,
                             t_Htd, t_Hlo, t_Ftd, t_Flo, t_stride]))

    @property
    def state_vector(self) -> np.ndarray:
        z = self.z
        return np.array([0.0, z[IY], z[IPHI], z[IAF], z[IAH], z[IXD], z[IYD], z[IPHID], z[IAFD], z[IAHD]])

    @property
    def times(self) -> np.ndarray:
        return self.z[TIMES].copy()

    @property
    def stride(self) -> float:
        return float(self.z[IT])

    def schedule(self) -> EventSchedule:
        return EventSchedule.wrapped(self.times, self.stride)

    def initial_state(self, params: ModelParams) -> HybridState:
        """Apex state with stance legs (if any) placed and reset as at a touch-down."""
        s = self.state_vector
        sched = self.schedule()
        st = HybridState(s[:5], s[5:])
        from .dynamics import touchdown_reset

        for leg, c in zip((1, 0), reversed(sched.initial_contact())):
            if c:
                st = touchdown_reset(st, leg, params, check=False)
        return st

    def to_dict(self) -> dict:
        return {name: float(v) for name, v in zip(Z_NAMES, self.z)}

    @classmethod
    def from_dict(cls, d: dict) -> "SolutionVector":
        return cls(np.array([float(d.get(name, 0.0)) for name in Z_NAMES]))

    def copy_with(self, **changes) -> "SolutionVector":
        z = self.z.copy()
        for k, v in changes.items():
            z[Z_NAMES.index(k)] = v
        return SolutionVector(z)


def as_array(Z) -> np.ndarray:
    return Z.z if isinstance(Z, SolutionVector) else np.asarray(Z, dtype=float)


def residual(Z, params: ModelParams, options: IntegratorOptions = DEFAULT_OPTIONS) -> np.ndarray:
    """Full 14-component boundary residual. Raises :class:`InfeasibleError` on integration failure."""
    z = as_array(Z)
    s0 = np.array([0.0, z[IY], z[IPHI], z[IAF], z[IAH], z[IXD], z[IYD], z[IPHID], z[IAFD], z[IAHD]])
    if params.rigid:
        s0[2] = 0.0
        s0[7] = 0.0
    T = z[IT]
    if not (T > 0 and np.all(np.isfinite(z))):
        raise InfeasibleError(K.ERR_NONFINITE)
    (status, end, ev, t_fail, _, _), _ = run_timed_raw(s0, z[TIMES], T, params, options)
    if status != K.OK:
        raise InfeasibleError(status, t_fail)
    p = params.as_array()
    r = np.empty(14)
    r[0:4] = end[1:5] - s0[1:5]
    r[4:9] = end[5:10] - s0[5:10]
    r[9] = end[6]
    r[10] = K.extension_gap(ev[K.EV_HTD], 1, p)
    r[11] = K.extension_gap(ev[K.EV_HLO], 1, p)
    r[12] = K.extension_gap(ev[K.EV_FTD], 0, p)
    r[13] = K.extension_gap(ev[K.EV_FLO], 0, p)
    return r


def fd_steps(z: np.ndarray, cols) -> np.ndarray:
    return np.maximum(1e-6, 1e-6 * np.abs(z[list(cols)]))


def jacobian(Z, params: ModelParams, options: IntegratorOptions = DEFAULT_OPTIONS,
             rows=None, cols=None, steps=None) -> np.ndarray:
    """Central finite-difference Jacobian of the residual.

    By default returns the square active block (13x13, or 11x11 at infinite J).
    """
    z = as_array(Z).copy()
    rows = active_rows(params) if rows is None else rows
    cols = active_columns(params) if cols is None else cols
    h = fd_steps(z, cols) if steps is None else np.broadcast_to(steps, (len(cols),))
    out = np.empty((len(rows), len(cols)))
    rows = list(rows)
    for j, (c, hj) in enumerate(zip(cols, h)):
        zp = z.copy()
        zp[c] += hj
        zm = z.copy()
        zm[c] -= hj
        out[:, j] = (residual(zp, params, options)[rows] - residual(zm, params, options)[rows]) / (2 * hj)
    return out


# -- side constraints -----------------------------------------------------------


@dataclass
class Constraint:
    """Scalar equality g(z) = 0 on the full 14-vector with its gradient."""

    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    name: str = "constraint"


def fix_component(index: int | str, target: float) -> Constraint:
    i = Z_NAMES.index(index) if isinstance(index, str) else index
    e = np.zeros(14)
    e[i] = 1.0
    return Constraint(lambda z: z[i] - target, lambda z: e, f"fix {Z_NAMES[i]}")


def arclength(center, d: float) -> Constraint:
    """||Z - center|| = d, written as (||Z - center||^2 - d^2) / (2 d)."""
    c = as_array(center).copy()
    return Constraint(lambda z: (np.dot(z - c, z - c) - d * d) / (2 * d), lambda z: (z - c) / d,
                      f"arclength {d:g}")


def projection(direction, center, offset: float) -> Constraint:
    """(Z - center) . v = offset."""
    v = np.asarray(direction, dtype=float).copy()
    c = as_array(center).copy()
    return Constraint(lambda z: float(np.dot(z - c, v) - offset), lambda z: v, "projection")


def hyperplane(normal, point) -> Constraint:
    return projection(normal, point, 0.0)


@dataclass
class NewtonOptions:
    tol: float = 1e-9
    step_tol: float = 1e-10
    max_iter: int = 40
    max_halvings: int = 8
    reuse_jacobian: bool = True


@dataclass
class SolveInfo:
    iterations: int
    residual_norm: float
    jacobian: np.ndarray | None  # stacked system Jacobian at the last linearization
    history: list


def _stack(z, params, rows, constraints, options):
    r = residual(z, params, options)
    full = r
    F = np.concatenate([r[list(rows)], [c.value(z) for c in constraints]])
    return F, full


def solve(Z_guess, params: ModelParams, side_constraints: Sequence[Constraint] = (),
          inequalities: Sequence[Callable[[np.ndarray], float]] = (),
          options: IntegratorOptions = DEFAULT_OPTIONS, newton: NewtonOptions | None = None,
          rows=None, info: bool = False):
    """Damped Newton on [T(Z); constraints] with a finite-difference Jacobian.

    Linear steps use the minimum-norm least-squares solution, so an
    underdetermined system converges to some nearby point of the solution
    family. Inequalities ``h(z) > 0`` are checked after convergence.
    """
    newton = newton or NewtonOptions()
    rows = active_rows(params) if rows is None else rows
    cols = list(active_columns(params))
    z = as_array(Z_guess).copy()
    z[IYD] = 0.0
    if params.rigid:
        z[IPHI] = 0.0
        z[IPHID] = 0.0
    try:
        F, full = _stack(z, params, rows, side_constraints, options)
    except InfeasibleError as exc:
        raise ConvergenceError(f"initial guess infeasible: {exc}") from exc
    history = [float(np.max(np.abs(full)))]
    Jac = None
    fresh = False
    streak = 0
    for it in range(1, newton.max_iter + 1):
        if Jac is None or not newton.reuse_jacobian:
            try:
                Jt = jacobian(z, params, options, rows=rows, cols=cols)
            except InfeasibleError as exc:
                raise ConvergenceError(f"jacobian infeasible: {exc}") from exc
            Jc = np.array([[c.grad(z)[k] for k in cols] for c in side_constraints]).reshape(len(side_constraints), len(cols))
            Jac = np.vstack([Jt, Jc])
            fresh = True
        dz = np.linalg.lstsq(Jac, -F, rcond=None)[0]
        norm0 = np.linalg.norm(F)
        lam = 1.0
        accepted = False
        for _ in range(newton.max_halvings + 1):
            zn = z.copy()
            zn[cols] += lam * dz
            try:
                Fn, fulln = _stack(zn, params, rows, side_constraints, options)
            except InfeasibleError:
                lam *= 0.5
                continue
            if np.linalg.norm(Fn) < norm0 or np.max(np.abs(Fn)) < newton.tol:
                accepted = True
                break
            lam *= 0.5
        step = lam * np.linalg.norm(dz)
        if not accepted:
            if not fresh:
                Jac = None
                continue
            if np.max(np.abs(F)) < newton.tol and np.max(np.abs(full)) < newton.tol:
                break  # at the noise floor already
            raise ConvergenceError(f"line search failed at iteration {it} (|F|={norm0:.3e})")
        ratio = np.linalg.norm(Fn) / max(norm0, 1e-300)
        z, F, full = zn, Fn, fulln
        history.append(float(np.max(np.abs(full))))
        log.debug("newton it=%d |T|=%.3e step=%.3e lam=%g", it, history[-1], step, lam)
        if ratio > 0.25 and lam == 1.0:
            Jac = None  # slow contraction: refresh the linearization
        else:
            fresh = False
        small = np.max(np.abs(full)) < newton.tol and np.max(np.abs(F)) < newton.tol
        if small and (step < newton.step_tol or streak >= 1):
            break
        streak = streak + 1 if small else 0
    else:
        raise ConvergenceError(f"no convergence in {newton.max_iter} iterations (|T|={history[-1]:.3e})")
    for h in inequalities:
        if not h(z) > 0:
            raise ConvergenceError("direction constraint violated")
    sol = SolutionVector(z)
    if info:
        return sol, SolveInfo(it, history[-1], Jac, history)
    return sol
