"""Arclength branch tracing, branch-point detection and branch switching."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dynamics import DynamicsError
from .integrate import DEFAULT_OPTIONS, IntegratorOptions
from .model import ModelParams, total_energy
from .shoot import (
    ConvergenceError,
    InfeasibleError,
    NewtonOptions,
    SolutionVector,
    active_columns,
    arclength,
    as_array,
    jacobian,
    projection,
    reduced_rows,
    residual,
    solve,
)

log = logging.getLogger(__name__)


class SpecialKind(str, enum.Enum):
    PITCHFORK = "PITCHFORK"
    TURNING = "TURNING"
    TERMINATION = "TERMINATION"


@dataclass
class SpecialPoint:
    kind: SpecialKind
    index: int  # branch point index just before the event
    z: SolutionVector
    energy: float
    info: dict = field(default_factory=dict)


@dataclass
class BranchPoint:
    z: SolutionVector
    energy: float
    label: str = ""
    test: float = 0.0  # sign-carrying bifurcation test function
    sigma: tuple[float, float] = (math.nan, math.nan)  # two smallest singular values of the bordered Jacobian
    tangent: np.ndarray | None = None


@dataclass
class Branch:
    params: ModelParams
    step: float
    points: list[BranchPoint] = field(default_factory=list)
    special: list[SpecialPoint] = field(default_factory=list)
    termination: str = ""
    name: str = ""

    def __len__(self):
        return len(self.points)

    @property
    def Z(self) -> np.ndarray:
        return np.array([p.z.z for p in self.points])

    @property
    def energies(self) -> np.ndarray:
        return np.array([p.energy for p in self.points])

    def column(self, name: str) -> np.ndarray:
        from .shoot import Z_NAMES

        return self.Z[:, Z_NAMES.index(name)]

    def specials(self, kind: SpecialKind | str) -> list[SpecialPoint]:
        kind = SpecialKind(kind)
        return [s for s in self.special if s.kind == kind]

    def arclength(self) -> np.ndarray:
        Z = self.Z
        return np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(Z, axis=0), axis=1))])


@dataclass
class ContinuationOptions:
    step: float = 0.01
    min_step_factor: float = 1.0 / 64
    easy_successes: int = 5
    max_points: int = 20_000
    detect: bool = True
    locate: bool = True
    locate_tol: float = 1e-7
    max_swing_reversals: int = 2
    newton: NewtonOptions = field(default_factory=NewtonOptions)

    @classmethod
    def from_mapping(cls, values: dict) -> "ContinuationOptions":
        from .model import ModelError

        kw = {}
        for key, raw in values.items():
            if key not in cls.__dataclass_fields__ or key == "newton":
                raise ModelError(f"unknown continuation option {key!r}")
            try:
                kw[key] = int(raw) if key in ("easy_successes", "max_points", "max_swing_reversals") else (
                    raw.lower() in ("1", "true", "yes") if key in ("detect", "locate") else float(raw))
            except (ValueError, AttributeError):
                raise ModelError(f"continuation option {key!r}: cannot parse {raw!r}") from None
        return cls(**kw)


StopRule = Callable[[SolutionVector, "Branch"], "str | None"]


def bounds_rule(name: str, lo: float = -math.inf, hi: float = math.inf) -> StopRule:
    """Stop once component ``name`` of Z leaves [lo, hi]."""
    from .shoot import Z_NAMES

    k = Z_NAMES.index(name)

    def rule(z, branch):
        v = z.z[k]
        return None if lo <= v <= hi else f"{name}={v:.6g} outside [{lo:g}, {hi:g}]"

    return rule


def energy_rule(limit: float) -> StopRule:
    def rule(z, branch):
        e = solution_energy(z, branch.params)
        return f"energy {e:.6g} above {limit:g}" if e > limit else None

    return rule


def equilibrium_margin(Z: SolutionVector, params: ModelParams, integ: IntegratorOptions = DEFAULT_OPTIONS) -> float:
    """Smallest (vertical leg force / weight - 1) at the lowest body points of stance.

    Tends to zero when the body approaches the static equilibrium in which the
    legs just carry the weight; inf if there is no stance minimum.
    """
    from . import _kernels as K
    from .integrate import integrate_timed

    traj = integrate_timed(Z.initial_state(params), Z.schedule(), params, integ)
    p = params.as_array()
    feet = np.nan_to_num(traj.footholds)
    ydot = traj.states[:, 6]
    out = np.empty(10)
    worst = math.inf
    for i in range(1, len(ydot)):
        c = traj.contact[i]
        if c.any() and ydot[i - 1] < 0 <= ydot[i] and (traj.contact[i - 1] == c).all():
            if K.rhs(traj.states[i], c, feet[i], p, out) == K.OK:
                worst = min(worst, (out[6] + params.g) / params.g - 1.0)
    return worst


def equilibrium_rule(margin: float = 1e-3, integ: IntegratorOptions = DEFAULT_OPTIONS) -> StopRule:
    """Stop when the legs barely hold the body up at the bottom of stance."""

    def rule(z, branch):
        m = equilibrium_margin(z, branch.params, integ)
        return f"unstable equilibrium approached (margin {m:.3g})" if m < margin else None

    return rule


def solution_energy(Z, params: ModelParams) -> float:
    Z = Z if isinstance(Z, SolutionVector) else SolutionVector(Z)
    return total_energy(Z.initial_state(params), params)


def tangent_and_test(z: np.ndarray, params: ModelParams, direction: np.ndarray | None,
                     options: IntegratorOptions = DEFAULT_OPTIONS, jac=None):
    """Unit tangent of the solution family, bordered determinant and its two smallest singular values.

    The bordered matrix stacks the Jacobian of the reduced residual (which has
    full row rank at regular points) on the tangent. Its determinant changes
    sign at simple branch points but not at folds.
    """
    cols = list(active_columns(params))
    A = jacobian(z, params, options, rows=reduced_rows(params), cols=cols) if jac is None else jac
    _, _, vt = np.linalg.svd(A)
    t_act = vt[-1]
    t = np.zeros(14)
    t[cols] = t_act
    if direction is not None and np.dot(t, direction) < 0:
        t = -t
        t_act = -t_act
    B = np.vstack([A, t_act])
    sv = np.linalg.svd(B, compute_uv=False)
    sign, logdet = np.linalg.slogdet(B)
    return t, float(sign * np.exp(logdet)), (float(sv[-1]), float(sv[-2])), A


def swing_reversals(Z: SolutionVector, params: ModelParams, options: IntegratorOptions = DEFAULT_OPTIONS) -> int:
    """Largest number of sign changes of a swing leg's angular rate within one flight phase."""
    from .integrate import integrate_timed

    traj = integrate_timed(Z.initial_state(params), Z.schedule(), params, options)
    worst = 0
    for leg in range(2):
        rate = traj.states[:, 8 + leg]
        swing = traj.contact[:, leg] == 0
        count = 0
        for i in range(1, len(rate)):
            if swing[i] and swing[i - 1]:
                if rate[i] * rate[i - 1] < 0:
                    count += 1
            else:
                worst = max(worst, count)
                count = 0
        worst = max(worst, count)
    return worst


def _correct(z_center, z_pred, direction, d, params, options, newton):
    cons = [arclength(z_center, d)]
    ineq = [lambda z: float(np.dot(z - z_center, direction))]
    return solve(z_pred, params, cons, ineq, options=options, newton=newton)


def _make_point(z, params, direction, options, label_fn):
    t, sign, sig, _ = tangent_and_test(z.z, params, direction, options)
    e = solution_energy(z, params)
    label = label_fn(z) if label_fn else ""
    return BranchPoint(z, e, label, sign, sig, t)


def trace(seed1, seed2, params: ModelParams, step: float | None = None,
          stop_rules: tuple[StopRule, ...] = (), options: ContinuationOptions | None = None,
          integ: IntegratorOptions = DEFAULT_OPTIONS, label_fn=None, name: str = "") -> Branch:
    """Follow the solution family from ``seed2`` away from ``seed1``.

    Predictor: step ``d`` along the secant. Corrector: Newton on the boundary
    residual plus ``||Z - Z_n|| = d`` with ``(Z - Z_n).(Z_n - Z_{n-1}) > 0``.
    """
    options = options or ContinuationOptions()
    d0 = options.step if step is None else step
    z_prev = as_array(seed1).copy()
    seed2 = seed2 if isinstance(seed2, SolutionVector) else SolutionVector(seed2)
    branch = Branch(params, d0, name=name)
    first = _make_point(seed2, params, seed2.z - z_prev, integ, label_fn)
    branch.points.append(first)
    d = d0
    easy = 0
    d_min = d0 * options.min_step_factor
    while len(branch.points) < options.max_points:
        cur = branch.points[-1]
        z_cur = cur.z.z
        sec = z_cur - z_prev
        sec /= np.linalg.norm(sec)
        z_pred = z_cur + d * sec
        try:
            z_new = _correct(z_cur, z_pred, sec, d, params, integ, options.newton)
        except ConvergenceError as exc:
            if d / 2 >= d_min * (1 - 1e-12):
                d /= 2
                easy = 0
                log.debug("corrector failed (%s); step -> %g", exc, d)
                continue
            branch.termination = f"corrector divergence at step {d:.3g}: {exc}"
            cause = "compression" if "over-compression" in str(exc) else "divergence"
            branch.special.append(SpecialPoint(SpecialKind.TERMINATION, len(branch.points) - 1, cur.z, cur.energy,
                                               {"reason": branch.termination, "cause": cause}))
            break
        try:
            pt = _make_point(z_new, params, z_new.z - z_cur, integ, label_fn)
        except InfeasibleError as exc:
            branch.termination = f"jacobian infeasible: {exc}"
            branch.special.append(SpecialPoint(SpecialKind.TERMINATION, len(branch.points) - 1, cur.z, cur.energy,
                                               {"reason": branch.termination}))
            break
        reason = None
        if options.max_swing_reversals >= 0:
            try:
                nrev = swing_reversals(z_new, params, integ)
            except DynamicsError:
                nrev = 0
            if nrev > options.max_swing_reversals:
                reason = f"multiple leg-swing oscillations ({nrev} reversals of a swing leg rate)"
        for rule in stop_rules:
            if reason:
                break
            reason = rule(z_new, branch)
        if reason:
            branch.termination = reason
            branch.special.append(SpecialPoint(SpecialKind.TERMINATION, len(branch.points) - 1, cur.z, cur.energy,
                                               {"reason": reason}))
            break
        n = len(branch.points)
        branch.points.append(pt)
        if options.detect:
            _check_specials(branch, n, params, integ, options, z_prev)
        z_prev = z_cur
        easy += 1
        if easy >= options.easy_successes and d < d0:
            d = min(2 * d, d0)
            easy = 0
    else:
        branch.termination = "max points"
    return branch


def _check_specials(branch, n, params, integ, options, z_prev):
    """Compare point n with n-1 for sign changes of the test function and energy direction."""
    pts = branch.points
    a, b = pts[n - 1], pts[n]
    if a.test * b.test < 0:
        z_loc = b.z
        info = {"sigma": b.sigma}
        if options.locate:
            try:
                z_loc, info = locate_branch_point(a, b, params, integ, options)
            except ConvergenceError as exc:
                info = {"sigma": b.sigma, "warning": f"localization failed: {exc}"}
        branch.special.append(SpecialPoint(SpecialKind.PITCHFORK, n - 1, z_loc, solution_energy(z_loc, params), info))
        log.info("branch point between %d and %d", n - 1, n)
    if n >= 2:
        e0, e1, e2 = pts[n - 2].energy, a.energy, b.energy
        if (e1 - e0) * (e2 - e1) < 0:
            tp = _turning(pts[n - 2], a, b, n - 1)
            # an energy extremum exactly at a symmetric branch point is not a fold
            near = [s for s in branch.special if s.kind == SpecialKind.PITCHFORK and abs(s.index - tp.index) <= 1
                    and np.linalg.norm(s.z.z - tp.z.z) < 0.1 * branch.step]
            if not near:
                branch.special.append(tp)


def detect_bifurcations(branch: Branch, params: ModelParams | None = None,
                        integ: IntegratorOptions = DEFAULT_OPTIONS,
                        options: ContinuationOptions | None = None) -> list[SpecialPoint]:
    """Rescan a traced branch for branch points and folds.

    Uses the bordered-determinant signs and energies stored on the points, so
    only localization needs new solves. Terminations are carried over.
    """
    params = params or branch.params
    options = options or ContinuationOptions()
    scan = Branch(params, branch.step, name=branch.name)
    for n, pt in enumerate(branch.points):
        scan.points.append(pt)
        if n >= 1:
            _check_specials(scan, n, params, integ, options, None)
    scan.special.extend(s for s in branch.special if s.kind == SpecialKind.TERMINATION)
    return scan.special


def _turning(p0, p1, p2, index):
    # quadratic fit in arclength through three consecutive points
    s1 = np.linalg.norm(p1.z.z - p0.z.z)
    s2 = s1 + np.linalg.norm(p2.z.z - p1.z.z)
    s = np.array([0.0, s1, s2])
    E = np.array([p0.energy, p1.energy, p2.energy])
    cE = np.polyfit(s, E, 2)
    s_star = -cE[1] / (2 * cE[0]) if cE[0] != 0 else s1
    s_star = min(max(s_star, 0.0), s2)
    Zs = np.array([p0.z.z, p1.z.z, p2.z.z])
    z_star = np.array([np.polyval(np.polyfit(s, Zs[:, k], 2), s_star) for k in range(14)])
    kind = "max" if cE[0] < 0 else "min"
    return SpecialPoint(SpecialKind.TURNING, index, SolutionVector(z_star), float(np.polyval(cE, s_star)),
                        {"extremum": kind})


def locate_branch_point(a: BranchPoint, b: BranchPoint, params: ModelParams,
                        integ: IntegratorOptions = DEFAULT_OPTIONS, options: ContinuationOptions | None = None):
    """Regula falsi along arclength between two points whose test function differs in sign."""
    options = options or ContinuationOptions()
    za = a.z.z
    d_total = np.linalg.norm(b.z.z - za)
    sec = (b.z.z - za) / d_total
    lo, hi = 0.0, d_total
    f_lo, f_hi = a.test, b.test
    z_best, sig = b.z, b.sigma
    side = 0
    for _ in range(60):
        if hi - lo < options.locate_tol:
            break
        mid = (lo * f_hi - hi * f_lo) / (f_hi - f_lo)
        if not lo + 0.01 * (hi - lo) < mid < hi - 0.01 * (hi - lo):
            mid = 0.5 * (lo + hi)
        zm = _correct(za, za + mid * sec, sec, mid, params, integ, options.newton)
        _, f_mid, sg, _ = tangent_and_test(zm.z, params, sec, integ)
        z_best, sig = zm, sg
        if f_mid == 0.0:
            break
        if f_mid * f_lo > 0:
            lo, f_lo = mid, f_mid
            if side == 1:
                f_hi *= 0.5  # Illinois modification
            side = 1
        else:
            hi, f_hi = mid, f_mid
            if side == -1:
                f_lo *= 0.5
            side = -1
    return z_best, {"sigma": sig, "bracket": hi - lo}


def null_directions(z, params: ModelParams, integ: IntegratorOptions = DEFAULT_OPTIONS, k: int = 2):
    """The k right singular vectors of the reduced Jacobian with smallest singular values, as 14-vectors."""
    cols = list(active_columns(params))
    A = jacobian(as_array(z), params, integ, rows=reduced_rows(params), cols=cols)
    _, s, vt = np.linalg.svd(A)
    out = []
    for i in range(1, k + 1):
        v = np.zeros(14)
        v[cols] = vt[-i]
        out.append(v)
    return out, s


def _distance_to_polyline(z: np.ndarray, branch: Branch) -> float:
    Z = np.asarray(branch.Z)
    best = np.min(np.linalg.norm(Z - z, axis=1))
    for a, b in zip(Z[:-1], Z[1:]):
        d = b - a
        s = np.clip(np.dot(z - a, d) / max(np.dot(d, d), 1e-300), 0.0, 1.0)
        best = min(best, np.linalg.norm(a + s * d - z))
    return float(best)


def switch_branch(branch: Branch, bif: SpecialPoint, params: ModelParams, sign: int = 1,
                  eps: float | None = None, integ: IntegratorOptions = DEFAULT_OPTIONS,
                  newton: NewtonOptions | None = None, max_escalations: int = 3, orient: str | None = None):
    """Converged seeds on the branch emerging transversally at a localized branch point.

    The transverse direction is the part of the two-dimensional null space
    orthogonal to the parent tangent. Seeds are found at projections eps and
    2*eps onto it, so the corrector cannot fall back onto the parent branch.
    ``sign=+1`` follows the direction in which the Z component named ``orient``
    grows (by default the largest component of the transverse null vector).
    """
    eps = 10 * branch.step if eps is None else eps
    zb = bif.z.z
    # the null space is two-dimensional at the branch point, so take the parent direction from the secant
    i = bif.index
    parent_t = branch.points[i + 1].z.z - branch.points[i].z.z
    parent_t = parent_t / np.linalg.norm(parent_t)
    vecs, _ = null_directions(zb, params, integ, 2)
    # transverse null direction: orthogonalize the 2D null space against the parent tangent
    cand = [v - np.dot(v, parent_t) * parent_t for v in vecs]
    v = max(cand, key=np.linalg.norm)
    v /= np.linalg.norm(v)
    from .shoot import Z_NAMES

    k = Z_NAMES.index(orient) if orient else int(np.argmax(np.abs(v)))
    if v[k] < 0:
        v = -v
    v *= sign
    rows = reduced_rows(params)
    for _ in range(max_escalations + 1):
        seeds = []
        try:
            for mult in (1.0, 2.0):
                off = mult * eps
                z0 = zb + off * v
                seeds.append(solve(z0, params, [projection(v, zb, off)], options=integ, newton=newton, rows=rows))
        except ConvergenceError:
            eps *= 2
            continue
        # reject seeds that slid back onto the parent family
        if min(_distance_to_polyline(s.z, branch) for s in seeds) > 0.5 * eps:
            return seeds[0], seeds[1]
        eps *= 2
    raise ConvergenceError("branch switching failed: seeds fall back onto the parent branch")
