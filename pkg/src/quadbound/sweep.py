"""Homotopy in body inertia, critical-inertia bisection and branch censuses."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .continuation import Branch, ContinuationOptions, SpecialKind, trace
from .integrate import DEFAULT_OPTIONS, IntegratorOptions
from .model import INFINITE, ModelError, ModelParams
from .shoot import ConvergenceError, NewtonOptions, SolutionVector, Z_NAMES, fix_component, solve

log = logging.getLogger(__name__)

FIRST_FINITE_J = 1e3
LOG_STEP = math.log(10) / 8  # default spacing of the inertia path


class InertiaContinuationError(ConvergenceError):
    """The solution stopped existing (or converging) part way along the inertia path."""

    def __init__(self, message, last_J, last_solution):
        super().__init__(message)
        self.last_J = last_J
        self.last_solution = last_solution


def inertia_path(J_start: float, J_target: float, steps: int | None = None) -> np.ndarray:
    """Log-spaced inertia values after ``J_start`` up to and including ``J_target``.

    From a rigid body the path starts at J = 1e3 (or at the target if that is larger).
    """
    if J_target <= 0:
        raise ModelError("target inertia must be positive")
    if math.isinf(J_target):
        return np.array([INFINITE])
    head = []
    if math.isinf(J_start):
        if J_target >= FIRST_FINITE_J:
            return np.array([J_target])
        head, J_start = [FIRST_FINITE_J], FIRST_FINITE_J
    if J_start == J_target:
        return np.array(head, dtype=float)
    n = steps or max(2, int(math.ceil(abs(math.log(J_target / J_start)) / LOG_STEP)))
    tail = np.geomspace(J_start, J_target, n + 1)[1:]
    return np.concatenate([head, tail])


def continue_in_inertia(solution: SolutionVector, params: ModelParams, J_target: float,
                        steps: int | None = None, anchor: str = "xdot",
                        integ: IntegratorOptions = DEFAULT_OPTIONS, newton: NewtonOptions | None = None,
                        return_path: bool = False, max_refinements: int = 6):
    """Carry a converged gait from ``params.J`` to ``J_target``.

    At each inertia value the gait is re-converged with the ``anchor`` component
    of Z held at its current value, which picks one member of the
    one-parameter family. Guesses are extrapolated linearly in log J and a
    failed step is retried at half the log-spacing, up to ``max_refinements`` times.
    """
    z = solution if isinstance(solution, SolutionVector) else SolutionVector(solution)
    anchor_con = fix_component(anchor, float(z.z[Z_NAMES.index(anchor)]))
    history: list[tuple[float, SolutionVector]] = [(params.J, z)]
    pending = list(inertia_path(params.J, J_target, steps))[::-1]
    while pending:
        J = float(pending.pop())
        p = params.with_inertia(J)
        guess = history[-1][1].z
        if len(history) >= 2 and all(math.isfinite(h[0]) for h in history[-2:]):
            (J0, z0), (J1, z1) = history[-2], history[-1]
            w = math.log(J / J1) / math.log(J1 / J0)
            guess = z1.z + w * (z1.z - z0.z)
        try:
            z = solve(guess, p, [anchor_con], options=integ, newton=newton)
        except ConvergenceError as exc:
            last_J, last = history[-1]
            if math.isfinite(last_J) and abs(math.log(J / last_J)) > LOG_STEP / 2**max_refinements:
                pending.extend([J, math.sqrt(J * last_J)])
                continue
            raise InertiaContinuationError(f"lost the solution between J={last_J:g} and J={J:g}: {exc}",
                                           last_J, last) from exc
        history.append((J, z))
        log.debug("J=%g converged", J)
    if return_path:
        return z, history
    return z


# --- pronking reference: the PF branch and its branch points C and D are the same at every J ---


@dataclass
class PronkingReference:
    """In-place pronking and forward pronking branches traced once with a rigid body."""

    pp: Branch
    pf: Branch
    step: float
    b_point: object = None  # the branch point on pp where pf starts

    def branch_point(self, which: str):
        """Branch point B (start of PF), C (low speed) or D (high speed, past the energy maximum)."""
        if which == "B" and self.b_point is not None:
            return self.b_point
        forks = self.pf.specials(SpecialKind.PITCHFORK)
        if not forks:
            raise ModelError("no branch points on the forward pronking branch")
        if which == "C":
            return forks[0]
        turning = [s.index for s in self.pf.specials(SpecialKind.TURNING)]
        after = [f for f in forks if turning and f.index > turning[0]]
        if which == "D" and after:
            return after[0]
        raise ModelError(f"branch point {which!r} not on the reference branch")


def _transverse(branch: Branch, sp, params, integ) -> np.ndarray:
    from .continuation import null_directions

    i = sp.index
    t = branch.points[i + 1].z.z - branch.points[i].z.z
    t /= np.linalg.norm(t)
    vecs, _ = null_directions(sp.z, params, integ, 2)
    w = max((v - np.dot(v, t) * t for v in vecs), key=np.linalg.norm)
    return w / np.linalg.norm(w)


def _is_level_speed_fork(w: np.ndarray) -> bool:
    # forward speed appears while the apex leg angles stay at zero
    ia, ih, ix = (Z_NAMES.index(n) for n in ("alpha_F", "alpha_H", "xdot"))
    return abs(w[ix]) > 0.3 and abs(w[ia]) + abs(w[ih]) < 0.05


_REFERENCE_CACHE: dict = {}


def pronking_reference(params: ModelParams, step: float = 0.02, integ: IntegratorOptions = DEFAULT_OPTIONS,
                       options: ContinuationOptions | None = None) -> PronkingReference:
    """Trace PP from its closed-form seed past branch point B, switch to PF and trace past D.

    Pronking keeps the body level, so the result holds for every body inertia;
    it is computed with a rigid body and cached per parameter set.
    """
    from .continuation import switch_branch
    from .gaitlib import seed_vertical_gait

    rigid = params.with_inertia(INFINITE)
    key = (rigid, step, integ)
    if key in _REFERENCE_CACHE:
        return _REFERENCE_CACHE[key]
    options = options or ContinuationOptions()
    y_stop = 1.66 * params.l_o
    pp = trace(seed_vertical_gait("PP", 1.2 * params.l_o, rigid), seed_vertical_gait("PP", 1.21 * params.l_o, rigid),
               rigid, step=min(step, 0.01), options=options, integ=integ, name="PP",
               stop_rules=(lambda z, b: "apex bound" if z.y > y_stop else None,))
    forks = pp.specials(SpecialKind.PITCHFORK)
    if not forks:
        raise ConvergenceError("no branch point found on the in-place pronking branch")
    level = [sp for sp in forks if _is_level_speed_fork(_transverse(pp, sp, rigid, integ))]
    if not level:
        raise ConvergenceError("the in-place pronking branch has no branch point towards forward pronking")
    B = level[0]
    s1, s2 = switch_branch(pp, B, rigid, sign=1, eps=5 * step, integ=integ, orient="xdot")
    seen_max = {"flag": False}

    def past_D(z, b):
        if b.specials(SpecialKind.TURNING):
            seen_max["flag"] = True
        if seen_max["flag"] and len(b.specials(SpecialKind.PITCHFORK)) >= 2 and \
                z.xdot < b.specials(SpecialKind.PITCHFORK)[-1].z.xdot - 0.2:
            return "past branch point D"
        return None

    pf = trace(s1, s2, rigid, step=step, options=options, integ=integ, name="PF", stop_rules=(past_D,))
    ref = PronkingReference(pp, pf, step, B)
    _REFERENCE_CACHE[key] = ref
    return ref


@dataclass
class BoundingReference:
    """In-place bounding and the two-suspension branch leaving it, traced with a rigid body."""

    bp: Branch
    b2: Branch
    e_point: object
    step: float


def bounding_reference(params: ModelParams, step: float = 0.02, y_start: float = 1.05,
                       integ: IntegratorOptions = DEFAULT_OPTIONS,
                       options: ContinuationOptions | None = None) -> BoundingReference:
    """Trace in-place bounding down from ``y_start`` to touch-down height and switch onto B2.

    B2 leaves at the in-place bounding branch point whose transverse direction
    is dominated by forward speed; it is traced until it ends.
    """
    from .continuation import switch_branch
    from .gaitlib import seed_vertical_gait

    rigid = params.with_inertia(INFINITE)
    key = ("bounding", rigid, step, y_start, integ)
    if key in _REFERENCE_CACHE:
        return _REFERENCE_CACHE[key]
    options = options or ContinuationOptions()
    lo = params.l_o
    bp = trace(seed_vertical_gait("BP", y_start * lo, rigid), seed_vertical_gait("BP", (y_start - 0.005) * lo, rigid),
               rigid, step=0.005, options=options, integ=integ, name="BP",
               stop_rules=(lambda z, b: "touch-down height" if z.y < 1.001 * lo else None,))
    forks = bp.specials(SpecialKind.PITCHFORK)
    if not forks:
        raise ConvergenceError("no branch point found on the in-place bounding branch")
    ix = Z_NAMES.index("xdot")
    E = max(forks, key=lambda sp: abs(_transverse(bp, sp, rigid, integ)[ix]))
    s1, s2 = switch_branch(bp, E, rigid, sign=1, eps=2.5 * step, integ=integ, orient="xdot")
    b2 = trace(s1, s2, rigid, step=step, options=options, integ=integ, name="B2")
    ref = BoundingReference(bp, b2, E, step)
    _REFERENCE_CACHE[key] = ref
    return ref


def pitchfork_at(ref: PronkingReference, which: str, params: ModelParams, integ: IntegratorOptions = DEFAULT_OPTIONS,
                 back: int = 6):
    """Re-detect PF branch point ``which`` with the given inertia; returns (segment, special point)."""
    sp = ref.branch_point(which)
    i = max(sp.index - back, 0)
    pts = ref.pf.points
    seg = trace(pts[i].z, pts[i + 1].z, params, step=ref.step, integ=integ,
                options=ContinuationOptions(max_points=2 * back + 4, max_swing_reversals=-1))
    forks = seg.specials(SpecialKind.PITCHFORK)
    if not forks:
        raise ConvergenceError(f"branch point {which} not found again at J={params.J:g}")
    return seg, forks[0]


def trace_bounding_side(ref: PronkingReference, which: str, side: str, params: ModelParams,
                        step: float | None = None, stop_rules=(), max_points: int = 3000,
                        integ: IntegratorOptions = DEFAULT_OPTIONS, options: ContinuationOptions | None = None) -> Branch:
    """Follow the desynchronized branch leaving PF branch point ``which`` (C or D).

    ``side`` selects the half on which the front pair is rotated forward of the
    hind pair at apex ("BE") or behind it ("BG").
    """
    from .continuation import switch_branch

    if side not in ("BG", "BE"):
        raise ModelError("side must be 'BG' or 'BE'")
    step = step or ref.step
    seg, sp = pitchfork_at(ref, which, params, integ)
    sign = 1 if side == "BE" else -1
    s1, s2 = switch_branch(seg, sp, params, sign=sign, eps=2.5 * step, integ=integ, orient="alpha_F")
    opts = options or ContinuationOptions()
    opts = ContinuationOptions(**{**opts.__dict__, "max_points": max_points})
    return trace(s1, s2, params, step=step, stop_rules=tuple(stop_rules), options=opts, integ=integ,
                 name=f"{side} from {which}")


def merge_fold(b2: Branch, J: float, params: ModelParams, xdot_start: float = 5.0, step: float = 0.02,
               xdot_floor: float = 1.0, singular_tol: float = 1e-3,
               integ: IntegratorOptions = DEFAULT_OPTIONS):
    """Energy fold at which two-suspension bounding turns onto gathered bounding, just below the merge inertia.

    ``b2`` is the rigid-body two-suspension branch. Two of its gaits near
    ``xdot_start`` on the rising-speed side are carried to inertia ``J`` at fixed
    speed, and the branch is followed towards lower speed up to its first
    energy fold. Returns (branch at J, fold special point). When the trace
    stops on a nearly singular Jacobian before a fold is bracketed, the last
    point (a TERMINATION) stands in for the fold.
    """
    Z = b2.Z
    x = Z[:, Z_NAMES.index("xdot")]
    rising = np.nonzero(np.diff(x) > 0)[0]
    if len(rising) == 0:
        raise ModelError("the two-suspension branch never speeds up")
    i = int(rising[np.argmin(np.abs(x[rising + 1] - xdot_start))]) + 1
    pJ = params.with_inertia(J)
    hi = continue_in_inertia(b2.points[i].z, params.with_inertia(b2.params.J), J, integ=integ)
    lo = continue_in_inertia(b2.points[i - 1].z, params.with_inertia(b2.params.J), J, integ=integ)

    def first_fold(z, branch):
        return "energy fold" if branch.specials(SpecialKind.TURNING) else None

    from .continuation import bounds_rule

    br = trace(hi, lo, pJ, step=step, integ=integ, name=f"B2 at J={J:g}",
               stop_rules=(first_fold, bounds_rule("xdot", lo=xdot_floor)))
    folds = br.specials(SpecialKind.TURNING)
    if folds:
        return br, folds[0]
    # so close to the merge the fold is a hairpin the corrector cannot round; its tip is where the
    # branch stops with a nearly singular Jacobian
    end = br.special[-1] if br.special else None
    if end is not None and end.kind == SpecialKind.TERMINATION and br.points[-1].sigma[0] < singular_tol:
        return br, end
    raise ConvergenceError(f"no fold on the two-suspension branch at J={J:g} ({br.termination})")


# --- structural events ---


def _turnings(branch: Branch) -> list[tuple[float, float, str]]:
    return [(float(s.energy), float(s.z.xdot), s.info.get("extremum")) for s in branch.specials(SpecialKind.TURNING)]


@dataclass
class Probe:
    """Structure of the bounding branches at one inertia value.

    ``c_turnings`` and ``d_turnings`` hold (energy, xdot, "min"|"max") for the
    folds on the gathered-suspension branches leaving C and D.
    """

    J: float
    merged: bool
    c_turnings: list
    c_exit_xdot: float
    d_turnings: list | None = None
    d_end: str = ""

    @property
    def fold_pair_present(self) -> bool:
        """False once the branch from C is monotone in energy and the one from D has a single fold."""
        if self.c_turnings:
            return True
        return self.d_turnings is None or len(self.d_turnings) > 1

    def F1(self) -> float | None:
        """Speed at the fold where the branch from C turns over into two-suspension bounding."""
        if not self.merged:
            return None
        maxima = [x for e, x, k in self.c_turnings if k == "max"]
        return maxima[-1] if maxima else None

    def F2(self) -> float | None:
        """Speed at the high-speed energy minimum joining the branch from D to two-suspension bounding."""
        if not self.merged or not self.d_turnings:
            return None
        minima = [x for e, x, k in self.d_turnings if k == "min"]
        return minima[1] if len(minima) >= 2 and len(self.d_turnings) >= 4 else None

    def to_dict(self) -> dict:
        return {
            "J": self.J, "merged": self.merged, "fold_pair_present": self.fold_pair_present,
            "C_side": {"turnings": self.c_turnings, "exit_xdot": self.c_exit_xdot},
            "D_side": None if self.d_turnings is None else {"turnings": self.d_turnings, "end": self.d_end},
            "F1_xdot": self.F1(), "F2_xdot": self.F2(),
        }


def _reaches(ref: PronkingReference, which: str, step: float | None):
    # the branch has come back to the pronking branch at ``which``
    target = ref.branch_point(which).z.z
    radius = 2 * (step or ref.step)

    def rule(z, branch):
        return f"reached branch point {which}" if len(branch) > 3 and np.linalg.norm(z.z - target) < radius else None

    return rule


def probe(J: float, params: ModelParams, ref: PronkingReference | None = None, step: float | None = None,
          sides: str = "CD", speed_window: tuple[float, float] = (0.3, 6.0), max_speed: float = 12.0,
          integ: IntegratorOptions = DEFAULT_OPTIONS) -> Probe:
    """Trace the gathered-suspension branches from C (and D) at inertia J.

    The branch from C is followed until its speed leaves ``speed_window``.
    Leaving at low speed means it has joined two-suspension bounding
    (merged); leaving at high speed means it runs on towards D.
    """
    from .continuation import bounds_rule

    ref = ref or pronking_reference(params, integ=integ)
    pJ = params.with_inertia(J)
    br = trace_bounding_side(ref, "C", "BG", pJ, step=step,
                             stop_rules=(bounds_rule("xdot", *speed_window),), integ=integ)
    x_end = float(br.points[-1].z.xdot)
    lo, hi = speed_window
    pr = Probe(J, abs(x_end - lo) < abs(x_end - hi), _turnings(br), x_end)
    if "D" in sides:
        bd = trace_bounding_side(ref, "D", "BG", pJ, step=step,
                                 stop_rules=(bounds_rule("xdot", lo, max_speed), _reaches(ref, "C", step)), integ=integ)
        pr.d_turnings, pr.d_end = _turnings(bd), bd.termination
    log.info("probe J=%g merged=%s C folds=%d D folds=%s", J, pr.merged, len(pr.c_turnings),
             None if pr.d_turnings is None else len(pr.d_turnings))
    return pr


class BracketError(ModelError):
    """Both ends of a bisection bracket show the same structure."""

    def __init__(self, message, probes):
        super().__init__(message)
        self.probes = probes


EVENTS = {
    # (sides to trace, predicate that holds on the low-inertia side of the event)
    "merge": ("C", lambda pr: pr.merged),
    "turning_points": ("CD", lambda pr: not pr.fold_pair_present),
}


def find_critical_inertia(event_kind: str, J_bracket: tuple[float, float], params: ModelParams,
                          tol: float = 5e-3, step: float | None = None, ref: PronkingReference | None = None,
                          integ: IntegratorOptions = DEFAULT_OPTIONS, probes: list | None = None) -> float:
    """Bisect on J for the inertia at which a structural event happens.

    ``merge``: below the critical value the gathered-suspension branch from C
    no longer runs on to D but joins two-suspension bounding.
    ``turning_points``: below the critical value the branch from C is monotone
    in energy and the branch from D keeps a single fold. Returns the bracket midpoint once the
    bracket is narrower than ``tol``.
    """
    if event_kind not in EVENTS:
        raise ModelError(f"unknown event kind {event_kind!r}; choose from {sorted(EVENTS)}")
    sides, pred = EVENTS[event_kind]
    lo, hi = sorted(J_bracket)
    ref = ref or pronking_reference(params, integ=integ)
    probes = probes if probes is not None else []

    def below(J):
        pr = probe(J, params, ref, step, sides=sides, integ=integ)
        probes.append(pr)
        return pred(pr)

    at_lo, at_hi = below(lo), below(hi)  # probe both ends so a bad bracket reports both structures
    if not at_lo or at_hi:
        raise BracketError(f"bracket [{lo:g}, {hi:g}] does not straddle the {event_kind} event", probes[-2:])
    while hi - lo >= tol:
        mid = 0.5 * (lo + hi)
        if below(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# --- censuses ---

REGIMES = {
    "separate": "gathered, extended and two-suspension bounding are distinct branches",
    "merged": "two-suspension and gathered bounding form one branch with an extra fold pair",
    "no_fold_pair": "branch from C monotone in energy, single fold on the branch from D",
}


def regime(pr: Probe) -> str:
    if not pr.merged:
        return "separate"
    return "merged" if pr.fold_pair_present else "no_fold_pair"


@dataclass
class SweepReport:
    params: ModelParams
    probes: list = field(default_factory=list)
    critical: dict = field(default_factory=dict)
    pronking_invariant: bool | None = None
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        census = []
        for pr in sorted(self.probes, key=lambda p: -p.J):
            d = pr.to_dict()
            d["J"] = "inf" if math.isinf(pr.J) else pr.J
            d["regime"] = regime(pr)
            census.append(d)
        return {"params": {k: (v if not isinstance(v, float) or math.isfinite(v) else "inf")
                           for k, v in self.params.to_mapping().items()},
                "census": census, "critical_inertia": self.critical,
                "pronking_inertia_independent": self.pronking_invariant, "notes": self.notes}

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")


def pronking_invariance(ref: PronkingReference, J_values, params: ModelParams, tol: float = 1e-9,
                        every: int = 25, integ: IntegratorOptions = DEFAULT_OPTIONS) -> float:
    """Largest boundary residual of the rigid-body pronking solutions re-evaluated at other inertias."""
    from .shoot import residual

    worst = 0.0
    for J in J_values:
        pJ = params.with_inertia(J)
        for pt in ref.pf.points[::every] + ref.pp.points[::every]:
            worst = max(worst, float(np.max(np.abs(residual(pt.z, pJ, integ)))))
    return worst


def census(J_values, params: ModelParams, ref: PronkingReference | None = None, step: float | None = None,
           integ: IntegratorOptions = DEFAULT_OPTIONS) -> SweepReport:
    """Probe the bounding-branch structure at each inertia in ``J_values``."""
    ref = ref or pronking_reference(params, integ=integ)
    rep = SweepReport(params)
    for J in J_values:
        rep.probes.append(probe(J, params, ref, step, integ=integ))
    finite = [J for J in J_values if math.isfinite(J)]
    if finite:
        rep.pronking_invariant = pronking_invariance(ref, finite, params, integ=integ) < 1e-9
    return rep


def fold_drift(probes: list[Probe]) -> dict:
    """Check that, as J decreases, F1 moves to lower and F2 to higher speeds."""
    pts = sorted((p for p in probes if p.F1() is not None and p.F2() is not None), key=lambda p: -p.J)
    f1 = [p.F1() for p in pts]
    f2 = [p.F2() for p in pts]
    return {"J": [p.J for p in pts], "F1_xdot": f1, "F2_xdot": f2,
            "F1_decreasing": all(a > b for a, b in zip(f1, f1[1:])),
            "F2_increasing": all(a < b for a, b in zip(f2, f2[1:]))}
