"""Analytic seed gaits, gait classification and symmetry oracles."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .integrate import DEFAULT_OPTIONS, EventSchedule, IntegratorOptions
from .model import ModelError, ModelParams
from .shoot import SolutionVector, as_array


class GaitKind(str, enum.Enum):
    PP = "PP"
    BP = "BP"
    PE = "PE"
    PG = "PG"
    PF = "PF"
    BG = "BG"
    BE = "BE"
    B2 = "B2"
    UNKNOWN = "UNKNOWN"


def _vertical_pieces(apex, params, pairs):
    """Flight fall time and stance duration of a purely vertical bounce."""
    M, g, lo, k = params.M, params.g, params.l_o, params.k_leg * pairs
    t_fall = math.sqrt(2 * (apex - lo) / g)
    v = g * t_fall
    w = math.sqrt(k / M)
    u0 = M * g / k  # touch-down height above the loaded equilibrium
    amp = math.hypot(u0, v / w)
    c = math.acos(u0 / amp)
    return t_fall, (2 * math.pi - 2 * c) / w


def seed_vertical_gait(kind: str, apex_height: float, params: ModelParams) -> SolutionVector:
    """Closed-form in-place pronking (PP) or bounding (BP) gait.

    Flight is a ballistic fall from the apex; stance is a harmonic oscillation of
    the body on one (BP) or both (PP) leg pairs about their loaded equilibrium.
    BP puts the hind stance in the first half of the stride and the front stance
    in the second.
    """
    kind = GaitKind(kind)
    lo = params.l_o
    if kind == GaitKind.PP:
        hmax = 2 * params.k_leg * lo**2 / (2 * params.M * params.g)
    elif kind == GaitKind.BP:
        hmax = params.k_leg * lo**2 / (2 * params.M * params.g)
    else:
        raise ModelError(f"no closed-form seed for {kind.value}")
    if not lo < apex_height < hmax:
        raise ModelError(f"apex height {apex_height} outside ({lo}, {hmax}) for {kind.value}")
    if not params.rigid and kind == GaitKind.BP:
        raise ModelError("the in-place bounding seed needs infinite body inertia")
    if kind == GaitKind.PP:
        tf, ts = _vertical_pieces(apex_height, params, 2)
        return SolutionVector.from_parts(apex_height, t_Htd=tf, t_Hlo=tf + ts, t_Ftd=tf, t_Flo=tf + ts,
                                         t_stride=2 * tf + ts)
    tf, ts = _vertical_pieces(apex_height, params, 1)
    return SolutionVector.from_parts(apex_height, t_Htd=tf, t_Hlo=tf + ts, t_Ftd=3 * tf + ts,
                                     t_Flo=3 * tf + 2 * ts, t_stride=4 * tf + 2 * ts)


SUSPENSIONS = ("none", "gathered", "extended", "two")

# a second flight of the opposite posture counts as a suspension of its own
# once it lasts at least this fraction of the longest flight
TWO_SUSPENSION_RATIO = 0.25


@dataclass(frozen=True)
class GaitLabel:
    kind: GaitKind
    suspension: str = "none"
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __str__(self):
        return self.kind.value


def _flights(schedule: EventSchedule) -> list[tuple[float, float]]:
    """Intervals of one stride (as start, duration) with no leg on the ground, merged across the stride wrap."""
    T = schedule.t_stride
    cF, cH = (int(c) for c in schedule.initial_contact())
    events = sorted(
        [(schedule.t_Ftd, 0, 1), (schedule.t_Flo, 0, 0), (schedule.t_Htd, 1, 1), (schedule.t_Hlo, 1, 0)]
    )
    contact = [cF, cH]
    out = []
    t_prev = 0.0
    for t, leg, value in events + [(T, -1, 0)]:
        if t > t_prev and not any(contact):
            out.append([t_prev, t - t_prev])
        if leg >= 0:
            contact[leg] = value
        t_prev = max(t_prev, t)
    if len(out) > 1 and out[0][0] == 0.0 and abs(out[-1][0] + out[-1][1] - T) < 1e-12 * T:
        first = out.pop(0)
        out[-1][1] += first[1]
    return [tuple(f) for f in out]


def synchronized(Z: SolutionVector, rel_tol: float = 1e-6) -> bool:
    """Front and hind pairs touch down and lift off together (modulo the stride)."""
    T = Z.t_stride

    def gap(a, b):
        d = (a - b) % T
        return min(d, T - d)

    return gap(Z.t_Htd, Z.t_Ftd) < rel_tol * T and gap(Z.t_Hlo, Z.t_Flo) < rel_tol * T


def classify(solution: SolutionVector, params: ModelParams, trajectory=None, speed_tol: float = 1e-6,
             angle_tol: float = 1e-6) -> GaitLabel:
    """Gait taxonomy from the footfall schedule and the leg posture in flight.

    A flight is "extended" when the feet of the two pairs point away from each
    other (front pair towards the front of the body) and "gathered" otherwise.
    This is a property of the body frame, so it survives a reversal of travel.
    Moving staggered gaits are B2 when both postures occur in flights of
    comparable length, else BE/BG by the posture of the longest flight.
    """
    Z = solution if isinstance(solution, SolutionVector) else SolutionVector(solution)
    diag = {}
    try:
        sched = Z.schedule()
    except ModelError as exc:
        return GaitLabel(GaitKind.UNKNOWN, "none", {"error": str(exc)})
    sync = synchronized(Z)
    flights = _flights(sched)
    diag.update(synchronized=sync, flights=flights)
    moving = abs(Z.xdot) > speed_tol * math.sqrt(params.g * params.l_o)
    spread = Z.alpha_F - Z.alpha_H
    if not moving:
        if sync:
            if max(abs(Z.alpha_F), abs(Z.alpha_H), abs(Z.alphadot_F), abs(Z.alphadot_H)) < angle_tol:
                return GaitLabel(GaitKind.PP, "none" if not flights else "gathered", diag)
            if abs(spread) < angle_tol:
                return GaitLabel(GaitKind.UNKNOWN, "none", diag)
            return (GaitLabel(GaitKind.PE, "extended", diag) if spread > 0
                    else GaitLabel(GaitKind.PG, "gathered", diag))
        return GaitLabel(GaitKind.BP, "two" if len(flights) == 2 else "none", diag)
    if sync:
        return GaitLabel(GaitKind.PF, "none", diag)
    if not flights:
        return GaitLabel(GaitKind.UNKNOWN, "none", diag)
    # posture of every flight: feet spread apart (extended) or drawn under the body (gathered)
    if trajectory is None:
        from .integrate import integrate_timed

        trajectory = integrate_timed(Z.initial_state(params), sched, params)
    postures = []
    for start, dur in flights:
        aF, aH = _angles_at(Z, params, (start + 0.5 * dur) % sched.t_stride, trajectory)
        postures.append((dur, aF - aH))
    diag["flight_postures"] = postures
    ext = [d for d, e in postures if e > angle_tol]
    gath = [d for d, e in postures if e < -angle_tol]
    if ext and gath and min(max(ext), max(gath)) >= TWO_SUSPENSION_RATIO * max(ext + gath):
        return GaitLabel(GaitKind.B2, "two", diag)
    dur, e = max(postures)
    if abs(e) <= angle_tol:
        return GaitLabel(GaitKind.UNKNOWN, "none", diag)
    return GaitLabel(GaitKind.BE, "extended", diag) if e > 0 else GaitLabel(GaitKind.BG, "gathered", diag)


def _angles_at(Z, params, t, trajectory=None):
    from .integrate import integrate_timed

    traj = trajectory if trajectory is not None else integrate_timed(Z.initial_state(params), Z.schedule(), params)
    aF = float(np.interp(t, traj.t, traj.states[:, 3]))
    aH = float(np.interp(t, traj.t, traj.states[:, 4]))
    return aF, aH


def label_function(params: ModelParams):
    """Callable suitable as ``label_fn`` for branch tracing."""
    return lambda z: str(classify(z, params))


def mirror(solution: SolutionVector) -> SolutionVector:
    """Backward-moving image: reverse the direction of travel and exchange front and hind pairs.

    Positions are mirrored about the vertical, which negates x velocity, pitch
    and leg angles; the front pair takes the role of the hind pair.
    """
    Z = solution if isinstance(solution, SolutionVector) else SolutionVector(solution)
    return SolutionVector.from_parts(
        Z.y, phi=-Z.phi, alpha_F=-Z.alpha_H, alpha_H=-Z.alpha_F, xdot=-Z.xdot, phidot=-Z.phidot,
        alphadot_F=-Z.alphadot_H, alphadot_H=-Z.alphadot_F,
        t_Htd=Z.t_Ftd, t_Hlo=Z.t_Flo, t_Ftd=Z.t_Htd, t_Flo=Z.t_Hlo, t_stride=Z.t_stride,
    )


def leg_exchange(solution: SolutionVector) -> SolutionVector:
    """Swap the roles of the front and hind pairs keeping the direction of travel.

    With a rigid body the pairs only differ in where they are mounted, which
    does not enter the dynamics, so the image of a gait is again a gait.
    """
    Z = solution if isinstance(solution, SolutionVector) else SolutionVector(solution)
    return Z.copy_with(alpha_F=Z.alpha_H, alpha_H=Z.alpha_F, alphadot_F=Z.alphadot_H, alphadot_H=Z.alphadot_F,
                       t_Htd=Z.t_Ftd, t_Hlo=Z.t_Flo, t_Ftd=Z.t_Htd, t_Flo=Z.t_Hlo)


@dataclass
class CorrespondenceReport:
    deviation: float
    com_deviation: float
    samples: int

    @property
    def ok(self) -> bool:
        return self.deviation < 1e-6


def biped_correspondence_check(quad_solution: SolutionVector, params: ModelParams,
                               options: IntegratorOptions = DEFAULT_OPTIONS) -> CorrespondenceReport:
    """Compare a rigid-body gait with the same motion of a biped whose hips sit at the centre of mass.

    The front pair plays the left leg and the hind pair the right leg; the
    report holds the sup-norm deviation of all states over one stride.
    """
    if not params.rigid:
        raise ModelError("the bipedal correspondence only holds for infinite body inertia")
    from .integrate import integrate_timed

    Z = quad_solution if isinstance(quad_solution, SolutionVector) else SolutionVector(quad_solution)
    biped = replace(params, l_bF=0.0, l_bH=0.0)
    a = integrate_timed(Z.initial_state(params), Z.schedule(), params, options)
    b = integrate_timed(Z.initial_state(biped), Z.schedule(), biped, options)
    # compare on the quadruped's samples, within each contact interval
    dev = com = 0.0
    for k in range(10):
        yb = np.interp(a.t, b.t, b.states[:, k])
        # interpolation across a reset would mix pre- and post-event values
        mask = np.ones(len(a.t), bool)
        for t_ev, _ in a.events:
            mask &= np.abs(a.t - t_ev) > 1e-9
        err = np.max(np.abs(a.states[mask, k] - yb[mask]))
        dev = max(dev, err)
        if k < 2:
            com = max(com, err)
    dev = max(dev, float(np.max(np.abs(a.final - b.final))))
    return CorrespondenceReport(dev, com, len(a.t))


def symmetry_check_PE_PG(sol_PE: SolutionVector, sol_PG: SolutionVector, params: ModelParams,
                         tol: float = 1e-6, options: IntegratorOptions = DEFAULT_OPTIONS) -> bool:
    """True when hind leg motion on one gait equals front leg motion on the other (and vice versa)."""
    from .integrate import integrate_timed

    a = sol_PE if isinstance(sol_PE, SolutionVector) else SolutionVector(sol_PE)
    b = sol_PG if isinstance(sol_PG, SolutionVector) else SolutionVector(sol_PG)
    if abs(a.y - b.y) > 1e-8:
        raise ModelError(f"apex heights differ: {a.y} vs {b.y}")
    ta = integrate_timed(a.initial_state(params), a.schedule(), params, options)
    tb = integrate_timed(b.initial_state(params), b.schedule(), params, options)
    grid = np.linspace(0.0, min(a.t_stride, b.t_stride), 2001)[1:-1]
    cut = np.ones(len(grid), bool)
    for t_ev in list(a.times) + list(b.times):
        cut &= np.abs(grid - t_ev) > 1e-6
    grid = grid[cut]
    worst = 0.0
    for ka, kb in ((4, 3), (3, 4), (9, 8), (8, 9), (1, 1)):
        va = np.interp(grid, ta.t, ta.states[:, ka])
        vb = np.interp(grid, tb.t, tb.states[:, kb])
        worst = max(worst, float(np.max(np.abs(va - vb))))
    return worst < tol


def bg_be_exchange_deviation(sol_BG: SolutionVector, sol_BE: SolutionVector) -> float:
    """Distance between one rigid-body gait and the front/hind exchange of the other."""
    return float(np.max(np.abs(leg_exchange(sol_BG).z - as_array(sol_BE))))


def keyframes(solution: SolutionVector, params: ModelParams, options: IntegratorOptions = DEFAULT_OPTIONS) -> list[dict]:
    """States at the apex, at every footfall event and at the stride end, for rendering."""
    from .integrate import integrate_timed

    Z = solution if isinstance(solution, SolutionVector) else SolutionVector(solution)
    traj = integrate_timed(Z.initial_state(params), Z.schedule(), params, options)
    names = ("x", "y", "phi", "alpha_F", "alpha_H", "xdot", "ydot", "phidot", "alphadot_F", "alphadot_H")
    frames = []

    def add(tag, i):
        d = {"event": tag, "t": float(traj.t[i])}
        d.update({n: float(v) for n, v in zip(names, traj.states[i])})
        d["contact_F"], d["contact_H"] = (int(c) for c in traj.contact[i])
        for leg, key in ((0, "foot_F"), (1, "foot_H")):
            f = traj.footholds[i, leg]
            d[key] = None if np.isnan(f) else float(f)
        frames.append(d)

    add("apex", 0)
    for t_ev, name in traj.events:
        # the sample just after the switch
        idx = np.nonzero(np.isclose(traj.t, t_ev, rtol=0, atol=1e-12))[0]
        if len(idx):
            add(name, int(idx[-1]))
    add("apex_end", len(traj.t) - 1)
    return frames
