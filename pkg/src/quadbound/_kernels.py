"""Compiled inner loops: hybrid vector field, resets and a Dormand-Prince integrator.

Everything here works on flat float arrays so numba can compile it.

State layout (10): x, y, phi, alpha_F, alpha_H, and the five rates in the same
order. Leg index 0 is the front pair, 1 the hind pair. Parameter layout is
given by the ``P_*`` constants.
"""

import math

import numpy as np
from numba import njit
from scipy.integrate._ivp.rk import RK45

P_M, P_G, P_LO, P_K, P_W2, P_LBF, P_LBH, P_INVJ, P_J = range(9)
N_PARAMS = 9

OK = 0
ERR_COMPRESSION = 1
ERR_GEOMETRY = 2
ERR_MAX_STEPS = 3
ERR_STEP_SIZE = 4
ERR_GROUND = 5
ERR_NONFINITE = 6
ERR_EVENT = 7

STATUS_NAMES = {
    OK: "ok",
    ERR_COMPRESSION: "leg over-compression",
    ERR_GEOMETRY: "singular stance geometry",
    ERR_MAX_STEPS: "maximum number of steps exceeded",
    ERR_STEP_SIZE: "step size underflow",
    ERR_GROUND: "body ground strike",
    ERR_NONFINITE: "non-finite state",
    ERR_EVENT: "invalid event",
}

# event kinds, in the tie-break order used for simultaneous events
EV_HTD, EV_HLO, EV_FTD, EV_FLO = 0, 1, 2, 3
EV_LEG = np.array([1, 1, 0, 0])
EV_IS_TD = np.array([True, False, True, False])

MIN_LEG_FRACTION = 0.01

_C = np.ascontiguousarray(RK45.C, dtype=np.float64)
_A = np.ascontiguousarray(RK45.A, dtype=np.float64)
_B = np.ascontiguousarray(RK45.B, dtype=np.float64)
_E = np.ascontiguousarray(RK45.E, dtype=np.float64)
_P = np.ascontiguousarray(RK45.P, dtype=np.float64)


@njit(cache=True)
def hip(s, leg, p):
    b = p[P_LBF + leg]
    return s[0] + b * math.cos(s[2]), s[1] + b * math.sin(s[2])


@njit(cache=True)
def stance_length(s, leg, foot, p):
    hx, hy = hip(s, leg, p)
    dx = foot - hx
    return math.sqrt(dx * dx + hy * hy)


@njit(cache=True)
def rhs(s, contact, foot, p, out):
    """Evaluate d/dt of the 10-state. Returns a status code."""
    M = p[P_M]
    g = p[P_G]
    lo = p[P_LO]
    k = p[P_K]
    invJ = p[P_INVJ]
    x = s[0]
    y = s[1]
    phi = s[2]
    xd = s[5]
    yd = s[6]
    phid = s[7]
    c = math.cos(phi)
    sn = math.sin(phi)
    Fx = 0.0
    Fy = 0.0
    tau = 0.0
    for leg in range(2):
        if contact[leg]:
            b = p[P_LBF + leg]
            hx = x + b * c
            hy = y + b * sn
            if hy <= 0.0:
                return ERR_GEOMETRY
            dx = foot[leg] - hx
            ln = math.sqrt(dx * dx + hy * hy)
            if ln < MIN_LEG_FRACTION * lo:
                return ERR_COMPRESSION
            f = k * (lo - ln)
            fx = -f * dx / ln
            fy = f * hy / ln
            Fx += fx
            Fy += fy
            tau += b * (c * fy - sn * fx)
    xdd = Fx / M
    ydd = Fy / M - g
    phdd = tau * invJ
    for i in range(5):
        out[i] = s[5 + i]
    out[5] = xdd
    out[6] = ydd
    out[7] = phdd
    phid2 = phid * phid
    for leg in range(2):
        b = p[P_LBF + leg]
        a = s[3 + leg]
        if contact[leg]:
            hx = x + b * c
            hy = y + b * sn
            dx = foot[leg] - hx
            hxd = xd - b * sn * phid
            hyd = yd + b * c * phid
            hxdd = xdd - b * sn * phdd - b * c * phid2
            hydd = ydd + b * c * phdd - b * sn * phid2
            L2 = dx * dx + hy * hy
            num = -hy * hxd - dx * hyd
            numd = -hy * hxdd - dx * hydd
            L2d = 2.0 * (-dx * hxd + hy * hyd)
            out[8 + leg] = (numd * L2 - num * L2d) / (L2 * L2) - phdd
        else:
            th = a + phi
            out[8 + leg] = (
                -phdd
                - (
                    math.cos(th) * xdd
                    + math.sin(th) * (g + ydd)
                    + b * math.sin(a) * phdd
                    - b * math.cos(a) * phid2
                )
                / lo
                - p[P_W2] * a
            )
    for i in range(10):
        if not math.isfinite(out[i]):
            return ERR_NONFINITE
    return OK


@njit(cache=True)
def energy(s, contact, foot, p):
    M = p[P_M]
    e = M * p[P_G] * s[1] + 0.5 * M * (s[5] * s[5] + s[6] * s[6])
    if p[P_INVJ] > 0.0:
        e += 0.5 * p[P_J] * s[7] * s[7]
    for leg in range(2):
        if contact[leg]:
            d = p[P_LO] - stance_length(s, leg, foot[leg], p)
            e += 0.5 * p[P_K] * d * d
    return e


@njit(cache=True)
def extension_gap(s, leg, p):
    """Height of the fully extended foot above ground."""
    _, hy = hip(s, leg, p)
    return hy - p[P_LO] * math.cos(s[2] + s[3 + leg])


@njit(cache=True)
def touchdown(s, leg, p):
    """Zero the foot's horizontal velocity; returns (foothold, new alpha rate, cos(theta))."""
    phi = s[2]
    phid = s[7]
    b = p[P_LBF + leg]
    hx = s[0] + b * math.cos(phi)
    hy = s[1] + b * math.sin(phi)
    hxd = s[5] - b * math.sin(phi) * phid
    hyd = s[6] + b * math.cos(phi) * phid
    th = s[3 + leg] + phi
    ct = math.cos(th)
    tt = math.tan(th)
    foot = hx + hy * tt
    thd = -ct * ct * (hxd + tt * hyd) / hy
    return foot, thd - phid, ct


@njit(cache=True)
def foot_vertical_rate(s, leg, p):
    """Vertical velocity of the fully extended swing foot."""
    phi = s[2]
    b = p[P_LBF + leg]
    hyd = s[6] + b * math.cos(phi) * s[7]
    th = s[3 + leg] + phi
    return hyd + p[P_LO] * math.sin(th) * (s[8 + leg] + s[7])


@njit(cache=True)
def _stage(s, h, K, contact, foot, p, tmp):
    # fills K[1..6] given K[0]; returns status, writes y_new into tmp row 0
    n = s.shape[0]
    for st in range(1, 6):
        for i in range(n):
            acc = 0.0
            for j in range(st):
                acc += _A[st, j] * K[j, i]
            tmp[1, i] = s[i] + h * acc
        status = rhs(tmp[1], contact, foot, p, K[st])
        if status != OK:
            return status
    for i in range(n):
        acc = 0.0
        for j in range(6):
            acc += _B[j] * K[j, i]
        tmp[0, i] = s[i] + h * acc
    return rhs(tmp[0], contact, foot, p, K[6])


@njit(cache=True)
def _err_norm(s, ynew, h, K, rtol, atol):
    n = s.shape[0]
    acc = 0.0
    for i in range(n):
        e = 0.0
        for j in range(7):
            e += _E[j] * K[j, i]
        e *= h
        sc = atol + rtol * max(abs(s[i]), abs(ynew[i]))
        acc += (e / sc) ** 2
    return math.sqrt(acc / n)


@njit(cache=True)
def _dense(s, h, K, theta, out):
    n = s.shape[0]
    t1 = theta
    t2 = theta * theta
    t3 = t2 * theta
    t4 = t3 * theta
    for i in range(n):
        q = 0.0
        for j in range(7):
            kj = K[j, i]
            q += kj * (_P[j, 0] * t1 + _P[j, 1] * t2 + _P[j, 2] * t3 + _P[j, 3] * t4)
        out[i] = s[i] + h * q


@njit(cache=True)
def _record(t, s, contact, rec_t, rec_s, rec_c, n_rec):
    if n_rec < rec_t.shape[0]:
        rec_t[n_rec] = t
        rec_s[n_rec, :] = s
        rec_c[n_rec, 0] = contact[0]
        rec_c[n_rec, 1] = contact[1]
        return n_rec + 1
    return n_rec


@njit(cache=True)
def integrate_interval(s, t0, t1, contact, foot, p, rtol, atol, h, max_steps,
                       rec_t, rec_s, rec_c, n_rec):
    """Advance ``s`` in place from t0 to exactly t1 with fixed contacts.

    Returns (status, suggested next step, number of recorded samples).
    """
    n = s.shape[0]
    K = np.empty((7, n))
    tmp = np.empty((2, n))
    t = t0
    if t1 <= t0:
        return OK, h, n_rec
    status = rhs(s, contact, foot, p, K[0])
    if status != OK:
        return status, h, n_rec
    span = t1 - t0
    if h <= 0.0 or not math.isfinite(h):
        h = 0.01 * span
    steps = 0
    while t < t1:
        last = False
        if t + h >= t1 - 1e-14 * max(1.0, abs(t1)):
            h_try = t1 - t
            last = True
        else:
            h_try = h
        status = _stage(s, h_try, K, contact, foot, p, tmp)
        if status != OK:
            if h_try < 1e-14:
                return status, h, n_rec
            h = 0.25 * h_try
            steps += 1
            if steps > max_steps:
                return ERR_MAX_STEPS, h, n_rec
            continue
        err = _err_norm(s, tmp[0], h_try, K, rtol, atol)
        steps += 1
        if steps > max_steps:
            return ERR_MAX_STEPS, h, n_rec
        if err <= 1.0:
            for i in range(n):
                s[i] = tmp[0, i]
                K[0, i] = K[6, i]
            t = t1 if last else t + h_try
            n_rec = _record(t, s, contact, rec_t, rec_s, rec_c, n_rec)
            fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            if not last or fac < 1.0:
                h = h_try * fac
        else:
            h = h_try * max(0.2, 0.9 * err ** -0.2)
            if h < 1e-14 * max(1.0, abs(t)):
                return ERR_STEP_SIZE, h, n_rec
    return OK, h, n_rec


@njit(cache=True)
def apply_touchdown(s, leg, contact, foot, p):
    f, ad, ct = touchdown(s, leg, p)
    if ct <= 0.0 or not math.isfinite(f):
        return ERR_GEOMETRY
    foot[leg] = f
    s[8 + leg] = ad
    contact[leg] = 1
    return OK


@njit(cache=True)
def event_order(times, T):
    """Event times folded into [0, T) and the processing order."""
    tt = np.empty(4)
    for i in range(4):
        v = times[i] % T
        if v < 0.0:
            v += T
        if v >= T:
            v = 0.0
        tt[i] = v
    order = np.argsort(tt, kind="mergesort")
    return tt, order


@njit(cache=True)
def run_timed(s0, times, T, p, rtol, atol, max_steps, rec_t, rec_s, rec_c):
    """Integrate one stride with prescribed event times.

    Returns status, end state, pre-event states (4 x 10, rows in event-kind order),
    failure time, number of recorded samples, and footholds at the end.
    """
    s = s0.copy()
    ev_states = np.full((4, 10), np.nan)
    contact = np.zeros(2, dtype=np.int64)
    foot = np.zeros(2)
    tt, order = event_order(times, T)
    # a leg whose lift-off precedes its touch-down is in stance at t=0
    n_rec = 0
    if tt[EV_FLO] < tt[EV_FTD]:
        if apply_touchdown(s, 0, contact, foot, p) != OK:
            return ERR_GEOMETRY, s, ev_states, 0.0, n_rec, foot
    if tt[EV_HLO] < tt[EV_HTD]:
        if apply_touchdown(s, 1, contact, foot, p) != OK:
            return ERR_GEOMETRY, s, ev_states, 0.0, n_rec, foot
    n_rec = _record(0.0, s, contact, rec_t, rec_s, rec_c, n_rec)
    t = 0.0
    h = -1.0
    for j in range(4):
        kind = order[j]
        te = tt[kind]
        if te > t:
            status, h, n_rec = integrate_interval(s, t, te, contact, foot, p, rtol, atol, h,
                                                  max_steps, rec_t, rec_s, rec_c, n_rec)
            if status != OK:
                return status, s, ev_states, t, n_rec, foot
            t = te
        ev_states[kind, :] = s
        leg = EV_LEG[kind]
        if EV_IS_TD[kind]:
            if apply_touchdown(s, leg, contact, foot, p) != OK:
                return ERR_GEOMETRY, s, ev_states, t, n_rec, foot
        else:
            contact[leg] = 0
        n_rec = _record(t, s, contact, rec_t, rec_s, rec_c, n_rec)
    status, h, n_rec = integrate_interval(s, t, T, contact, foot, p, rtol, atol, h,
                                          max_steps, rec_t, rec_s, rec_c, n_rec)
    if status != OK:
        return status, s, ev_states, t, n_rec, foot
    return OK, s, ev_states, T, n_rec, foot


@njit(cache=True)
def _event_fn(s, leg, contact, foot, p):
    # positive before the event, crosses zero at the event
    if contact[leg]:
        return p[P_LO] - stance_length(s, leg, foot[leg], p)
    return extension_gap(s, leg, p)


@njit(cache=True)
def _leading(s, leg, p):
    # a swing foot only lands when the leg points along the direction of travel;
    # crossings behind the hip (just after lift-off) are swing-through, not contact
    v = s[5]
    if abs(v) < 1e-9:
        return True
    return (s[3 + leg] + s[2]) * v >= 0.0


@njit(cache=True)
def _locate(s, h, K, leg, contact, foot, p, g0, g1, ttol):
    # Illinois-modified regula falsi on the dense output, bracket [0, 1] in step fraction
    buf = np.empty(s.shape[0])
    a = 0.0
    b = 1.0
    ga = g0
    gb = g1
    side = 0
    for _ in range(200):
        if (b - a) * h < ttol:
            break
        m = (a * gb - b * ga) / (gb - ga)
        if not (a < m < b):
            m = 0.5 * (a + b)
        _dense(s, h, K, m, buf)
        gm = _event_fn(buf, leg, contact, foot, p)
        if gm > 0.0:
            a = m
            ga = gm
            if side == 1:
                gb *= 0.5
            side = 1
        else:
            b = m
            gb = gm
            if side == -1:
                ga *= 0.5
            side = -1
    return b


@njit(cache=True)
def run_free(s0, contact0, foot0, duration, p, rtol, atol, max_steps, ttol, ev_tol,
             rec_t, rec_s, rec_c, ev_t, ev_k):
    """Event-driven forward simulation.

    Touch-down: a swing foot's extension gap crosses zero from above while
    the leg points along the direction of travel.
    Lift-off: a stance leg's length returns to rest length. Event times are
    located on the dense output to ``ttol`` and the step is then recomputed
    exactly up to the event.
    """
    n = 10
    s = s0.copy()
    contact = contact0.copy()
    foot = foot0.copy()
    K = np.empty((7, n))
    tmp = np.empty((2, n))
    t = 0.0
    n_rec = _record(t, s, contact, rec_t, rec_s, rec_c, 0)
    n_ev = 0
    status = rhs(s, contact, foot, p, K[0])
    if status != OK:
        return status, t, s, contact, foot, n_rec, n_ev
    h = 1e-3
    steps = 0
    g_old = np.empty(2)
    for leg in range(2):
        g_old[leg] = _event_fn(s, leg, contact, foot, p)
    while t < duration:
        last = False
        if t + h >= duration:
            h_try = duration - t
            last = True
        else:
            h_try = h
        status = _stage(s, h_try, K, contact, foot, p, tmp)
        steps += 1
        if steps > max_steps:
            return ERR_MAX_STEPS, t, s, contact, foot, n_rec, n_ev
        if status != OK:
            if h_try < 1e-12:
                return status, t, s, contact, foot, n_rec, n_ev
            h = 0.25 * h_try
            continue
        err = _err_norm(s, tmp[0], h_try, K, rtol, atol)
        if err > 1.0:
            h = h_try * max(0.2, 0.9 * err ** -0.2)
            if h < 1e-14:
                return ERR_STEP_SIZE, t, s, contact, foot, n_rec, n_ev
            continue
        # accepted step; look for the earliest event inside it
        best = 2.0
        best_leg = -1
        for leg in range(2):
            g1 = _event_fn(tmp[0], leg, contact, foot, p)
            if not contact[leg] and not _leading(tmp[0], leg, p):
                continue
            if g_old[leg] > 0.0 and g1 <= 0.0:
                th = _locate(s, h_try, K, leg, contact, foot, p, g_old[leg], g1, ttol)
                if th < best:
                    best = th
                    best_leg = leg
        if best_leg < 0:
            for i in range(n):
                s[i] = tmp[0, i]
                K[0, i] = K[6, i]
            t = duration if last else t + h_try
            for leg in range(2):
                g_old[leg] = _event_fn(s, leg, contact, foot, p)
            n_rec = _record(t, s, contact, rec_t, rec_s, rec_c, n_rec)
            fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            h = h_try * fac
        else:
            h_ev = best * h_try
            status = _stage(s, h_ev, K, contact, foot, p, tmp)
            if status != OK:
                return status, t, s, contact, foot, n_rec, n_ev
            for i in range(n):
                s[i] = tmp[0, i]
            t = t + h_ev
            n_rec = _record(t, s, contact, rec_t, rec_s, rec_c, n_rec)
            for leg in range(2):
                gl = _event_fn(s, leg, contact, foot, p)
                fire = leg == best_leg or abs(gl) < ev_tol
                if not fire:
                    continue
                if contact[leg]:
                    contact[leg] = 0
                    kind = EV_FLO if leg == 0 else EV_HLO
                else:
                    if leg != best_leg and not _leading(s, leg, p):
                        continue
                    if foot_vertical_rate(s, leg, p) > 0.0:
                        if leg == best_leg:
                            return ERR_EVENT, t, s, contact, foot, n_rec, n_ev
                        continue
                    if apply_touchdown(s, leg, contact, foot, p) != OK:
                        return ERR_GEOMETRY, t, s, contact, foot, n_rec, n_ev
                    kind = EV_FTD if leg == 0 else EV_HTD
                if n_ev < ev_t.shape[0]:
                    ev_t[n_ev] = t
                    ev_k[n_ev] = kind
                    n_ev += 1
            n_rec = _record(t, s, contact, rec_t, rec_s, rec_c, n_rec)
            for leg in range(2):
                g_old[leg] = _event_fn(s, leg, contact, foot, p)
                # just-switched legs start exactly on their new event surface
                if abs(g_old[leg]) < ev_tol:
                    g_old[leg] = 0.0
            status = rhs(s, contact, foot, p, K[0])
            if status != OK:
                return status, t, s, contact, foot, n_rec, n_ev
        for leg in range(2):
            if s[1] + p[P_LBF + leg] * math.sin(s[2]) < 0.0:
                return ERR_GROUND, t, s, contact, foot, n_rec, n_ev
    return OK, t, s, contact, foot, n_rec, n_ev
