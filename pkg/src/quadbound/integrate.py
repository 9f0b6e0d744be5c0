"""Timed (prescribed event) and free (event-driven) integration of the hybrid model."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels as K
from .dynamics import DynamicsError
from .model import Contact, HybridState, ModelError, ModelParams

EVENT_NAMES = ("t_Htd", "t_Hlo", "t_Ftd", "t_Flo")


@dataclass(frozen=True)
class IntegratorOptions:
    rtol: float = 1e-12
    atol: float = 1e-14
    max_steps: int = 200_000
    event_tol: float = 1e-10  # free mode event localization, in time

    @classmethod
    def from_mapping(cls, values: dict) -> "IntegratorOptions":
        kw = {}
        for key, raw in values.items():
            if key not in cls.__dataclass_fields__:
                raise ModelError(f"unknown integrator option {key!r}")
            try:
                kw[key] = int(raw) if key == "max_steps" else float(raw)
            except ValueError:
                raise ModelError(f"integrator option {key!r}: cannot parse {raw!r}") from None
        return cls(**kw)


DEFAULT_OPTIONS = IntegratorOptions()


@dataclass(frozen=True)
class EventSchedule:
    """Footfall timings of one stride; each leg touches down and lifts off once."""

    t_Htd: float
    t_Hlo: float
    t_Ftd: float
    t_Flo: float
    t_stride: float

    def __post_init__(self):
        if not self.t_stride > 0:
            raise ModelError(f"stride time must be positive, got {self.t_stride}")
        for name in EVENT_NAMES:
            v = getattr(self, name)
            if not 0.0 <= v < self.t_stride:
                raise ModelError(f"{name}={v} outside [0, t_stride)")

    @property
    def times(self) -> np.ndarray:
        return np.array([self.t_Htd, self.t_Hlo, self.t_Ftd, self.t_Flo])

    @classmethod
    def wrapped(cls, times, t_stride) -> "EventSchedule":
        """Build a schedule folding arbitrary event times into [0, t_stride)."""
        tt, _ = K.event_order(np.asarray(times, dtype=float), float(t_stride))
        return cls(*map(float, tt), float(t_stride))

    def initial_contact(self) -> tuple[Contact, Contact]:
        """Contacts at t=0: a leg whose lift-off precedes its touch-down is in stance."""
        return (
            Contact(int(self.t_Flo < self.t_Ftd)),
            Contact(int(self.t_Hlo < self.t_Htd)),
        )


@dataclass
class Trajectory:
    """Sampled hybrid trajectory with per-sample contact flags."""

    t: np.ndarray
    states: np.ndarray  # (n, 10)
    contact: np.ndarray  # (n, 2) front, hind
    events: list[tuple[float, str]] = field(default_factory=list)
    params: ModelParams | None = None
    footholds: np.ndarray | None = None  # (n, 2), nan in swing

    def __len__(self):
        return len(self.t)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def intervals(self) -> list[tuple[float, float, tuple[int, int]]]:
        """Contiguous contact-configuration intervals as (t_start, t_end, (F, H))."""
        out = []
        start = self.t[0]
        cur = tuple(int(c) for c in self.contact[0])
        for i in range(1, len(self.t)):
            c = tuple(int(v) for v in self.contact[i])
            if c != cur:
                if self.t[i] > start:
                    out.append((start, self.t[i], cur))
                start = self.t[i]
                cur = c
        if self.t[-1] > start or not out:
            out.append((start, self.t[-1], cur))
        return out

    def energy(self) -> np.ndarray:
        p = self.params.as_array()
        feet = np.nan_to_num(self.footholds) if self.footholds is not None else np.zeros((len(self.t), 2))
        return np.array([K.energy(s, c, f, p) for s, c, f in zip(self.states, self.contact, feet)])

    def leg_lengths(self) -> np.ndarray:
        """Leg lengths per sample (rest length while in swing)."""
        p = self.params.as_array()
        out = np.full((len(self.t), 2), self.params.l_o)
        for i, (s, c, f) in enumerate(zip(self.states, self.contact, self.footholds)):
            for leg in range(2):
                if c[leg]:
                    out[i, leg] = K.stance_length(s, leg, f[leg], p)
        return out

    def to_csv(self, path: str | Path) -> None:
        header = ["t", "x", "y", "phi", "alpha_F", "alpha_H", "xdot", "ydot", "phidot",
                  "alphadot_F", "alphadot_H", "contact_F", "contact_H", "energy"]
        energy = self.energy()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for t, s, c, e in zip(self.t, self.states, self.contact, energy):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in s] + [int(c[0]), int(c[1]), repr(float(e))])


def _buffers(capacity):
    return np.empty(capacity), np.empty((capacity, 10)), np.empty((capacity, 2), dtype=np.int64)


def run_timed_raw(s0: np.ndarray, times, t_stride: float, params: ModelParams,
                  options: IntegratorOptions = DEFAULT_OPTIONS, record: int = 0):
    """Low-level timed stride; returns the kernel tuple (status, end, pre-event states, t_fail, n, feet)."""
    buf = _buffers(record)
    return K.run_timed(np.asarray(s0, dtype=float), np.asarray(times, dtype=float), float(t_stride),
                       params.as_array(), options.rtol, options.atol, options.max_steps, *buf), buf


def integrate_timed(initial: HybridState, schedule: EventSchedule, params: ModelParams,
                    options: IntegratorOptions = DEFAULT_OPTIONS, record: int = 100_000) -> Trajectory:
    """Integrate one stride switching contacts at the prescribed event times.

    Touch-downs apply :func:`~quadbound.dynamics.touchdown_reset`; lift-offs just
    release the leg. A leg in stance at t=0 (its lift-off precedes its
    touch-down) gets its foothold from the initial geometry. No event consistency
    is checked here.
    """
    (status, end, ev_states, t_fail, n, feet_end), (rt, rs, rc) = run_timed_raw(
        initial.vector, schedule.times, schedule.t_stride, params, options, record)
    if status != K.OK:
        raise DynamicsError(status, t_fail)
    t, states, contact = rt[:n].copy(), rs[:n].copy(), rc[:n].copy()
    order = sorted(range(4), key=lambda k: (schedule.times[k], k))
    events = [(float(schedule.times[k]), EVENT_NAMES[k]) for k in order]
    feet = _stance_feet(states, contact, params)
    return Trajectory(t, states, contact, events, params, feet)


def _stance_feet(states, contact, params):
    # foothold recovered from the geometry at the first stance sample of each contact period
    p = params.as_array()
    feet = np.full((len(states), 2), np.nan)
    for leg in range(2):
        current = np.nan
        for i in range(len(states)):
            if contact[i, leg]:
                if i == 0 or not contact[i - 1, leg]:
                    s = states[i]
                    hx, hy = K.hip(s, leg, p)
                    current = hx + hy * np.tan(s[3 + leg] + s[2])
                feet[i, leg] = current
    return feet


def simulate_free(initial: HybridState, duration: float, params: ModelParams,
                  options: IntegratorOptions = DEFAULT_OPTIONS, record: int = 200_000,
                  raise_on_error: bool = True) -> Trajectory:
    """Event-driven simulation with located touch-downs and lift-offs."""
    rt, rs, rc = _buffers(record)
    ev_t = np.empty(10_000)
    ev_k = np.empty(10_000, dtype=np.int64)
    status, t_end, s, contact, foot, n, n_ev = K.run_free(
        initial.vector, initial.contact, initial.feet, float(duration), params.as_array(),
        options.rtol, options.atol, options.max_steps, options.event_tol, 1e-9,
        rt, rs, rc, ev_t, ev_k)
    if status != K.OK and raise_on_error:
        raise DynamicsError(status, t_end)
    t, states, cont = rt[:n].copy(), rs[:n].copy(), rc[:n].copy()
    events = [(float(ev_t[i]), EVENT_NAMES[int(ev_k[i])]) for i in range(n_ev)]
    feet = _stance_feet(states, cont, params)
    # initial stance legs keep the foothold they were given
    for leg, fh in enumerate((initial.foothold_F, initial.foothold_H)):
        if fh is not None:
            i = 0
            while i < len(t) and cont[i, leg]:
                feet[i, leg] = fh
                i += 1
    traj = Trajectory(t, states, cont, events, params, feet)
    traj.status = status
    return traj
