"""Model parameters, hybrid state and the energy functional.

All quantities may be given in any consistent unit system; the defaults are
the dimensionless values obtained by normalizing with body mass, gravity and
leg rest length.
"""

from __future__ import annotations

import configparser
import enum
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import _kernels as K

INFINITE = math.inf


class ModelError(ValueError):
    """Invalid parameters or state."""


class GeometryError(ModelError):
    """Stance geometry is singular (leg horizontal or hip below ground)."""


class Contact(enum.IntEnum):
    SWING = 0
    STANCE = 1


class Leg(enum.IntEnum):
    F = 0
    H = 1


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of the bounding model.

    ``J`` may be :data:`INFINITE`, in which case the body never pitches and
    pitch states are removed from the boundary value problem.
    """

    M: float = 1.0
    J: float = INFINITE
    l_o: float = 1.0
    g: float = 1.0
    k_leg: float = 20.0
    omega_swing: float = math.sqrt(5.0)
    l_bF: float = 0.5
    l_bH: float = -0.5

    def __post_init__(self):
        for name in ("M", "l_o", "g", "k_leg", "omega_swing"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ModelError(f"{name} must be finite and positive, got {v!r}")
        # zero offsets give the bipedal variant with both hips at the centre of mass
        if not self.l_bF >= 0:
            raise ModelError(f"l_bF must be non-negative, got {self.l_bF!r}")
        if not self.l_bH <= 0:
            raise ModelError(f"l_bH must be non-positive, got {self.l_bH!r}")
        if not self.J > 0:
            raise ModelError(f"J must be positive or INFINITE, got {self.J!r}")

    @property
    def rigid(self) -> bool:
        """True when the body inertia is infinite."""
        return math.isinf(self.J)

    def with_inertia(self, J: float) -> "ModelParams":
        return replace(self, J=J)

    def lb(self, leg: Leg) -> float:
        return self.l_bF if Leg(leg) == Leg.F else self.l_bH

    def as_array(self) -> np.ndarray:
        p = np.zeros(K.N_PARAMS)
        p[K.P_M] = self.M
        p[K.P_G] = self.g
        p[K.P_LO] = self.l_o
        p[K.P_K] = self.k_leg
        p[K.P_W2] = self.omega_swing**2
        p[K.P_LBF] = self.l_bF
        p[K.P_LBH] = self.l_bH
        p[K.P_INVJ] = 0.0 if self.rigid else 1.0 / self.J
        p[K.P_J] = 0.0 if self.rigid else self.J
        return p

    # -- normalization -----------------------------------------------------
    @property
    def time_unit(self) -> float:
        return math.sqrt(self.l_o / self.g)

    def normalized(self) -> "ModelParams":
        """Dimensionless parameters in units of M, g and l_o."""
        return ModelParams(
            M=1.0,
            J=INFINITE if self.rigid else self.J / (self.M * self.l_o**2),
            l_o=1.0,
            g=1.0,
            k_leg=self.k_leg * self.l_o / (self.M * self.g),
            omega_swing=self.omega_swing * self.time_unit,
            l_bF=self.l_bF / self.l_o,
            l_bH=self.l_bH / self.l_o,
        )

    def state_scale(self) -> np.ndarray:
        """Per-component factors converting a dimensional 10-state to dimensionless."""
        v = math.sqrt(self.g * self.l_o)
        w = 1.0 / self.time_unit
        return np.array([1 / self.l_o, 1 / self.l_o, 1.0, 1.0, 1.0, 1 / v, 1 / v, 1 / w, 1 / w, 1 / w])

    # -- config files --------------------------------------------------------
    @classmethod
    def from_mapping(cls, values: dict) -> "ModelParams":
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in known:
                raise ModelError(f"unknown model parameter {key!r}")
            kwargs[key] = parse_inertia(raw) if key == "J" else _parse_float(key, raw)
        return cls(**kwargs)

    def to_mapping(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["J"] = "inf" if self.rigid else self.J
        return out


def _parse_float(key, raw) -> float:
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise ModelError(f"parameter {key!r}: cannot parse {raw!r} as a number") from None


def parse_inertia(raw) -> float:
    if isinstance(raw, str) and raw.strip().lower() in ("inf", "infinite", "infinity"):
        return INFINITE
    return _parse_float("J", raw)


def load_config(path: str | Path) -> dict[str, dict[str, str]]:
    """Read an INI-style config with [model], [integrator] and [continuation] sections."""
    parser = configparser.ConfigParser()
    parser.optionxform = str  # parameter names are case sensitive (J)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ModelError(f"malformed config {path}: {exc}") from None
    allowed = {"model", "integrator", "continuation"}
    for section in parser.sections():
        if section not in allowed:
            raise ModelError(f"unknown config section [{section}]")
    return {name: dict(parser[name]) if parser.has_section(name) else {} for name in allowed}


@dataclass
class HybridState:
    """Positions, velocities, contact phase and footholds of the model."""

    q: np.ndarray
    qdot: np.ndarray
    phase: tuple[Contact, Contact] = (Contact.SWING, Contact.SWING)  # (front, hind)
    foothold_F: float | None = None
    foothold_H: float | None = None
    _footholds: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float).reshape(5)
        self.qdot = np.asarray(self.qdot, dtype=float).reshape(5)
        self.phase = (Contact(self.phase[0]), Contact(self.phase[1]))
        for leg, fh in ((Leg.F, self.foothold_F), (Leg.H, self.foothold_H)):
            if (self.phase[leg] == Contact.STANCE) != (fh is not None):
                raise ModelError(f"foothold of leg {leg.name} must be given exactly in stance")

    @classmethod
    def from_vector(cls, s, contact=(0, 0), foot=(0.0, 0.0)) -> "HybridState":
        s = np.asarray(s, dtype=float)
        return cls(
            s[:5], s[5:],
            phase=(Contact(int(contact[0])), Contact(int(contact[1]))),
            foothold_F=float(foot[0]) if contact[0] else None,
            foothold_H=float(foot[1]) if contact[1] else None,
        )

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.q, self.qdot])

    @property
    def contact(self) -> np.ndarray:
        return np.array([int(self.phase[0]), int(self.phase[1])], dtype=np.int64)

    @property
    def feet(self) -> np.ndarray:
        return np.array([self.foothold_F or 0.0, self.foothold_H or 0.0])

    def foothold(self, leg: Leg) -> float | None:
        return self.foothold_F if Leg(leg) == Leg.F else self.foothold_H

    def with_stance(self, leg: Leg, params: ModelParams) -> "HybridState":
        """Put ``leg`` into stance with the foothold implied by its current angle."""
        s = self.vector
        hx, hy = K.hip(s, int(leg), params.as_array())
        th = s[3 + int(leg)] + s[2]
        if math.cos(th) <= 0 or hy <= 0:
            raise GeometryError("cannot place a foot with the leg at or above horizontal")
        fh = hx + hy * math.tan(th)
        phase = list(self.phase)
        phase[leg] = Contact.STANCE
        feet = [self.foothold_F, self.foothold_H]
        feet[leg] = fh
        return HybridState(self.q, self.qdot, tuple(phase), feet[0], feet[1])


def total_energy(state: HybridState, params: ModelParams) -> float:
    """Total mechanical energy: gravity, body kinetic energy and stance leg springs."""
    if params.rigid and state.qdot[2] != 0.0:
        raise ModelError("pitch rate must be zero when J is infinite")
    for leg in Leg:
        if state.phase[leg] == Contact.STANCE:
            leg_geometry_stance(state, leg, params)
    return float(K.energy(state.vector, state.contact, state.feet, params.as_array()))


def leg_geometry_stance(state: HybridState, leg: Leg, params: ModelParams):
    """Leg length, angle and their rates for a stance leg with a fixed foothold.

    Returns ``(l, alpha, l_dot, alpha_dot)``.
    """
    leg = Leg(leg)
    fh = state.foothold(leg)
    if state.phase[leg] != Contact.STANCE or fh is None:
        raise ModelError(f"leg {leg.name} is not in stance")
    x, y, phi = state.q[:3]
    xd, yd, phid = state.qdot[:3]
    b = params.lb(leg)
    hx, hy = x + b * math.cos(phi), y + b * math.sin(phi)
    if hy <= 0:
        raise GeometryError("hip at or below ground in stance")
    dx = fh - hx
    theta = math.atan2(dx, hy)
    if math.cos(theta) <= 0:
        raise GeometryError("stance leg horizontal")
    length = hy / math.cos(theta)
    hxd = xd - b * math.sin(phi) * phid
    hyd = yd + b * math.cos(phi) * phid
    l_dot = (-dx * hxd + hy * hyd) / length
    theta_dot = (-hy * hxd - dx * hyd) / length**2
    return length, theta - phi, l_dot, theta_dot - phid
