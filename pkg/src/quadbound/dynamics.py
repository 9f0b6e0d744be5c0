"""Hybrid vector field, touch-down reset and leg-extension event functions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .model import Contact, GeometryError, HybridState, Leg, ModelError, ModelParams


class DynamicsError(RuntimeError):
    """The vector field cannot be evaluated (over-compression, singular geometry)."""

    def __init__(self, status: int, t: float | None = None):
        self.status = status
        self.t = t
        msg = K.STATUS_NAMES.get(status, f"status {status}")
        if t is not None:
            msg += f" at t={t:.12g}"
        super().__init__(msg)


class EventError(ModelError):
    """A hybrid event was requested in an inconsistent state."""


@dataclass(frozen=True)
class PhaseConfig:
    front_contact: bool = False
    hind_contact: bool = False
    foothold_F: float | None = None
    foothold_H: float | None = None

    def __post_init__(self):
        if self.front_contact != (self.foothold_F is not None):
            raise ModelError("front foothold must be present exactly in contact")
        if self.hind_contact != (self.foothold_H is not None):
            raise ModelError("hind foothold must be present exactly in contact")

    @classmethod
    def of(cls, state: HybridState) -> "PhaseConfig":
        return cls(
            state.phase[Leg.F] == Contact.STANCE,
            state.phase[Leg.H] == Contact.STANCE,
            state.foothold_F,
            state.foothold_H,
        )

    @property
    def contact(self) -> np.ndarray:
        return np.array([int(self.front_contact), int(self.hind_contact)], dtype=np.int64)

    @property
    def feet(self) -> np.ndarray:
        return np.array([self.foothold_F or 0.0, self.foothold_H or 0.0])


def eval_dynamics(state: HybridState, phase: PhaseConfig | None, params: ModelParams) -> np.ndarray:
    """Generalized accelerations (x, y, phi, alpha_F, alpha_H) for the given contacts.

    Stance legs push along the leg with force ``k_leg * (l_o - l)`` at the hip; swing
    legs are massless and exert no force. Body accelerations follow from the stance
    forces alone, after which stance leg angles follow by differentiating the foot
    constraint twice and swing leg angles from the massless swing equation, so the
    coupled linear system is block triangular and is solved by substitution.
    """
    phase = PhaseConfig.of(state) if phase is None else phase
    out = np.empty(10)
    status = K.rhs(state.vector, phase.contact, phase.feet, params.as_array(), out)
    if status != K.OK:
        raise DynamicsError(status)
    return out[5:]


def touchdown_reset(state: HybridState, leg: Leg, params: ModelParams, check: bool = True) -> HybridState:
    """Place ``leg`` on the ground and zero its foot's horizontal velocity.

    Body states are untouched; only the massless leg's angular rate changes, so
    the total energy is preserved exactly.
    """
    leg = Leg(leg)
    p = params.as_array()
    s = state.vector
    if check and K.foot_vertical_rate(s, int(leg), p) > 0.0:
        raise EventError(f"leg {leg.name} foot moves upward at touch-down")
    foot, adot, ct = K.touchdown(s, int(leg), p)
    if ct <= 0.0 or not np.isfinite(foot):
        raise GeometryError(f"leg {leg.name} touches down at or above horizontal")
    s = s.copy()
    s[8 + int(leg)] = adot
    phase = list(state.phase)
    phase[leg] = Contact.STANCE
    feet = [state.foothold_F, state.foothold_H]
    feet[leg] = float(foot)
    return HybridState(s[:5], s[5:], tuple(phase), feet[0], feet[1])


def event_residuals(state: HybridState, params: ModelParams) -> dict[Leg, tuple[float, float]]:
    """Per leg: (touch-down gap, lift-off gap).

    Both are ``y + l_b sin(phi) - l_o cos(phi + alpha)``: the height of the fully
    extended foot above ground, zero when the leg is at rest length with its foot
    on the ground.
    """
    p = params.as_array()
    s = state.vector
    out = {}
    for leg in Leg:
        gap = float(K.extension_gap(s, int(leg), p))
        out[leg] = (gap, gap)
    return out
