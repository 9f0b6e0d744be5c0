"""Passive bounding and pronking gaits of a quadrupedal spring-legged model."""

from .model import INFINITE, Contact, HybridState, Leg, ModelParams, total_energy

__all__ = ["INFINITE", "Contact", "HybridState", "Leg", "ModelParams", "total_energy"]
