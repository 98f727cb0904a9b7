"""Closed-form detection probabilities for the two-photon N00N experiment.

``theta`` is the physical half-wave-plate angle; the factors 8*theta and
4*theta are kept literal.  All functions broadcast over numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

CANONICAL_SETTINGS = np.array([0.0, np.pi / 16, np.pi / 8, 3 * np.pi / 16])
CANONICAL_SETTINGS.setflags(write=False)

CLAMP_TOL = 1e-12


@dataclass(frozen=True)
class ModelPoint:
    phi: float
    v: float

    def __post_init__(self):
        if not (0.0 <= self.v <= 1.0):
            raise ValueError(f"visibility must lie in [0, 1], got {self.v!r}")


@dataclass(frozen=True)
class OutcomeProbabilities:
    """Coincidence probability ``p1`` and per-arm bunching probability ``p2``."""

    p1: np.ndarray | float
    p2: np.ndarray | float


def _clamp(p):
    p = np.asarray(p, dtype=float)
    if np.any(p < -CLAMP_TOL) or np.any(p > 1 + CLAMP_TOL):
        raise ArithmeticError("probability outside [0, 1] beyond rounding tolerance")
    p = np.clip(p, 0.0, 1.0)
    return p[()] if p.ndim == 0 else p


def probs_full(theta, phi, v) -> OutcomeProbabilities:
    """Three-outcome probabilities for one setting: coincidence and bunching in each arm."""
    v = np.asarray(v, dtype=float)
    p1 = (1 + v * np.cos(8 * theta - 2 * phi)) / (1 + v)
    p2 = v * np.sin(4 * theta - phi) ** 2 / (1 + v)
    return OutcomeProbabilities(_clamp(p1), _clamp(p2))


def prob_postselected(theta, phi, v):
    """Probability that a retained coincidence came from setting ``theta``."""
    return _clamp(0.25 * (1 + v * np.cos(8 * theta - 2 * phi)))


def prob_single_param(theta, phi, v0):
    """Post-selected probability with a pre-calibrated, frozen visibility ``v0``."""
    if not (0.0 <= v0 <= 1.0):
        raise ValueError(f"v0 must lie in [0, 1], got {v0!r}")
    return prob_postselected(theta, phi, v0)


def limit_probs(theta, phi, regime: Literal["indistinguishable", "distinguishable"]) -> OutcomeProbabilities:
    c = np.cos(8 * theta - 2 * phi)
    s2 = np.sin(4 * theta - phi) ** 2
    if regime == "indistinguishable":
        return OutcomeProbabilities(_clamp((1 + c) / 2), _clamp(s2 / 2))
    if regime == "distinguishable":
        return OutcomeProbabilities(_clamp((3 + c) / 4), _clamp(s2 / 4))
    raise ValueError(f"unknown regime {regime!r}")


def visibility_from_distinguishability(epsilon):
    """Fringe visibility v = (2 - eps^2) / (2 + eps^2)."""
    eps = np.asarray(epsilon, dtype=float)
    if np.any(eps < 0) or np.any(eps > 1):
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon!r}")
    v = (2 - eps**2) / (2 + eps**2)
    return v[()] if v.ndim == 0 else v


def dv_depsilon(epsilon):
    """Derivative of the visibility with respect to the distinguishability."""
    return -8 * epsilon / (2 + epsilon**2) ** 2


def hb_setting_to_hwp(theta_phase):
    """HWP angle equivalent to a controlled rotation phase of the HB probe."""
    return -np.asarray(theta_phase) / 4
