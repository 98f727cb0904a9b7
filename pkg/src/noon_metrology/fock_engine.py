"""Four-mode Fock-state simulation of Holland-Burnett probes.

Modes are ordered ``(a_H, a_V, q_H, q_V)``.  The ``a`` pair holds the photons
that interfere; ``q_V`` carries the distinguishable component of the second
input beam and ``q_H`` is its vacuum partner under polarization rotations.

States are kept as sparse maps from occupations to complex amplitudes.  A
polarization rotation conserves photon number inside each pair, so it acts as a
small dense matrix on every block of fixed pair photon number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from types import MappingProxyType
from typing import Literal, Mapping, NamedTuple

import numpy as np

NORM_TOL = 1e-12

Pair = Literal["a", "q"]


class ModeOccupation(NamedTuple):
    aH: int
    aV: int
    qH: int
    qV: int

    @property
    def total(self) -> int:
        return self.aH + self.aV + self.qH + self.qV


@dataclass(frozen=True)
class HBConfig:
    """N photons per input arm and distinguishability ``epsilon`` in [0, 1]."""

    N: int
    epsilon: float

    def __post_init__(self):
        if not isinstance(self.N, (int, np.integer)) or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        if not (0.0 <= self.epsilon <= 1.0):
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon!r}")


@dataclass(frozen=True)
class FockStateVector:
    """Normalized pure state over four-mode occupations.

    Occupations missing from ``amplitudes`` have amplitude exactly zero.
    """

    amplitudes: Mapping[ModeOccupation, complex]

    def __post_init__(self):
        amps = {}
        for occ, amp in self.amplitudes.items():
            occ = ModeOccupation(*occ)
            if min(occ) < 0:
                raise ValueError(f"negative photon number in occupation {tuple(occ)}")
            amps[occ] = complex(amp)
        object.__setattr__(self, "amplitudes", MappingProxyType(amps))
        norm = self.norm()
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized: sum |amp|^2 = {norm!r}")

    @classmethod
    def _trusted(cls, amps: dict) -> "FockStateVector":
        # amps already keyed by ModeOccupation with complex values; only the norm is checked
        state = object.__new__(cls)
        object.__setattr__(state, "amplitudes", MappingProxyType(amps))
        norm = state.norm()
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized: sum |amp|^2 = {norm!r}")
        return state

    def norm(self) -> float:
        return math.fsum(abs(a) ** 2 for a in self.amplitudes.values())

    def amplitude(self, occ) -> complex:
        return self.amplitudes.get(ModeOccupation(*occ), 0j)

    def photon_numbers(self) -> set[int]:
        return {occ.total for occ in self.amplitudes}

    def __len__(self) -> int:
        return len(self.amplitudes)


@dataclass(frozen=True)
class OutcomeDistribution:
    """Distribution of the total count x on modes a_H and q_H, x = 0..2N.

    ``split[x, s]`` is the contribution with s photons in a_H and x - s in q_H.
    """

    probs: np.ndarray
    split: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if np.any(p < -NORM_TOL) or np.any(p > 1 + NORM_TOL):
            raise ValueError("outcome probabilities outside [0, 1]")
        if abs(p.sum() - 1.0) > 1e-10:
            raise ValueError(f"outcome probabilities sum to {p.sum()!r}")
        p = np.clip(p, 0.0, 1.0)
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def N(self) -> int:
        return (len(self.probs) - 1) // 2


def build_hb_input(cfg: HBConfig) -> FockStateVector:
    """Expand (a_H^+)^N (sqrt(1-eps^2) a_V^+ + eps q_V^+)^N |0> / N! in the Fock basis.

    The amplitude on (N, k, 0, N-k) is sqrt(C(N, k)) (1-eps^2)^(k/2) eps^(N-k).
    """
    N, eps = cfg.N, float(cfg.epsilon)
    t = math.sqrt(max(0.0, 1.0 - eps * eps))
    amps = {}
    for k in range(N + 1):
        # 0.0 ** 0 == 1.0 covers both limits eps = 0 and eps = 1
        amp = math.sqrt(math.comb(N, k)) * t**k * eps ** (N - k)
        if amp != 0.0:
            amps[ModeOccupation(N, k, 0, N - k)] = amp
    return FockStateVector(amps)


@lru_cache(maxsize=None)
def _generator_eigensystem(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of -i(a_V^+ a_H - a_H^+ a_V) on the n-photon block.

    Basis index p is the H-mode occupation, the V mode holds n - p.
    """
    G = np.zeros((n + 1, n + 1))
    for p in range(n + 1):
        q = n - p
        if p > 0:
            G[p - 1, p] += math.sqrt(p * (q + 1))
        if q > 0:
            G[p + 1, p] -= math.sqrt((p + 1) * q)
    H = -1j * G
    _, W = np.linalg.eigh(H)
    # spectrum of -2 J_y on spin n/2 is exactly {-n, -n+2, ..., n}
    lam = np.arange(-n, n + 1, 2, dtype=float)
    W.setflags(write=False)
    return lam, W


def rotation_matrix(n: int, angle: float) -> np.ndarray:
    """Fock-basis matrix of the pair rotation on the n-photon block.

    Implements a_H^+ -> cos(angle/2) a_H^+ + sin(angle/2) a_V^+ and
    a_V^+ -> cos(angle/2) a_V^+ - sin(angle/2) a_H^+.  Entry [p_out, p_in]
    is indexed by the H-mode occupation.
    """
    lam, W = _generator_eigensystem(n)
    phases = np.exp(0.5j * angle * lam)
    return (W * phases) @ W.conj().T


def apply_pair_rotation(state: FockStateVector, pair: Pair, angle: float) -> FockStateVector:
    """Rotate the polarization of one mode pair by ``angle``."""
    if pair == "a":
        def split(o):
            return o.aH + o.aV, o.aH, (o.qH, o.qV)

        def join(p, n, rest):
            return ModeOccupation(p, n - p, *rest)
    elif pair == "q":
        def split(o):
            return o.qH + o.qV, o.qH, (o.aH, o.aV)

        def join(p, n, rest):
            return ModeOccupation(rest[0], rest[1], p, n - p)
    else:
        raise ValueError(f"pair must be 'a' or 'q', got {pair!r}")

    blocks: dict[tuple[int, tuple[int, int]], np.ndarray] = {}
    for occ, amp in state.amplitudes.items():
        n, p, rest = split(occ)
        vec = blocks.get((n, rest))
        if vec is None:
            vec = blocks[(n, rest)] = np.zeros(n + 1, dtype=complex)
        vec[p] = amp

    matrices: dict[int, np.ndarray] = {}
    out = {}
    for (n, rest), vec in blocks.items():
        U = matrices.get(n)
        if U is None:
            U = matrices[n] = rotation_matrix(n, angle)
        for p, amp in enumerate((U @ vec).tolist()):
            if amp != 0:
                out[join(p, n, rest)] = amp
    return FockStateVector._trusted(out)


def evolve_probe(cfg: HBConfig, phi: float, theta_setting: float = 0.0) -> FockStateVector:
    """HB input state after the sample phase plus the controlled setting phase.

    The physical rotation acts on polarization, so both pairs rotate by phi + theta.
    """
    angle = phi + theta_setting
    state = build_hb_input(cfg)
    state = apply_pair_rotation(state, "a", angle)
    return apply_pair_rotation(state, "q", angle)


def outcome_probabilities(state: FockStateVector, N: int) -> OutcomeDistribution:
    """Probabilities of the total count x on a_H and q_H, marginalizing the V modes."""
    if state.photon_numbers() - {2 * N}:
        raise ValueError(
            f"state photon numbers {sorted(state.photon_numbers())} do not match 2N = {2 * N}"
        )
    split = np.zeros((2 * N + 1, 2 * N + 1))
    for occ, amp in state.amplitudes.items():
        split[occ.aH + occ.qH, occ.aH] += amp.real**2 + amp.imag**2
    return OutcomeDistribution(split.sum(axis=1), split)
