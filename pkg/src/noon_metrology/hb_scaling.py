"""Fisher-information scaling of 2N-photon Holland-Burnett probes in (phi, epsilon).

Probabilities come from the exact Fock simulation; derivatives are finite
differences.  Two settings, theta = 0 and pi/2, are used with equal weight.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from . import finite_diff
from .fisher_analysis import FisherMatrix2
from .fock_engine import HBConfig, OutcomeDistribution, evolve_probe, outcome_probabilities

log = logging.getLogger(__name__)

HB_SETTINGS = (0.0, np.pi / 2)
PROB_FLOOR = 1e-12
CONVERGENCE_RTOL = 1e-4
SINGULAR_RCOND = 1e-10
DEFAULT_PHASE_POINTS = 181
REFERENCE_EPSILONS = (0.14, 0.23, 0.32, 0.50, 1.0)
LABELS = ("phi", "epsilon")


@dataclass(frozen=True)
class StepSpec:
    h_phi: float = 1e-4
    h_eps: float = 1e-4
    richardson: bool = False
    # also evaluate at halved steps and flag disagreement
    check_convergence: bool = False
    # offset used to take the phase-direction limit at probability zeros
    limit_offset: float = 1e-4

    def halved(self) -> "StepSpec":
        return StepSpec(self.h_phi / 2, self.h_eps / 2, self.richardson, False, self.limit_offset)


def default_phase_grid(points: int = DEFAULT_PHASE_POINTS) -> np.ndarray:
    return np.linspace(0.0, np.pi, points, endpoint=False)


def hb_probabilities(N: int, epsilon: float, phi: float, theta_setting: float) -> OutcomeDistribution:
    """Distribution of the total count on a_H and q_H for one setting phase."""
    cfg = HBConfig(N, epsilon)
    return outcome_probabilities(evolve_probe(cfg, phi, theta_setting), N)


def _probs(N, eps, phi, theta) -> np.ndarray:
    return hb_probabilities(N, eps, phi, theta).probs


@dataclass(frozen=True)
class HBFisherPoint:
    N: int
    epsilon: float
    phi: float
    fisher: FisherMatrix2
    eff_phi: float
    eff_eps: float
    flags: tuple[str, ...] = ()

    @property
    def matrix(self) -> np.ndarray:
        return self.fisher.matrix


def _fisher_matrix(N, eps, phi, step: StepSpec, two_param: bool) -> tuple[np.ndarray, bool]:
    """Setting-averaged Fisher matrix; also reports whether a probability zero was met."""
    F = np.zeros((2, 2))
    zero_hit = False
    for theta in HB_SETTINGS:
        p0 = _probs(N, eps, phi, theta)
        dphi = finite_diff.derivative(
            lambda x: _probs(N, eps, x, theta), phi, step.h_phi, richardson=step.richardson
        )
        if two_param:
            deps = finite_diff.derivative(
                lambda e: _probs(N, e, phi, theta), eps, step.h_eps, lo=0.0, hi=1.0,
                richardson=step.richardson, f0=p0,
            )
        else:
            deps = np.zeros_like(p0)
        keep = p0 > PROB_FLOOR
        # an outcome absent at phi but present nearby carries finite information
        if not np.all(keep):
            nearby = _probs(N, eps, phi + step.h_phi, theta)
            zero_hit = zero_hit or bool(np.any(~keep & (nearby > PROB_FLOOR)))
        d = np.vstack([dphi[keep], deps[keep]])
        F += 0.5 * (d / p0[keep]) @ d.T
    return F, zero_hit


def _regularized_matrix(N, eps, phi, step: StepSpec, two_param: bool) -> tuple[np.ndarray, tuple[str, ...]]:
    F, zero_hit = _fisher_matrix(N, eps, phi, step, two_param)
    if not zero_hit:
        return F, ()
    d = step.limit_offset
    Fp, _ = _fisher_matrix(N, eps, phi + d, step, two_param)
    Fm, _ = _fisher_matrix(N, eps, phi - d, step, two_param)
    return 0.5 * (Fp + Fm), ("phase-limit",)


def fisher_hb(N: int, epsilon: float, phi: float, step: StepSpec = StepSpec()) -> HBFisherPoint:
    """Fisher matrix over (phi, epsilon) with effective values 1/(F^-1)_ii.

    At epsilon = 0 every epsilon-derivative vanishes, so only the phase
    information is reported.  Points sitting on a probability zero are
    evaluated as the limit along the phase direction.
    """
    HBConfig(N, epsilon)
    two_param = epsilon > 0.0
    F, flags = _regularized_matrix(N, epsilon, phi, step, two_param)
    if step.check_convergence:
        F2, _ = _regularized_matrix(N, epsilon, phi, step.halved(), two_param)
        scale = np.max(np.abs(F2))
        if scale > 0 and np.max(np.abs(F - F2)) > CONVERGENCE_RTOL * scale:
            flags += ("unconverged",)
    F = 0.5 * (F + F.T)

    if not two_param:
        flags += ("single-parameter",)
        eff_phi, eff_eps = F[0, 0], 0.0
    else:
        det = np.linalg.det(F)
        if det <= SINGULAR_RCOND * max(F[0, 0] * F[1, 1], 1e-300):
            flags += ("singular",)
            # only the parameter with information keeps an effective value
            eff_phi = F[0, 0] if F[1, 1] <= SINGULAR_RCOND * max(F[0, 0], 1.0) else 0.0
            eff_eps = F[1, 1] if F[0, 0] <= SINGULAR_RCOND * max(F[1, 1], 1.0) else 0.0
        else:
            eff_phi = det / F[1, 1]
            eff_eps = det / F[0, 0]
    fm = FisherMatrix2(F, "hb-numerical", (phi, epsilon), labels=LABELS, convention="hb", flags=flags)
    return HBFisherPoint(N, epsilon, phi, fm, float(eff_phi), float(eff_eps), flags)


@dataclass(frozen=True)
class PhaseScan:
    N: int
    epsilon: float
    phases: np.ndarray
    eff_phi: np.ndarray
    eff_eps: np.ndarray
    points: list[HBFisherPoint] = field(repr=False)


def phase_scan(N: int, epsilon: float, phase_grid=None, step: StepSpec = StepSpec()) -> PhaseScan:
    phases = default_phase_grid() if phase_grid is None else np.asarray(phase_grid, dtype=float)
    pts = [fisher_hb(N, epsilon, g, step) for g in phases]
    return PhaseScan(
        N, epsilon, phases,
        np.array([p.eff_phi for p in pts]), np.array([p.eff_eps for p in pts]), pts,
    )


def _argmax(scan: PhaseScan, values: np.ndarray, target: str) -> tuple[float, float]:
    if not np.any(values > 0):
        raise ValueError(f"no phase in the grid carries information on {target}")
    # np.argmax returns the first maximum, i.e. the smallest phase on an ascending grid
    i = int(np.argmax(values))
    return float(np.mod(scan.phases[i], np.pi)), float(values[i])


def optimize_phase(
    N: int,
    epsilon: float,
    target: Literal["phi", "epsilon"],
    phase_grid=None,
    step: StepSpec = StepSpec(),
    scan: PhaseScan | None = None,
) -> tuple[float, float]:
    """Grid search of the effective information on ``target`` over the phase."""
    scan = scan or phase_scan(N, epsilon, phase_grid, step)
    if target == "phi":
        return _argmax(scan, scan.eff_phi, "phi")
    if target == "epsilon":
        return _argmax(scan, scan.eff_eps, "epsilon")
    raise ValueError(f"unknown target {target!r}")


@dataclass(frozen=True)
class ScalingPoint:
    N: int
    epsilon: float
    phi_opt_phi: float
    phi_opt_eps: float
    max_eff_phi: float
    max_eff_eps: float
    upsilon: float
    flags: tuple[str, ...] = ()

    def as_row(self) -> dict:
        return {
            "N": self.N,
            "epsilon": self.epsilon,
            "phi_opt_phi": self.phi_opt_phi,
            "phi_opt_eps": self.phi_opt_eps,
            "max_eff_F_phi": self.max_eff_phi,
            "max_eff_F_eps": self.max_eff_eps,
            "upsilon": self.upsilon,
            "flags": ";".join(self.flags),
            "error": "",
        }


def _scan_flags(scan: PhaseScan) -> tuple[str, ...]:
    seen = []
    for p in scan.points:
        for f in p.flags:
            if f not in seen:
                seen.append(f)
    return tuple(seen)


def upsilon_from_scan(scan: PhaseScan) -> ScalingPoint:
    phi_a, max_phi = _argmax(scan, scan.eff_phi, "phi")
    if scan.epsilon == 0.0:
        # the distinguishability is not estimable here: no trade-off to quantify
        return ScalingPoint(scan.N, 0.0, phi_a, float("nan"), max_phi, 0.0, float("nan"), _scan_flags(scan))
    phi_b, max_eps = _argmax(scan, scan.eff_eps, "epsilon")
    ups = float(np.max(scan.eff_phi / max_phi + scan.eff_eps / max_eps))
    return ScalingPoint(scan.N, scan.epsilon, phi_a, phi_b, max_phi, max_eps, ups, _scan_flags(scan))


def upsilon(N: int, epsilon: float, phase_grid=None, step: StepSpec = StepSpec()) -> ScalingPoint:
    """Best jointly attainable sum of normalized effective informations over a common phase."""
    return upsilon_from_scan(phase_scan(N, epsilon, phase_grid, step))


@dataclass(frozen=True)
class SweepFailure:
    N: int
    epsilon: float
    error: str

    def as_row(self) -> dict:
        nan = float("nan")
        return {
            "N": self.N, "epsilon": self.epsilon, "phi_opt_phi": nan, "phi_opt_eps": nan,
            "max_eff_F_phi": nan, "max_eff_F_eps": nan, "upsilon": nan, "flags": "", "error": self.error,
        }


def _sweep_point(args):
    N, eps, step, phase_grid = args
    try:
        return upsilon(N, eps, phase_grid, step)
    except Exception as exc:  # recorded per point, the sweep carries on
        log.warning("scaling point N=%s eps=%s failed: %s", N, eps, exc)
        return SweepFailure(N, eps, f"{type(exc).__name__}: {exc}")


def scaling_sweep(
    N_range: Sequence[int],
    epsilon_list: Sequence[float] = REFERENCE_EPSILONS,
    step: StepSpec = StepSpec(),
    phase_grid=None,
    workers: int = 1,
) -> list[ScalingPoint | SweepFailure]:
    """Scaling table over (epsilon, N), ordered epsilon-major."""
    jobs = [(int(N), float(eps), step, phase_grid) for eps in epsilon_list for N in N_range]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_point, jobs))
    return [_sweep_point(j) for j in jobs]


def loglog_exponent(N, values) -> float:
    """Least-squares slope of log(values) against log(N)."""
    return float(np.polyfit(np.log(np.asarray(N, dtype=float)), np.log(np.asarray(values, dtype=float)), 1)[0])
