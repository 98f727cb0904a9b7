"""Grid-based Bayesian inference of phase and visibility from coincidence counts."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .noon2_model import CANONICAL_SETTINGS, prob_postselected, prob_single_param, probs_full

DEFAULT_RESOLUTION = 512
DEFAULT_PHI_HALF_WIDTH = 0.25
DEFAULT_V_RANGE = (0.90, 1.00)
MIN_RESOLUTION = 16
MIN_EFFECTIVE_NODES = 4.0


class EstimationError(RuntimeError):
    pass


class UnderResolvedPosterior(EstimationError):
    """Posterior mass sits on too few grid nodes for second moments to mean anything."""


def _grid(lo: float, hi: float, n: int) -> np.ndarray:
    step = (hi - lo) / n
    return lo + (np.arange(n) + 0.5) * step


@dataclass(frozen=True)
class PriorSpec:
    """Uniform-grid prior over (phi, v); cell midpoints are the quadrature nodes.

    ``log_density`` (optional) is an unnormalized log prior on the grid, shape
    (n_phi, n_v); -inf marks excluded nodes.  Uniform when omitted.
    """

    phi_range: tuple[float, float]
    v_range: tuple[float, float] = DEFAULT_V_RANGE
    resolution: int | tuple[int, int] = DEFAULT_RESOLUTION
    log_density: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        lo, hi = self.phi_range
        vlo, vhi = self.v_range
        if not hi > lo:
            raise ValueError(f"degenerate phase range {self.phi_range}")
        if not (0.0 <= vlo < vhi <= 1.0):
            raise ValueError(f"visibility range must be a non-degenerate subset of [0, 1], got {self.v_range}")
        if min(self.shape) < MIN_RESOLUTION:
            raise ValueError(f"resolution must be at least {MIN_RESOLUTION} per axis")
        if self.log_density is not None:
            ld = np.asarray(self.log_density, dtype=float)
            if ld.shape != self.shape:
                raise ValueError(f"prior table shape {ld.shape} does not match grid {self.shape}")
            object.__setattr__(self, "log_density", ld)

    @classmethod
    def around(
        cls,
        phi_center: float,
        half_width: float = DEFAULT_PHI_HALF_WIDTH,
        v_range: tuple[float, float] = DEFAULT_V_RANGE,
        resolution: int | tuple[int, int] = DEFAULT_RESOLUTION,
    ) -> "PriorSpec":
        return cls((phi_center - half_width, phi_center + half_width), tuple(v_range), resolution)

    @classmethod
    def from_density(cls, phi_range, v_range, density) -> "PriorSpec":
        density = np.asarray(density, dtype=float)
        if np.any(density < 0):
            raise ValueError("prior density must be non-negative")
        with np.errstate(divide="ignore"):
            return cls(tuple(phi_range), tuple(v_range), density.shape, np.log(density))

    @property
    def shape(self) -> tuple[int, int]:
        r = self.resolution
        return (int(r), int(r)) if np.isscalar(r) else (int(r[0]), int(r[1]))

    @property
    def phi(self) -> np.ndarray:
        return _grid(*self.phi_range, self.shape[0])

    @property
    def v(self) -> np.ndarray:
        return _grid(*self.v_range, self.shape[1])

    def log_prior(self) -> np.ndarray:
        if self.log_density is None:
            return np.zeros(self.shape)
        return self.log_density


@dataclass(frozen=True)
class CountRecord:
    """Coincidence counts per setting; ``bunched`` holds per-arm two-photon counts if recorded.

    Counts are normally integers; expected (real-valued) counts are accepted
    for noiseless injection.
    """

    settings: np.ndarray
    coincidences: np.ndarray
    bunched: np.ndarray | None = None
    trials: int | None = None

    def __post_init__(self):
        s = np.asarray(self.settings, dtype=float).reshape(-1)
        n = np.asarray(self.coincidences)
        n = n.astype(np.int64) if np.issubdtype(n.dtype, np.integer) else n.astype(float)
        n = n.reshape(-1)
        if len(s) != len(n):
            raise ValueError(f"{len(s)} settings but {len(n)} coincidence counts")
        if np.any(n < 0):
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "settings", s)
        object.__setattr__(self, "coincidences", n)
        if self.bunched is not None:
            b = np.asarray(self.bunched).reshape(len(s), 2)
            if np.any(b < 0):
                raise ValueError("counts must be non-negative")
            object.__setattr__(self, "bunched", b)

    @property
    def M(self):
        """Total retained (coincidence) events."""
        return self.coincidences.sum()

    def __len__(self) -> int:
        return len(self.settings)

    def digest(self) -> str:
        h = hashlib.sha256()
        for arr in (self.settings, self.coincidences, self.bunched):
            if arr is not None:
                h.update(np.ascontiguousarray(arr, dtype=float).tobytes())
        return h.hexdigest()

    def split(self, fraction: float = 0.5) -> tuple["CountRecord", "CountRecord"]:
        first = np.floor(self.coincidences * fraction).astype(self.coincidences.dtype)
        return (
            CountRecord(self.settings, first),
            CountRecord(self.settings, self.coincidences - first),
        )


@dataclass(frozen=True)
class PosteriorGrid:
    phi: np.ndarray
    v: np.ndarray
    mass: np.ndarray
    log_mass: np.ndarray = field(repr=False)
    prior: PriorSpec = field(repr=False)
    counts_digest: str = ""

    def __post_init__(self):
        if np.any(self.mass < 0) or abs(self.mass.sum() - 1.0) > 1e-10:
            raise ValueError("posterior masses must be non-negative and sum to 1")

    def as_prior(self) -> PriorSpec:
        return PriorSpec(self.prior.phi_range, self.prior.v_range, self.prior.shape, self.log_mass)

    def marginal_phi(self) -> np.ndarray:
        return self.mass.sum(axis=1)

    def marginal_v(self) -> np.ndarray:
        return self.mass.sum(axis=0)


@dataclass(frozen=True)
class EstimateSummary:
    phi: float
    v: float
    covariance: np.ndarray
    M: float
    effective_nodes: float = np.inf

    @property
    def var_phi(self) -> float:
        return float(self.covariance[0, 0])

    @property
    def var_v(self) -> float:
        return float(self.covariance[1, 1])

    @property
    def cov_phi_v(self) -> float:
        return float(self.covariance[0, 1])

    def as_dict(self) -> dict:
        return {
            "phi_B": self.phi,
            "v_B": self.v,
            "var_phi": self.var_phi,
            "var_v": self.var_v,
            "cov_phi_v": self.cov_phi_v,
            "M": float(self.M),
            "effective_nodes": float(self.effective_nodes),
        }


def _log_likelihood(counts: CountRecord, phi_grid, v_grid, model: Callable) -> np.ndarray:
    ll = np.zeros((len(phi_grid), len(v_grid)))
    P, V = phi_grid[:, None], v_grid[None, :]
    for theta, n in zip(counts.settings, counts.coincidences):
        if n == 0:
            continue
        p = np.broadcast_to(model(theta, P, V), ll.shape)
        with np.errstate(divide="ignore"):
            ll += n * np.log(p)
    return ll


def _normalize(logm: np.ndarray) -> np.ndarray:
    top = np.max(logm)
    if not np.isfinite(top):
        raise EstimationError("posterior vanishes on every grid node")
    m = np.exp(logm - top)
    return m / m.sum()


def bayes_update(prior: PriorSpec, counts: CountRecord, model: Callable = prob_postselected) -> PosteriorGrid:
    """Posterior over the prior grid: prior x prod_theta p(theta|phi,v)^n_theta.

    ``model(theta, phi, v)`` must broadcast over grid arrays.
    """
    if len(counts) == 0:
        raise EstimationError("empty count record")
    logm = prior.log_prior() + _log_likelihood(counts, prior.phi, prior.v, model)
    return PosteriorGrid(prior.phi, prior.v, _normalize(logm), logm, prior, counts.digest())


def moments(post: PosteriorGrid, require_resolved: bool = True, M=None) -> EstimateSummary:
    """Posterior means and central second moments on the grid."""
    m = post.mass
    n_eff = 1.0 / np.sum(m * m)
    mp, mv = post.marginal_phi(), post.marginal_v()
    phi_b = float(mp @ post.phi)
    v_b = float(mv @ post.v)
    dphi = post.phi - phi_b
    dv = post.v - v_b
    var_phi = float(mp @ dphi**2)
    var_v = float(mv @ dv**2)
    cov = float(dphi @ m @ dv)
    if n_eff < MIN_EFFECTIVE_NODES:
        if require_resolved:
            raise UnderResolvedPosterior(
                f"posterior concentrated on ~{n_eff:.2f} grid nodes; refine the grid or narrow the prior"
            )
    Sigma = np.array([[var_phi, cov], [cov, var_v]])
    return EstimateSummary(phi_b, v_b, Sigma, np.nan if M is None else M, n_eff)


def estimate(prior: PriorSpec, counts: CountRecord, model: Callable = prob_postselected) -> EstimateSummary:
    return moments(bayes_update(prior, counts, model), M=counts.M)


def _generator(seed=None, rng=None) -> np.random.Generator:
    if rng is not None:
        return rng
    return np.random.default_rng(seed)


def postselected_distribution(phi: float, v: float, settings=CANONICAL_SETTINGS) -> np.ndarray:
    """Coincidence distribution over settings; equals prob_postselected for the canonical set."""
    p1 = np.asarray(probs_full(np.asarray(settings, dtype=float), phi, v).p1)
    return p1 / p1.sum()


def sample_counts(
    phi: float,
    v: float,
    M: int,
    seed=None,
    mode: str = "postselected",
    settings: Sequence[float] = CANONICAL_SETTINGS,
    rng: np.random.Generator | None = None,
) -> CountRecord:
    """Simulate the experiment.

    ``postselected``: M coincidences spread over the settings.
    ``full``: M trials with uniformly random settings, each resolving coincidence
    or bunching in either arm.
    """
    if M < 1:
        raise ValueError(f"M must be at least 1, got {M!r}")
    settings = np.asarray(settings, dtype=float)
    gen = _generator(seed, rng)
    if mode == "postselected":
        return CountRecord(settings, gen.multinomial(M, postselected_distribution(phi, v, settings)))
    if mode == "full":
        per_setting = gen.multinomial(M, np.full(len(settings), 1 / len(settings)))
        pr = probs_full(settings, phi, v)
        coinc = np.empty(len(settings), dtype=np.int64)
        bunched = np.empty((len(settings), 2), dtype=np.int64)
        for i, m in enumerate(per_setting):
            p1, p2 = float(pr.p1[i]), float(pr.p2[i])
            # renormalize against rounding before sampling
            p = np.array([p1, p2, p2]) / (p1 + 2 * p2)
            coinc[i], bunched[i, 0], bunched[i, 1] = gen.multinomial(m, p)
        return CountRecord(settings, coinc, bunched, trials=M)
    raise ValueError(f"unknown sampling mode {mode!r}")


def expected_counts(phi: float, v: float, M: float, settings=CANONICAL_SETTINGS) -> CountRecord:
    """Noiseless injection: counts equal to M times the post-selected probabilities."""
    settings = np.asarray(settings, dtype=float)
    return CountRecord(settings, M * postselected_distribution(phi, v, settings))


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    slope_stderr: float
    intercept_stderr: float

    def as_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "slope_stderr": self.slope_stderr,
            "intercept_stderr": self.intercept_stderr,
        }


def linear_fit(x, y) -> LinearFit:
    r = stats.linregress(x, y)
    return LinearFit(float(r.slope), float(r.intercept), float(r.stderr), float(r.intercept_stderr))


@dataclass(frozen=True)
class CalibrationFit:
    phases: np.ndarray
    estimates: list[EstimateSummary]
    phi_fit: LinearFit
    v_fit: LinearFit

    @property
    def s_phi(self) -> float:
        return self.phi_fit.slope

    @property
    def s_v(self) -> float:
        return self.v_fit.slope


def calibration_sweep(
    phases: Sequence[float],
    true_v: float,
    M_per_point: int,
    seed=None,
    noiseless: bool = False,
    half_width: float = DEFAULT_PHI_HALF_WIDTH,
    v_range: tuple[float, float] = DEFAULT_V_RANGE,
    resolution: int = DEFAULT_RESOLUTION,
) -> CalibrationFit:
    """Estimate (phi, v) at each imparted phase and fit both against it linearly.

    The prior for each point is centered on the imparted phase, as a
    calibration knows the nominal plate setting.
    """
    phases = np.asarray(phases, dtype=float)
    if len(phases) < 3:
        raise ValueError("calibration needs at least 3 phases")
    rng = np.random.default_rng(seed)
    estimates = []
    for phase in phases:
        if noiseless:
            counts = expected_counts(phase, true_v, M_per_point)
        else:
            counts = sample_counts(phase, true_v, M_per_point, rng=rng)
        prior = PriorSpec.around(phase, half_width, v_range, resolution)
        estimates.append(estimate(prior, counts))
    phi_hat = np.array([e.phi for e in estimates])
    v_hat = np.array([e.v for e in estimates])
    return CalibrationFit(phases, estimates, linear_fit(phases, phi_hat), linear_fit(phases, v_hat))


@dataclass(frozen=True)
class SingleParamEstimate:
    phi: float
    var_phi: float
    M: float


def estimate_single_param(
    counts: CountRecord,
    v0: float,
    phi_range: tuple[float, float],
    resolution: int = 4096,
) -> SingleParamEstimate:
    """Phase-only posterior with the visibility frozen at a pre-calibrated ``v0``."""
    if len(counts) == 0:
        raise EstimationError("empty count record")
    phi = _grid(*phi_range, resolution)
    ll = np.zeros_like(phi)
    for theta, n in zip(counts.settings, counts.coincidences):
        if n:
            with np.errstate(divide="ignore"):
                ll += n * np.log(prob_single_param(theta, phi, v0))
    m = _normalize(ll)
    if 1.0 / np.sum(m * m) < MIN_EFFECTIVE_NODES:
        raise UnderResolvedPosterior("single-parameter posterior is under-resolved")
    mean = float(m @ phi)
    return SingleParamEstimate(mean, float(m @ (phi - mean) ** 2), counts.M)


def locate_phase(counts: CountRecord, v_range: tuple[float, float] = DEFAULT_V_RANGE) -> float:
    """Coarse MAP phase over one full period, used to center a fine prior."""
    coarse = PriorSpec((-np.pi / 2, np.pi / 2), v_range, (720, 32))
    post = bayes_update(coarse, counts)
    return float(post.phi[np.argmax(post.marginal_phi())])
