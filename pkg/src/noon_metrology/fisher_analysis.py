"""Fisher information, Cramer-Rao bounds and the likelihood-ratio test for the two-photon model."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy import stats

from .noon2_model import CANONICAL_SETTINGS, probs_full

ZERO_TOL = 1e-15
PSD_TOL = 1e-10
COND_LIMIT = 1e12
LRT_DOF = 3
LRT_CRITICAL_95 = float(stats.chi2.ppf(0.95, LRT_DOF))
REFERENCE_LRT_CRITICAL = 7.81

Convention = Literal["main", "appendix"]
LRTForm = Literal["verbatim", "anderson"]


class SingularFisherError(ValueError):
    """Raised when the information matrix cannot be inverted."""

    def __init__(self, message: str, parameter: str | None = None):
        super().__init__(message)
        self.parameter = parameter


@dataclass(frozen=True)
class FisherMatrix2:
    """Symmetric 2x2 information matrix.

    ``divergent`` lists parameters whose information is infinite at this point
    (probability zeros with non-vanishing derivative).  Their off-diagonal
    entries are reported as the symmetric principal value, 0.
    """

    matrix: np.ndarray
    flavor: str
    point: tuple[float, float]
    labels: tuple[str, str] = ("phi", "v")
    convention: str = "main"
    divergent: tuple[str, ...] = ()
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        F = np.array(self.matrix, dtype=float)
        if F.shape != (2, 2):
            raise ValueError(f"expected a 2x2 matrix, got shape {F.shape}")
        if not np.isclose(F[0, 1], F[1, 0], rtol=1e-9, atol=1e-12):
            raise ValueError("Fisher matrix is not symmetric")
        F[1, 0] = F[0, 1]
        if np.any(np.diag(F) < -PSD_TOL):
            raise ValueError("negative diagonal Fisher entry")
        if not self.divergent:
            scale = max(1.0, float(np.max(np.abs(F))))
            if np.min(np.linalg.eigvalsh(F)) < -PSD_TOL * scale:
                raise ValueError("Fisher matrix is not positive semidefinite")
        F.setflags(write=False)
        object.__setattr__(self, "matrix", F)

    def __getitem__(self, key) -> float:
        i, j = (self.labels.index(k) if isinstance(k, str) else k for k in key)
        return float(self.matrix[i, j])

    @property
    def singular(self) -> bool:
        return bool(self.divergent)

    @property
    def xi(self) -> float:
        """Normalized off-diagonal correlation F_01 / sqrt(F_00 F_11)."""
        return correlation(self.matrix)

    def scaled(self, factor: float) -> "FisherMatrix2":
        return FisherMatrix2(
            self.matrix * factor, self.flavor, self.point, self.labels,
            self.convention, self.divergent, self.flags,
        )


def correlation(F) -> float:
    F = np.asarray(F, dtype=float)
    if F[0, 1] == 0:
        return 0.0
    xi = F[0, 1] / np.sqrt(F[0, 0] * F[1, 1])
    return float(np.clip(xi, -1.0, 1.0))


def _check_point(v):
    if not (0.0 < v <= 1.0):
        raise ValueError(f"Fisher information requires 0 < v <= 1, got {v!r}")


def _sum_terms(phiphi, vv, phiv, zero_mask, phiphi_limit, weight):
    """Sum per-outcome contributions, replacing the zero-probability terms by their limits."""
    divergent = bool(np.any(zero_mask))
    phiphi = np.where(zero_mask, phiphi_limit, phiphi)
    vv = np.where(zero_mask, 0.0, vv)
    phiv = np.where(zero_mask, 0.0, phiv)
    F = weight * np.array([[phiphi.sum(), phiv.sum()], [phiv.sum(), vv.sum()]])
    if divergent:
        F[1, 1] = np.inf
    return F, divergent


def fisher_postselected(
    phi: float,
    v: float,
    settings: Sequence[float] = CANONICAL_SETTINGS,
    convention: Convention = "main",
) -> FisherMatrix2:
    """Information per retained coincidence from the post-selected setting distribution.

    ``convention="main"`` sums over settings with no prefactor, so M counts retained
    events; ``"appendix"`` includes the 1/4 uniform setting weight.
    """
    _check_point(v)
    x = 8 * np.asarray(settings, dtype=float) - 2 * phi
    s, c = np.sin(x), np.cos(x)
    D = 1 + v * c
    zero = D <= ZERO_TOL
    Dsafe = np.where(zero, 1.0, D)
    phiphi = v**2 * s**2 / Dsafe
    vv = c**2 / (4 * Dsafe)
    phiv = v * s * c / (2 * Dsafe)
    # at v = 1, cos x = -1: v^2 sin^2 x / (1 + cos x) -> 1 - cos x
    weight = 1.0 if convention == "main" else 0.25
    if convention not in ("main", "appendix"):
        raise ValueError(f"unknown convention {convention!r}")
    F, divergent = _sum_terms(phiphi, vv, phiv, zero, 1 - c, weight)
    return FisherMatrix2(
        F, "postselected", (phi, v), convention=convention,
        divergent=("v",) if divergent else (),
    )


def fisher_full(phi: float, v: float, settings: Sequence[float] = CANONICAL_SETTINGS) -> FisherMatrix2:
    """Information per trial of the complete POVM: uniform random setting, three outcomes."""
    _check_point(v)
    theta = np.asarray(settings, dtype=float)
    x = 8 * theta - 2 * phi
    y = 4 * theta - phi
    s, c = np.sin(x), np.cos(x)
    D = 1 + v * c
    zero = D <= ZERO_TOL
    Dsafe = np.where(zero, 1.0, D)

    phiphi1 = 4 * v**2 * s**2 / ((1 + v) * Dsafe)
    vv1 = (c - 1) ** 2 / ((1 + v) ** 3 * Dsafe)
    phiv1 = 2 * v * s * (c - 1) / ((1 + v) ** 2 * Dsafe)
    # each bunched outcome has probability p2; the ratios below are already simplified
    phiphi2 = 2 * 4 * v * np.cos(y) ** 2 / (1 + v)
    vv2 = 2 * np.sin(y) ** 2 / (v * (1 + v) ** 3)
    phiv2 = -2 * np.sin(2 * y) / (1 + v) ** 2

    # at v = 1, cos x = -1: 4 sin^2 x / (2 (1 + cos x)) -> 2 (1 - cos x)
    F1, divergent = _sum_terms(phiphi1, vv1, phiv1, zero, 2 * (1 - c), 1.0)
    F2 = np.array([[phiphi2.sum(), phiv2.sum()], [phiv2.sum(), vv2.sum()]])
    F = (F1 + F2) / len(theta)
    return FisherMatrix2(
        F, "full", (phi, v), convention="appendix",
        divergent=("v",) if divergent else (),
    )


def success_probability(phi: float, v: float, settings: Sequence[float] = CANONICAL_SETTINGS) -> float:
    """Probability that a trial with a uniformly random setting yields a coincidence."""
    return float(np.mean(probs_full(np.asarray(settings, dtype=float), phi, v).p1))


def weighted_postselected(phi: float, v: float, settings: Sequence[float] = CANONICAL_SETTINGS) -> FisherMatrix2:
    """Post-selected information per trial: per-coincidence information times success probability."""
    F = fisher_postselected(phi, v, settings, convention="main")
    return FisherMatrix2(
        F.matrix * success_probability(phi, v, settings), "postselected-weighted",
        (phi, v), divergent=F.divergent,
    )


@dataclass(frozen=True)
class CRBReport:
    bound: np.ndarray
    M: float
    xi: float
    labels: tuple[str, str] = ("phi", "v")

    @property
    def var_phi(self) -> float:
        return float(self.bound[0, 0])

    @property
    def var_v(self) -> float:
        return float(self.bound[1, 1])

    @property
    def cov_phi_v(self) -> float:
        return float(self.bound[0, 1])

    def as_dict(self) -> dict:
        a, b = self.labels
        return {
            f"var_{a}": self.var_phi,
            f"var_{b}": self.var_v,
            f"cov_{a}_{b}": self.cov_phi_v,
            "xi": self.xi,
            "M": self.M,
        }


def _matrix(F) -> tuple[np.ndarray, tuple[str, str]]:
    if isinstance(F, FisherMatrix2):
        if F.divergent:
            raise SingularFisherError(
                f"information on {', '.join(F.divergent)} diverges at this point", F.divergent[0]
            )
        return F.matrix, F.labels
    return np.asarray(F, dtype=float), ("phi", "v")


def crb(F, M: float) -> CRBReport:
    """Cramer-Rao bound F^-1 / M for M independent events."""
    if M <= 0:
        raise ValueError(f"M must be positive, got {M!r}")
    Fm, labels = _matrix(F)
    if not np.all(np.isfinite(Fm)) or np.linalg.cond(Fm) >= COND_LIMIT:
        w, vecs = np.linalg.eigh(np.nan_to_num(Fm, posinf=0.0))
        weak = labels[int(np.argmax(np.abs(vecs[:, 0])))]
        raise SingularFisherError(f"Fisher matrix is singular; {weak} is not informative", weak)
    return CRBReport(np.linalg.inv(Fm) / M, M, correlation(Fm), labels)


@dataclass(frozen=True)
class LRTResult:
    statistic: float
    form: str
    dof: int = LRT_DOF
    critical_value: float = LRT_CRITICAL_95

    @property
    def compatible(self) -> bool:
        return self.statistic <= self.critical_value

    def as_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "form": self.form,
            "dof": self.dof,
            "critical_value_95": self.critical_value,
            "verdict": "compatible" if self.compatible else "incompatible",
        }


def lrt_statistic(F, Sigma, M: float, form: LRTForm = "verbatim") -> LRTResult:
    """Likelihood-ratio statistic for the hypothesis that Sigma saturates the CRB.

    ``verbatim``: l = M^2 tr(F Sigma) - M (ln det Sigma + ln det(M F)) - 2.
    ``anderson``: l = M [tr(M F Sigma) - ln det(M F Sigma) - 2], the standard
    covariance-test form.  The two differ by 2M - 2.
    """
    Fm, _ = _matrix(F)
    S = np.asarray(Sigma, dtype=float)
    if S.shape != (2, 2) or not np.allclose(S, S.T, rtol=1e-9, atol=0):
        raise ValueError("Sigma must be a symmetric 2x2 matrix")
    sign_s, logdet_s = np.linalg.slogdet(S)
    if sign_s <= 0 or np.min(np.linalg.eigvalsh(S)) <= 0:
        raise ValueError("Sigma is not positive definite")
    sign_f, logdet_mf = np.linalg.slogdet(M * Fm)
    if sign_f <= 0:
        raise SingularFisherError("M F is not positive definite")
    tr = float(np.trace(Fm @ S))
    if form == "verbatim":
        l = M**2 * tr - M * (logdet_s + logdet_mf) - 2
    elif form == "anderson":
        l = M * (M * tr - (logdet_s + logdet_mf) - 2)
    else:
        raise ValueError(f"unknown LRT form {form!r}")
    return LRTResult(float(l), form)


@dataclass(frozen=True)
class LRTCalibration:
    """Empirical null distribution of the LRT statistic, both forms."""

    point: tuple[float, float]
    M: int
    statistics: dict[str, np.ndarray] = field(repr=False)
    quantile_levels: tuple[float, ...] = (0.5, 0.9, 0.95, 0.99)

    def empirical_quantiles(self, form: LRTForm = "anderson") -> dict[float, float]:
        l = self.statistics[form]
        return {q: float(np.quantile(l, q)) for q in self.quantile_levels}

    @property
    def chi2_quantiles(self) -> dict[float, float]:
        return {q: float(stats.chi2.ppf(q, LRT_DOF)) for q in self.quantile_levels}

    def as_dict(self) -> dict:
        return {
            "point": {"phi_rad": self.point[0], "v": self.point[1]},
            "M": self.M,
            "repetitions": int(len(self.statistics["verbatim"])),
            "chi2_dof": LRT_DOF,
            "chi2_quantiles": {str(q): x for q, x in self.chi2_quantiles.items()},
            "reference_critical_95": REFERENCE_LRT_CRITICAL,
            "empirical_quantiles": {
                form: {str(q): x for q, x in self.empirical_quantiles(form).items()}
                for form in self.statistics
            },
            "fraction_above_critical": {
                form: float(np.mean(l > LRT_CRITICAL_95)) for form, l in self.statistics.items()
            },
        }


def lrt_null_calibration(
    phi: float,
    v: float,
    M: int,
    repetitions: int = 1000,
    seed: int = 0,
    prior=None,
) -> LRTCalibration:
    """Simulate data at the null point and collect the LRT statistic of each run.

    Sigma is the posterior covariance of each run, F the post-selected
    information at the true point.
    """
    from .bayes_estimator import PriorSpec, bayes_update, moments, sample_counts

    if M <= 0:
        raise ValueError(f"M must be positive, got {M!r}")
    if repetitions < 100:
        raise ValueError(f"need at least 100 repetitions, got {repetitions}")
    if prior is None:
        prior = PriorSpec.around(phi)
    F = fisher_postselected(phi, v).matrix
    rng = np.random.default_rng(seed)
    out = {"verbatim": [], "anderson": []}
    for _ in range(repetitions):
        counts = sample_counts(phi, v, M, rng=rng)
        est = moments(bayes_update(prior, counts))
        for form in out:
            out[form].append(lrt_statistic(F, est.covariance, counts.M, form).statistic)
    return LRTCalibration((phi, v), M, {k: np.array(x) for k, x in out.items()})
