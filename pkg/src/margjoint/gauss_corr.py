"""Pooled correlation of two continuous variables from study-level summaries.

Study means ``(m1j, m2j)`` are modelled as bivariate normal around grand means
with between-study spreads ``psi`` and correlation ``rho_star``; patient
values scatter around their study mean with within-study variances
``sigma_kj^2`` (estimated by the reported ``s_kj``) and a common correlation
``rho``. The patient-level correlation across all studies is then::

    rho_x = (rho_star + a * rho) / A
    a = sum(n_j s1_j s2_j) / (n psi1 psi2)
    A = sqrt((1 + sum(n_j s1_j^2) / (n psi1^2)) * (1 + sum(n_j s2_j^2) / (n psi2^2)))

with ``s_kj = sqrt(sigma_kj^2)`` here. ``rho`` is not identified from the
summaries; the simulators substitute the estimated ``rho_star`` for it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._parallel import ordered_map
from .exceptions import DomainError
from .streams import GAUSS_SIM, RELATION, stream

__all__ = [
    "ContinuousStudySummary",
    "HierEstimates",
    "CorrelationResult",
    "GaussSimSettings",
    "SETTINGS",
    "estimate_hier",
    "rho_x",
    "formula_correlation",
    "two_step_correlation",
    "simulate_formula_based",
    "simulate_two_step",
    "rho_relation_experiment",
    "analytic_rho_x",
]


@dataclass(frozen=True)
class ContinuousStudySummary:
    """Study size, means and variance estimates (not SDs) of X1 and X2."""

    n: int
    m1: float
    m2: float
    s1: float
    s2: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be an integer >= 1, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        for name in ("m1", "m2", "s1", "s2"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise DomainError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if self.s1 < 0 or self.s2 < 0:
            raise DomainError(f"variances must be non-negative, got s1={self.s1}, s2={self.s2}")


@dataclass(frozen=True)
class HierEstimates:
    theta1: float
    theta2: float
    psi1: float
    psi2: float
    rho_star: float
    sigma1_sq: np.ndarray
    sigma2_sq: np.ndarray


@dataclass(frozen=True)
class CorrelationResult:
    rho_x: float
    var1: float
    var2: float
    cov: float
    a: float | None = None
    A: float | None = None


def _moment_estimates(m1, m2):
    theta1, theta2 = m1.mean(), m2.mean()
    d1, d2 = m1 - theta1, m2 - theta2
    ss1, ss2 = np.dot(d1, d1), np.dot(d2, d2)
    if not (ss1 > 0 and ss2 > 0):
        raise DomainError("study means show no spread; between-study correlation undefined")
    psi1 = math.sqrt(ss1 / len(m1))
    psi2 = math.sqrt(ss2 / len(m2))
    rho_star = float(np.clip(np.dot(d1, d2) / math.sqrt(ss1 * ss2), -1.0, 1.0))
    return float(theta1), float(theta2), psi1, psi2, rho_star


def estimate_hier(studies) -> HierEstimates:
    """Moment estimates of the between- and within-study parameters.

    ``psi`` uses divisor ``J``; the within-study variances are the reported
    ``s`` values unchanged.
    """
    studies = list(studies)
    if len(studies) < 2:
        raise DomainError(f"need at least two studies, got {len(studies)}")
    m1 = np.array([s.m1 for s in studies])
    m2 = np.array([s.m2 for s in studies])
    theta1, theta2, psi1, psi2, rho_star = _moment_estimates(m1, m2)
    return HierEstimates(
        theta1,
        theta2,
        psi1,
        psi2,
        rho_star,
        np.array([s.s1 for s in studies]),
        np.array([s.s2 for s in studies]),
    )


def rho_x(est: HierEstimates, sizes, rho: float) -> CorrelationResult:
    """Patient-level correlation implied by the hierarchical model."""
    if not -1.0 <= rho <= 1.0:
        raise DomainError(f"rho must lie in [-1, 1], got {rho}")
    sizes = np.asarray(sizes, dtype=float)
    if sizes.shape != est.sigma1_sq.shape:
        raise DomainError(f"need one size per study ({est.sigma1_sq.size}), got {sizes.size}")
    n = sizes.sum()
    sig1 = np.sqrt(est.sigma1_sq)
    sig2 = np.sqrt(est.sigma2_sq)
    within1 = np.dot(sizes, est.sigma1_sq) / n
    within2 = np.dot(sizes, est.sigma2_sq) / n
    within12 = np.dot(sizes, sig1 * sig2) / n
    var1 = est.psi1**2 + within1
    var2 = est.psi2**2 + within2
    if not (var1 > 0 and var2 > 0):
        raise DomainError("pooled variance is zero; correlation undefined")
    cov = est.rho_star * est.psi1 * est.psi2 + rho * within12
    value = float(np.clip(cov / math.sqrt(var1 * var2), -1.0, 1.0))
    a = big_a = None
    if est.psi1 * est.psi2 > 0:
        a = within12 / (est.psi1 * est.psi2)
        big_a = math.sqrt((1 + within1 / est.psi1**2) * (1 + within2 / est.psi2**2))
    return CorrelationResult(value, float(var1), float(var2), float(cov), a, big_a)


def analytic_rho_x(settings: "GaussSimSettings") -> float:
    """``rho_x`` at the true parameters with ``rho = rho_star`` and ``s`` at its mean."""
    es1 = settings.ig_rate1 / (settings.ig_shape1 - 1)
    es2 = settings.ig_rate2 / (settings.ig_shape2 - 1)
    est = HierEstimates(
        settings.theta1,
        settings.theta2,
        settings.psi1,
        settings.psi2,
        settings.rho_star,
        np.full(settings.J, es1),
        np.full(settings.J, es2),
    )
    return rho_x(est, np.full(settings.J, settings.group_size), settings.rho_star).rho_x


@dataclass(frozen=True)
class GaussSimSettings:
    theta1: float = 175.0
    theta2: float = 75.0
    psi1: float = 7.0
    psi2: float = 4.0
    rho_star: float = 0.85
    ig_shape1: float = 3.0
    ig_rate1: float = 2.0
    ig_shape2: float = 2.0
    ig_rate2: float = 0.5
    J: int = 50
    group_size: int = 50
    reps: int = 600
    seed: int = 0

    def __post_init__(self):
        if not (self.psi1 > 0 and self.psi2 > 0):
            raise DomainError("psi1 and psi2 must be positive")
        if not -1.0 <= self.rho_star <= 1.0:
            raise DomainError(f"rho_star must lie in [-1, 1], got {self.rho_star}")
        if not (self.ig_shape1 > 1 and self.ig_shape2 > 1):
            raise DomainError("inverse-gamma shapes must exceed 1 for a finite mean")
        if not (self.ig_rate1 > 0 and self.ig_rate2 > 0):
            raise DomainError("inverse-gamma rates must be positive")
        if self.J < 2:
            raise DomainError(f"J must be >= 2, got {self.J}")
        if self.group_size < 2:
            raise DomainError(f"group_size must be >= 2, got {self.group_size}")
        if self.reps < 1:
            raise DomainError(f"reps must be >= 1, got {self.reps}")
        if self.seed < 0:
            raise DomainError(f"seed must be non-negative, got {self.seed}")


# Four settings differing only in rho_star.
SETTINGS = {i: GaussSimSettings(rho_star=r) for i, r in zip((1, 2, 3, 4), (0.85, 0.65, 0.45, 0.25))}


def _correlated_normals(rng, rho, size):
    """Standard normal pairs with correlation ``rho`` (explicit 2x2 Cholesky)."""
    u1 = rng.standard_normal(size)
    u2 = rng.standard_normal(size)
    return u1, rho * u1 + math.sqrt(max(0.0, 1.0 - rho * rho)) * u2


def _study_level_draws(s: GaussSimSettings, rng):
    u1, u2 = _correlated_normals(rng, s.rho_star, s.J)
    m1 = s.theta1 + s.psi1 * u1
    m2 = s.theta2 + s.psi2 * u2
    # shape-rate inverse gamma: 1 / Gamma(shape, scale=1/rate)
    s1 = 1.0 / rng.gamma(s.ig_shape1, 1.0 / s.ig_rate1, size=s.J)
    s2 = 1.0 / rng.gamma(s.ig_shape2, 1.0 / s.ig_rate2, size=s.J)
    return m1, m2, s1, s2


def formula_correlation(m1, m2, s1, s2, sizes) -> float:
    """Plug-in ``rho_x`` from study summaries with ``rho`` replaced by ``rho_star``."""
    studies = [ContinuousStudySummary(n, a, b, c, d) for n, a, b, c, d in zip(sizes, m1, m2, s1, s2)]
    est = estimate_hier(studies)
    return rho_x(est, sizes, est.rho_star).rho_x


def two_step_correlation(m1, m2, s1, s2, sizes, rho: float, rng) -> float:
    """Pearson correlation of patient data simulated around the study means.

    Within study ``j`` the errors are bivariate normal with variances
    ``(s1_j, s2_j)`` and correlation ``rho``.
    """
    x1, x2 = [], []
    for j, n_j in enumerate(sizes):
        e1, e2 = _correlated_normals(rng, rho, int(n_j))
        x1.append(m1[j] + math.sqrt(s1[j]) * e1)
        x2.append(m2[j] + math.sqrt(s2[j]) * e2)
    x1 = np.concatenate(x1)
    x2 = np.concatenate(x2)
    return float(np.corrcoef(x1, x2)[0, 1])


def _formula_rep(args):
    s, rep = args
    m1, m2, s1, s2 = _study_level_draws(s, stream(s.seed, GAUSS_SIM, rep))
    try:
        return formula_correlation(m1, m2, s1, s2, [s.group_size] * s.J)
    except DomainError:
        return math.nan


def _two_step_rep(args):
    s, rep = args
    m1, m2, s1, s2 = _study_level_draws(s, stream(s.seed, GAUSS_SIM, rep))
    try:
        rho_star = _moment_estimates(m1, m2)[4]
    except DomainError:
        return math.nan
    return two_step_correlation(m1, m2, s1, s2, [s.group_size] * s.J, rho_star, stream(s.seed, GAUSS_SIM, rep, 1))


def simulate_formula_based(settings: GaussSimSettings, workers: int = 1) -> np.ndarray:
    """Per-repetition ``rho_x`` from the closed-form estimator (NaN marks a failed rep)."""
    return np.array(ordered_map(_formula_rep, [(settings, r) for r in range(settings.reps)], workers))


def simulate_two_step(settings: GaussSimSettings, workers: int = 1) -> np.ndarray:
    """Per-repetition ``rho_x`` from simulated patient-level data.

    Repetition ``r`` shares its study-level draws with repetition ``r`` of
    :func:`simulate_formula_based` under the same seed, so per-rep differences
    isolate the patient-level noise.
    """
    return np.array(ordered_map(_two_step_rep, [(settings, r) for r in range(settings.reps)], workers))


def rho_relation_experiment(mu, phis, rho_gen: float, sizes, repeats: int = 4, seed: int = 0):
    """Within-group sample correlations of data generated at correlation ``rho_gen``.

    Returns ``(repeat, group, rho_gen, rho_hat)`` tuples.
    """
    sizes = [int(s) for s in sizes]
    if any(s < 2 for s in sizes):
        raise DomainError("every group needs at least two observations")
    if len(phis) != len(sizes):
        raise DomainError(f"need one sd pair per group ({len(sizes)}), got {len(phis)}")
    if not -1.0 <= rho_gen <= 1.0:
        raise DomainError(f"rho_gen must lie in [-1, 1], got {rho_gen}")
    out = []
    for r in range(repeats):
        rng = stream(seed, RELATION, r)
        for j, (n_j, (phi1, phi2)) in enumerate(zip(sizes, phis)):
            u1, u2 = _correlated_normals(rng, rho_gen, n_j)
            x1 = mu[0] + phi1 * u1
            x2 = mu[1] + phi2 * u2
            out.append((r, j, float(rho_gen), float(np.corrcoef(x1, x2)[0, 1])))
    return out
