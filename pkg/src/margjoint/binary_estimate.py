"""Maximum likelihood estimation of ``(p1, p2, p11)`` from marginal summaries.

The marginals have closed-form MLEs (pooled proportions). ``p11`` is found by
maximising the profile log-likelihood with the marginals held at their MLEs:
a grid over the feasible interval picks a starting bracket, then a safeguarded
Newton iteration on the exact score refines it. Standard errors come from the
pooled-proportion formula (marginals) and the observed Fisher information
(``p11``). Two interval families are produced: normal-approximation intervals
and likelihood-ratio intervals, both clipped to the parameter constraints.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Literal

import numpy as np
from scipy import optimize, stats

from .binary_core import (
    JointBinaryParams,
    SummaryCollection,
    _as_collection,
    log_likelihood,
    phi_coefficient,
    score_and_curvature,
)
from .exceptions import ConvergenceError, DomainError

__all__ = [
    "EstimateOptions",
    "PointEstimate",
    "IntervalEstimate",
    "EstimateReport",
    "estimate_marginals",
    "feasible_p11_interval",
    "profile_loglik_p11",
    "profile_loglik_grid",
    "estimate_p11",
    "se_p11",
    "normal_ci",
    "lr_statistic_p11",
    "lr_ci_p11",
    "lr_ci_marginal",
    "full_estimate",
]

NORMAL = "normal"
LIKELIHOOD_RATIO = "likelihood_ratio"

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class EstimateOptions:
    grid_points: int = 101
    tol: float = 1e-8
    max_iter: int = 500
    boundary_eps: float = 1e-9
    alpha: float = 0.05

    def __post_init__(self):
        if int(self.grid_points) != self.grid_points or self.grid_points < 3:
            raise DomainError(f"grid_points must be an integer >= 3, got {self.grid_points}")
        if not self.tol > 0:
            raise DomainError(f"tol must be positive, got {self.tol}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise DomainError(f"max_iter must be a positive integer, got {self.max_iter}")
        if not 0 < self.boundary_eps < 1e-3:
            raise DomainError(f"boundary_eps must lie in (0, 1e-3), got {self.boundary_eps}")
        if not 0 < self.alpha < 1:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")


@dataclass(frozen=True)
class PointEstimate:
    """Point estimate with its standard error.

    ``se`` is ``None`` when it cannot be estimated (non-negative curvature of
    the profile, or a parameter that is pinned by degenerate marginals).
    """

    value: float
    se: float | None
    boundary: bool = False

    @property
    def se_available(self) -> bool:
        return self.se is not None


@dataclass(frozen=True)
class IntervalEstimate:
    lower: float
    upper: float
    method: str
    clipped_low: bool = False
    clipped_high: bool = False

    def __post_init__(self):
        if self.lower > self.upper:
            raise DomainError(f"interval lower {self.lower} exceeds upper {self.upper}")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


@dataclass(frozen=True)
class EstimateReport:
    p1: PointEstimate
    p2: PointEstimate
    p11: PointEstimate
    ci1_p1: IntervalEstimate
    ci1_p2: IntervalEstimate
    ci1_p11: IntervalEstimate | None
    ci2_p1: IntervalEstimate
    ci2_p2: IntervalEstimate
    ci2_p11: IntervalEstimate
    phi: float
    loglik_at_mle: float
    optimizer_iterations: int
    grid_argmax: float
    alpha: float

    @property
    def params(self) -> JointBinaryParams:
        return JointBinaryParams(self.p1.value, self.p2.value, self.p11.value)

    def to_dict(self) -> dict:
        return asdict(self)


def estimate_marginals(data) -> tuple[PointEstimate, PointEstimate]:
    """Pooled-proportion MLEs of ``p1`` and ``p2`` with their standard errors."""
    data = _as_collection(data)
    total = data.sum_n
    if total < 1:
        raise DomainError("total sample size must be >= 1")
    out = []
    for count in (data.sum_x, data.sum_y):
        p = count / total
        out.append(PointEstimate(p, math.sqrt(p * (1.0 - p) / total), boundary=p in (0.0, 1.0)))
    return out[0], out[1]


def feasible_p11_interval(p1: float, p2: float) -> tuple[float, float]:
    """Values of ``p11`` compatible with the marginals ``p1`` and ``p2``."""
    return max(0.0, p1 + p2 - 1.0), min(p1, p2)


def _clamped_interval(p1: float, p2: float, eps: float) -> tuple[float, float]:
    lo, hi = feasible_p11_interval(p1, p2)
    return max(eps, lo + eps), hi - eps


def profile_loglik_p11(data, p11: float, opts: EstimateOptions | None = None) -> float:
    """Log-likelihood at ``(p1_hat, p2_hat, p11)``."""
    data = _as_collection(data)
    opts = opts or EstimateOptions()
    m1, m2 = estimate_marginals(data)
    lo, hi = _clamped_interval(m1.value, m2.value, opts.boundary_eps)
    if not lo <= p11 <= hi:
        raise DomainError(f"p11={p11} outside the clamped feasible interval [{lo}, {hi}]")
    return log_likelihood(data, JointBinaryParams(m1.value, m2.value, p11))


def profile_loglik_grid(data, p1: float, p2: float, grid) -> np.ndarray:
    """Log-likelihood at ``(p1, p2, g)`` for every interior ``g`` in ``grid``.

    Evaluates the whole grid in one vectorised pass over the latent layout.
    """
    data = _as_collection(data)
    grid = np.asarray(grid, dtype=float)
    q11 = grid
    q10 = p1 - grid
    q01 = p2 - grid
    q00 = 1.0 - (p1 + p2) + grid
    if min(q11.min(), q10.min(), q01.min(), q00.min()) <= 0.0:
        raise DomainError("grid points must be strictly interior")
    lay = data._layout
    log_terms = (
        lay.log_coef[None, :]
        + np.log(q11)[:, None] * lay.z[None, :]
        + np.log(q10)[:, None] * lay.c10[None, :]
        + np.log(q01)[:, None] * lay.c01[None, :]
        + np.log(q00)[:, None] * lay.c00[None, :]
    )
    peak = np.maximum.reduceat(log_terms, lay.starts, axis=1)
    total = np.add.reduceat(np.exp(log_terms - peak[:, lay.seg]), lay.starts, axis=1)
    return (peak + np.log(total)).sum(axis=1)


@dataclass(frozen=True)
class _ProfileFit:
    value: float
    boundary: bool
    iterations: int
    grid_argmax: float


def _golden_section(f, a: float, b: float, tol: float, max_iter: int):
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while b - a > tol:
        if it >= max_iter:
            best = c if fc >= fd else d
            raise ConvergenceError("golden-section search did not converge", best=best, iterations=it)
        it += 1
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return (c if fc >= fd else d), it


def _maximize_profile(data: SummaryCollection, p1: float, p2: float, opts: EstimateOptions) -> _ProfileFit:
    lo_f, hi_f = feasible_p11_interval(p1, p2)
    if hi_f - lo_f <= 2 * opts.boundary_eps:
        # Degenerate marginal: the constraints pin p11 to (essentially) one value.
        value = 0.5 * (lo_f + hi_f)
        return _ProfileFit(value, True, 0, value)
    lo, hi = _clamped_interval(p1, p2, opts.boundary_eps)

    grid = np.linspace(lo, hi, opts.grid_points)
    values = profile_loglik_grid(data, p1, p2, grid)
    j = int(np.argmax(values))
    grid_argmax = float(grid[j])
    a = grid[max(j - 1, 0)]
    b = grid[min(j + 1, len(grid) - 1)]

    def derivs(t):
        return score_and_curvature(data, JointBinaryParams(p1, p2, t))

    g_a, _ = derivs(a)
    g_b, _ = derivs(b)
    iterations = 0
    if j == 0 and g_a <= 0.0:
        return _ProfileFit(float(lo), True, iterations, grid_argmax)
    if j == len(grid) - 1 and g_b >= 0.0:
        return _ProfileFit(float(hi), True, iterations, grid_argmax)

    if not (g_a > 0.0 > g_b):
        # Score does not bracket a root: fall back to derivative-free search.
        def profile(t):
            return log_likelihood(data, JointBinaryParams(p1, p2, t))

        value, iterations = _golden_section(profile, a, b, opts.tol, opts.max_iter)
        return _ProfileFit(float(value), value - lo < opts.tol or hi - value < opts.tol, iterations, grid_argmax)

    # Safeguarded Newton on the score; [a, b] always brackets the sign change.
    t = grid_argmax
    while True:
        if iterations >= opts.max_iter:
            raise ConvergenceError(
                f"p11 optimisation did not converge in {opts.max_iter} iterations",
                best=t,
                iterations=iterations,
            )
        iterations += 1
        g, h = derivs(t)
        if g > 0.0:
            a = t
        else:
            b = t
        step_ok = h < 0.0
        t_new = t - g / h if step_ok else 0.5 * (a + b)
        if not (a < t_new < b):
            t_new = 0.5 * (a + b)
        if abs(t_new - t) < opts.tol or b - a < opts.tol:
            t = t_new
            break
        t = t_new
    return _ProfileFit(float(t), False, iterations, grid_argmax)


def se_p11(data, p: JointBinaryParams) -> float | None:
    """Observed-information standard error of ``p11``, or ``None`` if unavailable."""
    data = _as_collection(data)
    if not p.is_interior:
        return None
    _, d2 = score_and_curvature(data, p)
    if not d2 < 0.0 or not math.isfinite(d2):
        return None
    return math.sqrt(-1.0 / d2)


def estimate_p11(data, opts: EstimateOptions | None = None) -> PointEstimate:
    """Profile MLE of ``p11`` with its observed-information SE."""
    data = _as_collection(data)
    opts = opts or EstimateOptions()
    m1, m2 = estimate_marginals(data)
    fit = _maximize_profile(data, m1.value, m2.value, opts)
    se = se_p11(data, JointBinaryParams(m1.value, m2.value, fit.value))
    return PointEstimate(fit.value, se, boundary=fit.boundary)


def normal_ci(
    point: float, se: float | None, alpha: float, bounds: tuple[float, float] = (0.0, 1.0)
) -> IntervalEstimate:
    """``point -/+ z_{1-alpha/2} * se`` clipped to ``bounds``."""
    if se is None or not se >= 0.0:
        raise DomainError(
            "standard error unavailable; use the likelihood-ratio interval instead"
        )
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    half = stats.norm.ppf(1.0 - alpha / 2.0) * se
    lower, upper = point - half, point + half
    low_b, high_b = bounds
    return IntervalEstimate(
        float(max(lower, low_b)),
        float(min(upper, high_b)),
        NORMAL,
        clipped_low=bool(lower < low_b),
        clipped_high=bool(upper > high_b),
    )


def _lr_interval(loglik, center: float, bounds: tuple[float, float], alpha: float) -> IntervalEstimate:
    """``{t : -2 (loglik(t) - loglik(center)) <= chi2_{1, 1-alpha}}`` within ``bounds``."""
    threshold = stats.chi2.ppf(1.0 - alpha, 1)
    l_hat = loglik(center)

    def excess(t):
        with np.errstate(divide="ignore", invalid="ignore"):
            return -2.0 * (loglik(t) - l_hat) - threshold

    def endpoint(inner, outer):
        f_outer = excess(outer)
        if not f_outer > 0.0:
            return outer, True
        # Bisect until the outer end has a finite statistic, then polish with Brent.
        while not math.isfinite(f_outer) and abs(outer - inner) > 1e-12:
            mid = 0.5 * (inner + outer)
            f_mid = excess(mid)
            if f_mid > 0.0:
                outer, f_outer = mid, f_mid
            else:
                inner = mid
        if not math.isfinite(f_outer):
            return outer, False
        if inner == outer:
            return inner, False
        root = optimize.brentq(excess, min(inner, outer), max(inner, outer), xtol=1e-13)
        return float(root), False

    low_b, high_b = bounds
    lower, clip_low = endpoint(center, low_b) if center > low_b else (low_b, True)
    upper, clip_high = endpoint(center, high_b) if center < high_b else (high_b, True)
    return IntervalEstimate(lower, upper, LIKELIHOOD_RATIO, clip_low, clip_high)


def lr_statistic_p11(data, mle: JointBinaryParams, p: float) -> float:
    """Likelihood-ratio statistic for ``p11 = p`` with marginals at their MLEs."""
    data = _as_collection(data)
    with np.errstate(divide="ignore"):
        return -2.0 * (
            log_likelihood(data, JointBinaryParams(mle.p1, mle.p2, p)) - log_likelihood(data, mle)
        )


def lr_ci_p11(data, mle: JointBinaryParams, alpha: float = 0.05) -> IntervalEstimate:
    """Likelihood-ratio interval for ``p11`` with ``p1``, ``p2`` fixed at their MLEs."""
    data = _as_collection(data)

    def loglik(t):
        return log_likelihood(data, JointBinaryParams(mle.p1, mle.p2, t))

    return _lr_interval(loglik, mle.p11, feasible_p11_interval(mle.p1, mle.p2), alpha)


def _marginal_bounds(mle: JointBinaryParams, which: str) -> tuple[float, float]:
    other = mle.p2 if which == "p1" else mle.p1
    return mle.p11, min(1.0, 1.0 - other + mle.p11)


def lr_ci_marginal(
    data, mle: JointBinaryParams, which: Literal["p1", "p2"], alpha: float = 0.05
) -> IntervalEstimate:
    """Likelihood-ratio interval for one marginal, the other two parameters held at the MLE."""
    data = _as_collection(data)
    if which not in ("p1", "p2"):
        raise DomainError(f"which must be 'p1' or 'p2', got {which!r}")

    def loglik(t):
        if which == "p1":
            return log_likelihood(data, JointBinaryParams(t, mle.p2, mle.p11))
        return log_likelihood(data, JointBinaryParams(mle.p1, t, mle.p11))

    center = mle.p1 if which == "p1" else mle.p2
    return _lr_interval(loglik, center, _marginal_bounds(mle, which), alpha)


def full_estimate(data, opts: EstimateOptions | None = None) -> EstimateReport:
    """Point estimates, SEs, both interval families and phi for one dataset."""
    data = _as_collection(data)
    opts = opts or EstimateOptions()
    m1, m2 = estimate_marginals(data)
    fit = _maximize_profile(data, m1.value, m2.value, opts)
    mle = JointBinaryParams(m1.value, m2.value, fit.value)
    p11 = PointEstimate(fit.value, se_p11(data, mle), boundary=fit.boundary)

    alpha = opts.alpha
    p11_bounds = feasible_p11_interval(mle.p1, mle.p2)
    ci1_p11 = normal_ci(p11.value, p11.se, alpha, p11_bounds) if p11.se_available else None
    try:
        phi = phi_coefficient(mle)
    except DomainError:
        phi = math.nan
    return EstimateReport(
        p1=m1,
        p2=m2,
        p11=p11,
        ci1_p1=normal_ci(m1.value, m1.se, alpha, _marginal_bounds(mle, "p1")),
        ci1_p2=normal_ci(m2.value, m2.se, alpha, _marginal_bounds(mle, "p2")),
        ci1_p11=ci1_p11,
        ci2_p1=lr_ci_marginal(data, mle, "p1", alpha),
        ci2_p2=lr_ci_marginal(data, mle, "p2", alpha),
        ci2_p11=lr_ci_p11(data, mle, alpha),
        phi=phi,
        loglik_at_mle=log_likelihood(data, mle),
        optimizer_iterations=fit.iterations,
        grid_argmax=fit.grid_argmax,
        alpha=alpha,
    )
