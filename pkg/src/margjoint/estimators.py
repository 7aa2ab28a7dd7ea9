"""scikit-learn style estimators wrapping the functional API.

Both estimators take one row per study. ``BivariateBinomialMLE`` expects
integer columns ``n, x, y``; ``HierarchicalCorrelation`` expects
``n, m1, m2, s1, s2`` where ``s1, s2`` are variances.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .binary_core import log_likelihood
from .binary_estimate import EstimateOptions, full_estimate
from .binary_sim import cell_probabilities, sample_multinomial
from .gauss_corr import estimate_hier, rho_x
from .validation import check_binary_summaries, check_continuous_summaries


class BivariateBinomialMLE(BaseEstimator):
    """Joint law of two binary variables from per-study marginal totals.

    Parameters
    ----------
    alpha : float, default=0.05
        Significance level of the confidence intervals.
    grid_points : int, default=101
        Size of the initial grid over the feasible ``p11`` interval.
    tol : float, default=1e-8
        Convergence tolerance on ``p11``.
    max_iter : int, default=500
    boundary_eps : float, default=1e-9
        Distance kept from the edges of the feasible interval.

    Attributes
    ----------
    params_ : JointBinaryParams
        Fitted ``(p1, p2, p11)``.
    se_ : ndarray of shape (3,)
        Standard errors; NaN where unavailable.
    ci_normal_ : ndarray of shape (3, 2)
        Normal-approximation intervals (NaN rows when the SE is unavailable).
    ci_lr_ : ndarray of shape (3, 2)
        Likelihood-ratio intervals.
    phi_ : float
    loglik_ : float
    report_ : EstimateReport
    """

    def __init__(self, alpha=0.05, grid_points=101, tol=1e-8, max_iter=500, boundary_eps=1e-9):
        self.alpha = alpha
        self.grid_points = grid_points
        self.tol = tol
        self.max_iter = max_iter
        self.boundary_eps = boundary_eps

    def _options(self) -> EstimateOptions:
        return EstimateOptions(
            grid_points=self.grid_points,
            tol=self.tol,
            max_iter=self.max_iter,
            boundary_eps=self.boundary_eps,
            alpha=self.alpha,
        )

    def fit(self, X, y=None):
        data = check_binary_summaries(X)
        report = full_estimate(data, self._options())
        self.report_ = report
        self.params_ = report.params
        self.p1_, self.p2_, self.p11_ = report.params.as_tuple()
        self.se_ = np.array(
            [np.nan if e.se is None else e.se for e in (report.p1, report.p2, report.p11)]
        )
        self.ci_normal_ = np.array(
            [[np.nan, np.nan] if ci is None else [ci.lower, ci.upper]
             for ci in (report.ci1_p1, report.ci1_p2, report.ci1_p11)]
        )
        self.ci_lr_ = np.array(
            [[ci.lower, ci.upper] for ci in (report.ci2_p1, report.ci2_p2, report.ci2_p11)]
        )
        self.phi_ = report.phi
        self.loglik_ = report.loglik_at_mle
        self.n_studies_ = data.k
        return self

    def score(self, X, y=None):
        """Log-likelihood of ``X`` under the fitted parameters."""
        check_is_fitted(self, "params_")
        return log_likelihood(check_binary_summaries(X), self.params_)

    def sample(self, sizes, random_state=None):
        """Draw marginal totals for studies of the given sizes from the fitted law.

        Returns an integer array of shape ``(len(sizes), 3)`` with columns ``n, x, y``.
        """
        check_is_fitted(self, "params_")
        rng = np.random.default_rng(random_state)
        probs = cell_probabilities(self.params_)
        out = []
        for n in sizes:
            z, x_only, y_only, _ = sample_multinomial(int(n), probs, rng)
            out.append((int(n), int(z + x_only), int(z + y_only)))
        return np.array(out, dtype=np.int64)


class HierarchicalCorrelation(BaseEstimator):
    """Pooled patient-level correlation from study means and variances.

    Parameters
    ----------
    rho : float or None, default=None
        Within-study correlation. ``None`` substitutes the estimated
        between-study correlation.

    Attributes
    ----------
    estimates_ : HierEstimates
    result_ : CorrelationResult
    rho_x_ : float
    theta_, psi_ : ndarray of shape (2,)
    rho_star_ : float
    """

    def __init__(self, rho=None):
        self.rho = rho

    def fit(self, X, y=None):
        studies = check_continuous_summaries(X)
        self.estimates_ = estimate_hier(studies)
        rho = self.estimates_.rho_star if self.rho is None else float(self.rho)
        self.result_ = rho_x(self.estimates_, [s.n for s in studies], rho)
        self.rho_x_ = self.result_.rho_x
        self.theta_ = np.array([self.estimates_.theta1, self.estimates_.theta2])
        self.psi_ = np.array([self.estimates_.psi1, self.estimates_.psi2])
        self.rho_star_ = self.estimates_.rho_star
        self.n_studies_ = len(studies)
        return self
