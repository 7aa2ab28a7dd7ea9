"""Observed-data likelihood of the bivariate binomial model.

Each study reports only its marginal totals ``(n, x, y)``; the joint count
``z`` (subjects with both indicators equal to one) is latent. The observed
likelihood of a study is the multinomial complete-data term summed over every
feasible ``z``. All arithmetic is carried out in log-space with precomputed
log-factorials so that studies with tens of thousands of subjects are handled
without overflow.

Derivatives with respect to ``p11`` are expressed through the posterior
moments of the latent count. The per-subject score of the complete-data term
is linear in ``z``::

    delta(z) = -x/q10 - y/q01 + (n - x - y)/q00 + z * (1/q11 + 1/q10 + 1/q01 + 1/q00)

so the first derivative only needs ``E[z | x, y]`` and the second derivative
only needs ``E[z]`` and ``Var[z]``. Computing the variance from centred
weights avoids the cancellation in ``E[delta^2] - E[delta]^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln

from .exceptions import DomainError

__all__ = [
    "MarginalSummary",
    "SummaryCollection",
    "JointBinaryParams",
    "LogGammaTable",
    "log_complete_term",
    "log_observed_likelihood_single",
    "log_likelihood",
    "expected_latent_sum",
    "score_and_curvature",
    "d1_loglik_dp11",
    "d2_loglik_dp11",
    "stationarity_score_p11",
    "phi_coefficient",
]

DEFAULT_CUTOFF = 45.0

# Cell probabilities this close below zero are rounding noise from p1 + p2 - 1.
_CELL_ATOL = 1e-12


@dataclass(frozen=True)
class MarginalSummary:
    """Marginal totals of one study: size ``n``, ``x`` with I_x=1, ``y`` with I_y=1."""

    n: int
    x: int
    y: int

    def __post_init__(self):
        for name in ("n", "x", "y"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value:
                raise DomainError(f"{name} must be an integer count, got {value!r}")
            object.__setattr__(self, name, int(value))
        if self.n < 1:
            raise DomainError(f"n must be >= 1, got {self.n}")
        if not 0 <= self.x <= self.n:
            raise DomainError(f"x must lie in [0, n={self.n}], got {self.x}")
        if not 0 <= self.y <= self.n:
            raise DomainError(f"y must lie in [0, n={self.n}], got {self.y}")

    @property
    def z_min(self) -> int:
        return max(0, self.x + self.y - self.n)

    @property
    def z_max(self) -> int:
        return min(self.x, self.y)


@dataclass(frozen=True)
class JointBinaryParams:
    """Joint law of two binary indicators, parameterised as ``(p1, p2, p11)``."""

    p1: float
    p2: float
    p11: float

    def __post_init__(self):
        for name in ("p1", "p2", "p11"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise DomainError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        if not (0.0 <= self.p1 <= 1.0 and 0.0 <= self.p2 <= 1.0):
            raise DomainError(f"marginals must lie in [0, 1], got p1={self.p1}, p2={self.p2}")
        if self.p11 < -_CELL_ATOL or self.p11 > min(self.p1, self.p2) + _CELL_ATOL:
            raise DomainError(
                f"p11={self.p11} violates 0 <= p11 <= min(p1, p2)={min(self.p1, self.p2)}"
            )
        if 1.0 - self.p1 - self.p2 + self.p11 < -_CELL_ATOL:
            raise DomainError(
                f"p11={self.p11} violates 1 - p1 - p2 + p11 >= 0 for p1={self.p1}, p2={self.p2}"
            )

    @property
    def cells(self) -> tuple[float, float, float, float]:
        """Cell probabilities ``(q11, q10, q01, q00)`` clipped at zero."""
        q11 = max(self.p11, 0.0)
        q10 = max(self.p1 - self.p11, 0.0)
        q01 = max(self.p2 - self.p11, 0.0)
        # (p1 + p2) grouped so that swapping the margins is bit-exact
        q00 = max(1.0 - (self.p1 + self.p2) + self.p11, 0.0)
        return q11, q10, q01, q00

    @property
    def is_interior(self) -> bool:
        return min(self.cells) > 0.0

    def as_tuple(self) -> tuple[float, float, float]:
        return self.p1, self.p2, self.p11


class LogGammaTable:
    """Precomputed ``log(m!)`` for ``m = 0..max_n``."""

    def __init__(self, max_n: int):
        if max_n < 0:
            raise DomainError(f"max_n must be >= 0, got {max_n}")
        self.max_n = int(max_n)
        self.values = gammaln(np.arange(self.max_n + 1, dtype=float) + 1.0)
        self.values[0] = 0.0
        self.values.setflags(write=False)

    def __getitem__(self, m):
        return self.values[m]

    @staticmethod
    @lru_cache(maxsize=8)
    def for_size(max_n: int) -> "LogGammaTable":
        """Shared table covering at least ``max_n``, rounded up to reuse across datasets."""
        size = 1024
        while size < max_n:
            size *= 2
        return LogGammaTable(size)


@dataclass(frozen=True)
class _LatentLayout:
    """All feasible latent counts of a collection flattened into one array."""

    starts: np.ndarray
    seg: np.ndarray
    z: np.ndarray
    c10: np.ndarray
    c01: np.ndarray
    c00: np.ndarray
    log_coef: np.ndarray


@dataclass(frozen=True)
class SummaryCollection:
    """Ordered marginal summaries of ``k`` independent studies."""

    records: tuple[MarginalSummary, ...]
    sum_n: int = field(init=False)
    sum_x: int = field(init=False)
    sum_y: int = field(init=False)

    def __post_init__(self):
        records = tuple(
            r if isinstance(r, MarginalSummary) else MarginalSummary(*r) for r in self.records
        )
        if not records:
            raise DomainError("a summary collection needs at least one record")
        object.__setattr__(self, "records", records)
        object.__setattr__(self, "sum_n", sum(r.n for r in records))
        object.__setattr__(self, "sum_x", sum(r.x for r in records))
        object.__setattr__(self, "sum_y", sum(r.y for r in records))

    @classmethod
    def from_rows(cls, rows: Iterable[Sequence[int]]) -> "SummaryCollection":
        return cls(tuple(MarginalSummary(*row) for row in rows))

    @property
    def k(self) -> int:
        return len(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def to_array(self) -> np.ndarray:
        return np.array([(r.n, r.x, r.y) for r in self.records], dtype=np.int64)

    @cached_property
    def _arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        arr = self.to_array()
        return arr[:, 0], arr[:, 1], arr[:, 2]

    @cached_property
    def _layout(self) -> _LatentLayout:
        n, x, y = self._arrays
        lo = np.maximum(0, x + y - n)
        hi = np.minimum(x, y)
        lengths = hi - lo + 1
        starts = np.concatenate(([0], np.cumsum(lengths)[:-1]))
        seg = np.repeat(np.arange(len(n)), lengths)
        z = np.arange(lengths.sum()) - np.repeat(starts, lengths) + lo[seg]
        c10 = x[seg] - z
        c01 = y[seg] - z
        c00 = n[seg] - x[seg] - y[seg] + z
        table = LogGammaTable.for_size(int(n.max()))
        lf = table.values
        log_coef = lf[n[seg]] - lf[z] - (lf[c10] + lf[c01]) - lf[c00]
        return _LatentLayout(starts, seg, z, c10, c01, c00, log_coef)


def _as_collection(data) -> SummaryCollection:
    if isinstance(data, SummaryCollection):
        return data
    if isinstance(data, MarginalSummary):
        return SummaryCollection((data,))
    return SummaryCollection.from_rows(data)


def _xlogq(count: np.ndarray, q: float) -> np.ndarray:
    # 0 * log(0) = 0; positive count in a zero cell is log(0) = -inf.
    if q > 0.0:
        return count * math.log(q)
    return np.where(count > 0, -np.inf, 0.0)


def _log_terms(layout: _LatentLayout, p: JointBinaryParams) -> np.ndarray:
    q11, q10, q01, q00 = p.cells
    return (
        layout.log_coef
        + _xlogq(layout.z, q11)
        + (_xlogq(layout.c10, q10) + _xlogq(layout.c01, q01))
        + _xlogq(layout.c00, q00)
    )


def _segment_logsumexp(
    log_terms: np.ndarray, layout: _LatentLayout, cutoff: float | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Per-record log b and the normalised posterior weights of z."""
    peak = np.maximum.reduceat(log_terms, layout.starts)
    finite_peak = np.where(np.isfinite(peak), peak, 0.0)
    shifted = log_terms - finite_peak[layout.seg]
    if cutoff is not None:
        shifted = np.where(shifted < -cutoff, -np.inf, shifted)
    scaled = np.exp(shifted)
    total = np.add.reduceat(scaled, layout.starts)
    with np.errstate(divide="ignore"):
        log_b = np.where(np.isfinite(peak), finite_peak + np.log(total), -np.inf)
    with np.errstate(invalid="ignore", divide="ignore"):
        weights = scaled / total[layout.seg]
    return log_b, weights


def log_complete_term(rec: MarginalSummary, z: int, p: JointBinaryParams) -> float:
    """Log of the complete-data multinomial probability for latent count ``z``."""
    if not rec.z_min <= z <= rec.z_max:
        raise DomainError(f"latent count z={z} outside feasible window [{rec.z_min}, {rec.z_max}]")
    counts = (z, rec.x - z, rec.y - z, rec.n - rec.x - rec.y + z)
    lf = LogGammaTable.for_size(rec.n).values
    out = lf[rec.n] - sum(lf[c] for c in counts)
    for c, q in zip(counts, p.cells):
        if c == 0:
            continue
        if q <= 0.0:
            return -math.inf
        out += c * math.log(q)
    return float(out)


def log_observed_likelihood_single(
    rec: MarginalSummary, p: JointBinaryParams, cutoff: float | None = None
) -> float:
    """Log of the marginal probability of ``(x, y)`` given ``n`` and ``p``.

    Parameters
    ----------
    rec : MarginalSummary
    p : JointBinaryParams
    cutoff : float, optional
        If set, latent terms more than ``cutoff`` log units below the peak term
        are dropped. Exact summation is the default.
    """
    return float(log_likelihood(SummaryCollection((rec,)), p, cutoff=cutoff))


def _per_record(data: SummaryCollection, p: JointBinaryParams, cutoff=None):
    layout = data._layout
    return layout, _segment_logsumexp(_log_terms(layout, p), layout, cutoff)


def log_likelihood(data, p: JointBinaryParams, cutoff: float | None = None) -> float:
    """Sum over studies of the log observed-data likelihood."""
    data = _as_collection(data)
    _, (log_b, _) = _per_record(data, p, cutoff)
    return float(np.sum(log_b))


def _require_interior(p: JointBinaryParams):
    if not p.is_interior:
        raise DomainError(f"parameters {p.as_tuple()} are on the boundary; derivative undefined")


def _latent_moments(data: SummaryCollection, p: JointBinaryParams):
    """Posterior cell-count means and the posterior variance of ``z`` per study.

    Each cell mean is averaged from its own count array rather than derived as
    ``x - E[z]``: near a boundary the posterior mass off the extreme latent
    value is tiny and the subtraction would lose every significant digit.
    """
    _require_interior(p)
    layout, (log_b, w) = _per_record(data, p)
    if not np.all(np.isfinite(log_b)):
        raise DomainError("likelihood is zero for at least one record")
    z = layout.z.astype(float)
    means = [np.add.reduceat(w * c, layout.starts) for c in (z, layout.c10, layout.c01, layout.c00)]
    centred = z - means[0][layout.seg]
    var = np.add.reduceat(w * centred * centred, layout.starts)
    return means, var


def expected_latent_sum(data, p: JointBinaryParams) -> float:
    """``S``: total posterior expectation of the latent joint counts."""
    data = _as_collection(data)
    means, _ = _latent_moments(data, p)
    return float(means[0].sum())


def score_and_curvature(data, p: JointBinaryParams) -> tuple[float, float]:
    """First and second ``p11``-derivatives of the log-likelihood in one pass.

    Per study the second derivative is ``Var[delta] - E[lambda]`` under the
    posterior of ``z``: the ratio form ``(b * sum T (delta^2 - lambda) -
    (sum T delta)^2) / b^2`` rearranged so no intermediate leaves the scale of
    the posterior weights.
    """
    data = _as_collection(data)
    (m11, m10, m01, m00), var = _latent_moments(data, p)
    q11, q10, q01, q00 = p.cells
    slope = 1.0 / q11 + 1.0 / q10 + 1.0 / q01 + 1.0 / q00
    d1 = m11.sum() / q11 - m10.sum() / q10 - m01.sum() / q01 + m00.sum() / q00
    e_lambda = m11 / q11**2 + m10 / q10**2 + m01 / q01**2 + m00 / q00**2
    d2 = np.sum(slope * slope * var - e_lambda)
    return float(d1), float(d2)


def d1_loglik_dp11(data, p: JointBinaryParams) -> float:
    """Exact partial derivative of the log-likelihood with respect to ``p11``."""
    return score_and_curvature(data, p)[0]


def d2_loglik_dp11(data, p: JointBinaryParams) -> float:
    """Second partial derivative of the log-likelihood with respect to ``p11``."""
    return score_and_curvature(data, p)[1]


def stationarity_score_p11(data, p: JointBinaryParams) -> float:
    """``sum x + sum y - sum n + (1 - p1 - p2) / p11 * S``.

    This is the p11 score after eliminating the p1 and p2 score equations, so
    it coincides with the true derivative only where those equations hold
    (in particular at the joint MLE). Use :func:`d1_loglik_dp11` elsewhere.
    """
    data = _as_collection(data)
    s = expected_latent_sum(data, p)
    return float(data.sum_x + data.sum_y - data.sum_n + (1.0 - p.p1 - p.p2) / p.p11 * s)


def phi_coefficient(p: JointBinaryParams) -> float:
    """Phi coefficient of the 2x2 table implied by ``p``."""
    if not (0.0 < p.p1 < 1.0 and 0.0 < p.p2 < 1.0):
        raise DomainError(f"phi undefined for degenerate marginals p1={p.p1}, p2={p.p2}")
    return (p.p11 - p.p1 * p.p2) / math.sqrt(p.p1 * (1 - p.p1) * p.p2 * (1 - p.p2))
