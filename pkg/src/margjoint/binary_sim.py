"""Monte-Carlo harness for the summary-level p11 estimator.

Datasets are generated study by study: a uniform study size, then a
multinomial draw of the four joint cells, of which only the margins are kept.
Each repetition runs the full estimator and records the point estimate, its
SE, both 95% intervals and whether they cover the truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ._parallel import ordered_map
from .binary_core import JointBinaryParams, MarginalSummary, SummaryCollection
from .binary_estimate import EstimateOptions, full_estimate
from .exceptions import ConvergenceError, DomainError
from .streams import BINARY_SIM, stream

__all__ = [
    "Scenario",
    "ScenarioResult",
    "DiagnosticsBundle",
    "PRESETS",
    "WEAK",
    "STRONG",
    "sample_multinomial",
    "cell_probabilities",
    "generate_summary_dataset",
    "run_scenario",
    "diagnostics",
]

WEAK = JointBinaryParams(0.35, 0.60, 0.25)
STRONG = JointBinaryParams(0.80, 0.77, 0.75)

SMALL_N = (100, 200)
LARGE_N = (800, 1000)


@dataclass(frozen=True)
class Scenario:
    k: int
    n_min: int
    n_max: int
    truth: JointBinaryParams
    reps: int = 1000
    seed: int = 0
    extreme_inflate: int | None = None

    def __post_init__(self):
        if self.k < 1:
            raise DomainError(f"k must be >= 1, got {self.k}")
        if not 1 <= self.n_min <= self.n_max:
            raise DomainError(f"need 1 <= n_min <= n_max, got {self.n_min}, {self.n_max}")
        if self.reps < 1:
            raise DomainError(f"reps must be >= 1, got {self.reps}")
        if self.seed < 0:
            raise DomainError(f"seed must be non-negative, got {self.seed}")
        if self.extreme_inflate is not None and self.extreme_inflate < 1:
            raise DomainError(f"extreme_inflate must be >= 1, got {self.extreme_inflate}")
        if not isinstance(self.truth, JointBinaryParams):
            object.__setattr__(self, "truth", JointBinaryParams(*self.truth))


# Four corners of the simulation design; k is supplied separately.
PRESETS = {
    "weak-small": (WEAK, SMALL_N),
    "weak-large": (WEAK, LARGE_N),
    "strong-small": (STRONG, SMALL_N),
    "strong-large": (STRONG, LARGE_N),
}


def sample_multinomial(n: int, probs, rng: np.random.Generator) -> np.ndarray:
    """Multinomial draw by sequential conditional binomials.

    Cell ``j`` receives ``Binomial(remaining, p_j / remaining_mass)``, so the
    cost is one binomial draw per cell whatever the value of ``n``.
    """
    probs = np.asarray(probs, dtype=float)
    if n < 0:
        raise DomainError(f"n must be non-negative, got {n}")
    if np.any(probs < 0) or not np.all(np.isfinite(probs)) or abs(probs.sum() - 1.0) > 1e-12:
        raise DomainError(f"probabilities must be non-negative and sum to 1, got {probs}")
    counts = np.zeros(len(probs), dtype=np.int64)
    remaining = int(n)
    mass = 1.0
    for j, p in enumerate(probs[:-1]):
        if remaining == 0:
            break
        if mass <= 0.0:
            break
        frac = min(1.0, max(0.0, p / mass))
        counts[j] = rng.binomial(remaining, frac)
        remaining -= counts[j]
        mass -= p
    counts[-1] += remaining
    return counts


def cell_probabilities(truth: JointBinaryParams) -> tuple[float, float, float, float]:
    """Cells ``(q11, q10, q01, q00)`` renormalised to sum to exactly one."""
    q11, q10, q01, q00 = truth.cells
    total = q11 + q10 + q01 + q00
    return q11 / total, q10 / total, q01 / total, q00 / total


def generate_summary_dataset(sc: Scenario, rep_index: int) -> SummaryCollection:
    """One synthetic summary-level dataset, deterministic in ``(sc.seed, rep_index)``."""
    rng = stream(sc.seed, BINARY_SIM, rep_index)
    sizes = rng.integers(sc.n_min, sc.n_max + 1, size=sc.k)
    if sc.extreme_inflate is not None:
        # The first study is the outlier; its size is drawn first, then inflated.
        sizes[0] *= sc.extreme_inflate
    probs = cell_probabilities(sc.truth)
    records = []
    for n in sizes:
        z, x_only, y_only, _ = sample_multinomial(int(n), probs, rng)
        records.append(MarginalSummary(int(n), int(z + x_only), int(z + y_only)))
    return SummaryCollection(tuple(records))


_REP_FIELDS = ("estimate", "se", "ci1_low", "ci1_high", "ci2_low", "ci2_high")


def _run_rep(args) -> dict:
    sc, opts, rep_index = args
    data = generate_summary_dataset(sc, rep_index)
    row = dict.fromkeys(_REP_FIELDS, math.nan)
    row.update(rep=rep_index, cover1=None, cover2=None, failed=False)
    try:
        report = full_estimate(data, opts)
    except (ConvergenceError, DomainError, FloatingPointError):
        row["failed"] = True
        return row
    truth = sc.truth.p11
    row["estimate"] = report.p11.value
    if report.p11.se is not None:
        row["se"] = report.p11.se
    if report.ci1_p11 is not None:
        row["ci1_low"], row["ci1_high"] = report.ci1_p11.lower, report.ci1_p11.upper
        row["cover1"] = report.ci1_p11.contains(truth)
    row["ci2_low"], row["ci2_high"] = report.ci2_p11.lower, report.ci2_p11.upper
    row["cover2"] = report.ci2_p11.contains(truth)
    return row


@dataclass
class ScenarioResult:
    """Per-repetition outcomes of one scenario plus their aggregate summary.

    ``ses`` holds NaN where the SE was unavailable. ``ci1_cover`` is ``None`` for
    repetitions without a normal interval (unavailable SE) or a failed fit.
    """

    scenario: Scenario
    estimates: np.ndarray
    ses: np.ndarray
    ci1_low: np.ndarray
    ci1_high: np.ndarray
    ci2_low: np.ndarray
    ci2_high: np.ndarray
    ci1_cover: list
    ci2_cover: list
    failed: np.ndarray
    summary: dict = field(default_factory=dict)

    @property
    def ci1_width(self) -> np.ndarray:
        return self.ci1_high - self.ci1_low

    @property
    def ci2_width(self) -> np.ndarray:
        return self.ci2_high - self.ci2_low

    @property
    def se_unavailable_count(self) -> int:
        return int(np.sum(~self.failed & np.isnan(self.ses)))

    @property
    def reps(self) -> int:
        return len(self.estimates)

    def rows(self):
        for i in range(self.reps):
            yield {
                "rep": i,
                "estimate": self.estimates[i],
                "se": self.ses[i],
                "ci1_low": self.ci1_low[i],
                "ci1_high": self.ci1_high[i],
                "ci2_low": self.ci2_low[i],
                "ci2_high": self.ci2_high[i],
                "cover1": self.ci1_cover[i],
                "cover2": self.ci2_cover[i],
            }


def _rate(flags) -> float:
    vals = [f for f in flags if f is not None]
    return float(np.mean(vals)) if vals else math.nan


def _summarize(result: ScenarioResult) -> dict:
    ok = ~result.failed
    est = result.estimates[ok]
    ses = result.ses[ok]
    ses = ses[np.isfinite(ses)]
    sd = float(np.std(est, ddof=1)) if est.size > 1 else math.nan
    se_mean = float(np.mean(ses)) if ses.size else math.nan
    w1 = result.ci1_width[ok]
    w1 = w1[np.isfinite(w1)]
    return {
        "reps": result.reps,
        "failed_count": int(result.failed.sum()),
        "se_unavailable_count": result.se_unavailable_count,
        "se_unavailable_rate": result.se_unavailable_count / max(1, int(ok.sum())),
        "mean": float(np.mean(est)) if est.size else math.nan,
        "median": float(np.median(est)) if est.size else math.nan,
        "sd": sd,
        "bias": float(np.mean(est)) - result.scenario.truth.p11 if est.size else math.nan,
        "coverage_ci1": _rate(result.ci1_cover),
        "coverage_ci2": _rate(result.ci2_cover),
        "mean_width_ci1": float(np.mean(w1)) if w1.size else math.nan,
        "mean_width_ci2": float(np.mean(result.ci2_width[ok])) if ok.any() else math.nan,
        "se_mean": se_mean,
        "se_bias": se_mean - sd if ses.size and est.size > 1 else math.nan,
    }


def run_scenario(sc: Scenario, opts: EstimateOptions | None = None, workers: int = 1) -> ScenarioResult:
    """Run ``sc.reps`` independent generate-estimate-interval cycles."""
    opts = opts or EstimateOptions()
    rows = ordered_map(_run_rep, [(sc, opts, i) for i in range(sc.reps)], workers)

    def col(name):
        return np.array([r[name] for r in rows], dtype=float)

    result = ScenarioResult(
        scenario=sc,
        estimates=col("estimate"),
        ses=col("se"),
        ci1_low=col("ci1_low"),
        ci1_high=col("ci1_high"),
        ci2_low=col("ci2_low"),
        ci2_high=col("ci2_high"),
        ci1_cover=[r["cover1"] for r in rows],
        ci2_cover=[r["cover2"] for r in rows],
        failed=np.array([r["failed"] for r in rows], dtype=bool),
    )
    result.summary = _summarize(result)
    return result


@dataclass(frozen=True)
class DiagnosticsBundle:
    bin_edges: np.ndarray
    counts: np.ndarray
    qq_theoretical: np.ndarray
    qq_empirical: np.ndarray

    @property
    def qq_correlation(self) -> float:
        return float(np.corrcoef(self.qq_theoretical, self.qq_empirical)[0, 1])


def diagnostics(result_or_values, bins: int = 30) -> DiagnosticsBundle:
    """Histogram and normal QQ pairs of the estimates.

    Accepts a :class:`ScenarioResult` or a plain array of values. Failed
    repetitions are skipped.
    """
    values = getattr(result_or_values, "estimates", result_or_values)
    values = np.asarray(values, dtype=float)
    values = values[np.isfinite(values)]
    if values.size < 2:
        raise DomainError("diagnostics need at least two estimates")
    if np.ptp(values) == 0.0:
        raise DomainError("estimates have zero variance; QQ plot undefined")
    counts, edges = np.histogram(values, bins=bins)
    m = values.size
    empirical = np.sort((values - values.mean()) / np.std(values, ddof=1))
    theoretical = stats.norm.ppf((np.arange(1, m + 1) - 0.5) / m)
    return DiagnosticsBundle(edges, counts, theoretical, empirical)
