import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from margjoint.binary_core import JointBinaryParams
from margjoint.binary_sim import (
    PRESETS,
    STRONG,
    WEAK,
    Scenario,
    diagnostics,
    generate_summary_dataset,
    run_scenario,
    sample_multinomial,
)
from margjoint.exceptions import DomainError
from margjoint.streams import stream


# --- multinomial sampler ---------------------------------------------------


def test_multinomial_trivial_cases(rng):
    assert sample_multinomial(0, (0.25, 0.25, 0.25, 0.25), rng).tolist() == [0, 0, 0, 0]
    assert sample_multinomial(7, (1.0, 0.0, 0.0, 0.0), rng).tolist() == [7, 0, 0, 0]
    assert sample_multinomial(7, (0.0, 0.0, 0.0, 1.0), rng).tolist() == [0, 0, 0, 7]


@pytest.mark.parametrize("probs", [(0.5, 0.5, 0.1, -0.1), (0.3, 0.3, 0.3, 0.3), (np.nan, 0.5, 0.25, 0.25)])
def test_multinomial_rejects_bad_probs(probs, rng):
    with pytest.raises(DomainError):
        sample_multinomial(5, probs, rng)


def test_multinomial_large_n_within_clt_bound(rng):
    probs = np.array([0.25, 0.10, 0.35, 0.30])
    n = 100_000
    counts = sample_multinomial(n, probs, rng)
    assert counts.sum() == n
    sigma = np.sqrt(probs * (1 - probs) / n)
    assert np.all(np.abs(counts / n - probs) < 4 * sigma)


@given(st.integers(0, 5000), st.integers(0, 2**32))
def test_multinomial_sums_to_n(n, seed):
    counts = sample_multinomial(n, (0.2, 0.3, 0.1, 0.4), np.random.default_rng(seed))
    assert counts.sum() == n and np.all(counts >= 0)


def test_multinomial_cell_means():
    # mean over many draws is n * p for every cell (conditional-binomial decomposition is exact)
    rng = np.random.default_rng(5)
    probs = np.array([0.1, 0.2, 0.3, 0.4])
    draws = np.array([sample_multinomial(20, probs, rng) for _ in range(20_000)])
    se = np.sqrt(20 * probs * (1 - probs) / len(draws))
    assert np.all(np.abs(draws.mean(axis=0) - 20 * probs) < 4 * se)


# --- streams ---------------------------------------------------------------


def test_streams_deterministic_and_distinct():
    a = stream(7, 0, 3).random(4)
    assert np.array_equal(a, stream(7, 0, 3).random(4))
    assert not np.array_equal(a, stream(7, 0, 4).random(4))
    assert not np.array_equal(a, stream(8, 0, 3).random(4))
    assert not np.array_equal(a, stream(7, 1, 3).random(4))
    assert not np.array_equal(a, stream(7, 0, 3, 1).random(4))


# --- scenario and data generation ------------------------------------------


@pytest.mark.parametrize(
    "kwargs",
    [{"k": 0}, {"n_min": 0}, {"n_min": 10, "n_max": 5}, {"reps": 0}, {"seed": -1}, {"extreme_inflate": 0}],
)
def test_scenario_validation(kwargs):
    base = dict(k=3, n_min=1, n_max=5, truth=WEAK, reps=1)
    with pytest.raises(DomainError):
        Scenario(**{**base, **kwargs})


def test_scenario_coerces_truth_tuple():
    assert Scenario(k=1, n_min=1, n_max=1, truth=(0.35, 0.6, 0.25)).truth == WEAK


def test_presets():
    assert PRESETS["weak-small"] == (WEAK, (100, 200))
    assert PRESETS["strong-large"] == (STRONG, (800, 1000))


def test_all_mass_in_one_cell():
    sc = Scenario(k=5, n_min=3, n_max=9, truth=JointBinaryParams(1, 1, 1), reps=1)
    assert all(r.x == r.y == r.n for r in generate_summary_dataset(sc, 0))
    sc = Scenario(k=5, n_min=3, n_max=9, truth=JointBinaryParams(0, 0, 0), reps=1)
    assert all(r.x == r.y == 0 for r in generate_summary_dataset(sc, 0))


def test_generation_deterministic_and_sized():
    sc = Scenario(k=20, n_min=100, n_max=200, truth=WEAK, seed=11)
    a, b = generate_summary_dataset(sc, 5), generate_summary_dataset(sc, 5)
    assert a == b
    assert a != generate_summary_dataset(sc, 6)
    assert all(100 <= r.n <= 200 for r in a)


def test_pooled_marginal_concentration():
    sc = Scenario(k=50, n_min=800, n_max=1000, truth=WEAK, seed=2)
    sum_x = sum_n = 0
    for rep in range(1000):
        data = generate_summary_dataset(sc, rep)
        sum_x += data.sum_x
        sum_n += data.sum_n
    assert abs(sum_x / sum_n - 0.35) < 3 * math.sqrt(0.35 * 0.65 / sum_n)


def test_extreme_inflation():
    plain = Scenario(k=10, n_min=100, n_max=200, truth=WEAK, seed=4)
    big = Scenario(k=10, n_min=100, n_max=200, truth=WEAK, seed=4, extreme_inflate=100)
    a, b = generate_summary_dataset(plain, 0), generate_summary_dataset(big, 0)
    assert b.records[0].n == 100 * a.records[0].n
    assert [r.n for r in a.records[1:]] == [r.n for r in b.records[1:]]


# --- scenario runs ---------------------------------------------------------


@pytest.fixture(scope="module")
def small_run():
    sc = Scenario(k=10, n_min=100, n_max=200, truth=STRONG, reps=30, seed=1)
    return run_scenario(sc)


def test_run_shapes_and_summary(small_run):
    r = small_run
    assert r.reps == 30
    for arr in (r.estimates, r.ses, r.ci1_low, r.ci2_high, r.failed):
        assert len(arr) == 30
    assert len(r.ci1_cover) == len(r.ci2_cover) == 30
    s = r.summary
    assert 0 <= s["coverage_ci1"] <= 1 and 0 <= s["coverage_ci2"] <= 1
    assert s["mean"] == pytest.approx(np.mean(r.estimates))
    assert s["bias"] == pytest.approx(s["mean"] - 0.75)
    assert s["se_bias"] == pytest.approx(s["se_mean"] - s["sd"])
    ok = [c for c in r.ci2_cover if c is not None]
    assert s["coverage_ci2"] == pytest.approx(np.mean(ok))


def test_run_single_rep():
    sc = Scenario(k=5, n_min=50, n_max=80, truth=WEAK, reps=1, seed=9)
    r = run_scenario(sc)
    assert r.reps == 1
    assert r.summary["mean"] == r.summary["median"] == r.estimates[0]


def test_run_independent_of_workers(small_run):
    again = run_scenario(small_run.scenario, workers=2)
    np.testing.assert_array_equal(again.estimates, small_run.estimates)
    np.testing.assert_array_equal(again.ses, small_run.ses)
    assert again.summary == small_run.summary


def test_rows_match_arrays(small_run):
    rows = list(small_run.rows())
    assert [r["rep"] for r in rows] == list(range(30))
    assert rows[3]["estimate"] == small_run.estimates[3]


# --- diagnostics -----------------------------------------------------------


def test_diagnostics_errors():
    with pytest.raises(DomainError):
        diagnostics(np.full(10, 0.3))
    with pytest.raises(DomainError):
        diagnostics([0.3])


def test_diagnostics_structure(small_run):
    d = diagnostics(small_run, bins=7)
    assert d.counts.sum() == small_run.reps
    assert len(d.bin_edges) == 8
    assert np.all(np.diff(d.qq_theoretical) > 0) and np.all(np.diff(d.qq_empirical) >= 0)


def test_diagnostics_normal_draws():
    values = np.random.default_rng(0).standard_normal(1000)
    d = diagnostics(values)
    # KS-style check in probability scale: empirical CDF positions vs the normal CDF
    from scipy import stats

    assert np.max(np.abs(stats.norm.cdf(d.qq_empirical) - stats.norm.cdf(d.qq_theoretical))) < 0.15
    assert d.qq_correlation > 0.99
