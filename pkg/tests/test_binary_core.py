import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import binom_pmf, enumerate_pmf, fd_first, fd_second, random_interior_triple
from margjoint.binary_core import (
    JointBinaryParams,
    LogGammaTable,
    MarginalSummary,
    SummaryCollection,
    d1_loglik_dp11,
    d2_loglik_dp11,
    expected_latent_sum,
    log_complete_term,
    log_likelihood,
    log_observed_likelihood_single,
    phi_coefficient,
    score_and_curvature,
    stationarity_score_p11,
)
from margjoint.exceptions import DomainError

WEAK = JointBinaryParams(0.35, 0.60, 0.25)


def _coll(*rows):
    return SummaryCollection.from_rows(rows)


# --- types -----------------------------------------------------------------


@pytest.mark.parametrize("n,x,y", [(0, 0, 0), (3, 4, 1), (3, 1, -1), (2.5, 1, 1)])
def test_marginal_summary_rejects_invalid(n, x, y):
    with pytest.raises(DomainError):
        MarginalSummary(n, x, y)


@given(st.integers(1, 500).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, n), st.integers(0, n))))
def test_latent_window_nonempty(nxy):
    rec = MarginalSummary(*nxy)
    assert rec.z_min <= rec.z_max


@pytest.mark.parametrize(
    "triple", [(0.3, 0.4, 0.35), (0.3, 0.4, -0.01), (0.8, 0.7, 0.4), (1.2, 0.5, 0.2)]
)
def test_joint_params_rejects_infeasible(triple):
    with pytest.raises(DomainError):
        JointBinaryParams(*triple)


def test_summary_collection_totals():
    data = _coll((10, 3, 4), (5, 5, 0))
    assert (data.k, data.sum_n, data.sum_x, data.sum_y) == (2, 15, 8, 4)
    with pytest.raises(DomainError):
        SummaryCollection(())


def test_log_gamma_table():
    t = LogGammaTable(2000)
    assert t.values[0] == 0.0
    m = np.arange(1, 2001)
    np.testing.assert_allclose(np.diff(t.values), np.log(m), rtol=1e-12)


# --- complete-data term and observed likelihood ----------------------------


def test_log_complete_term_examples():
    assert log_complete_term(MarginalSummary(1, 1, 1), 1, WEAK) == pytest.approx(math.log(0.25), abs=1e-14)
    assert log_complete_term(MarginalSummary(1, 1, 0), 0, WEAK) == pytest.approx(math.log(0.10), abs=1e-14)
    assert log_complete_term(MarginalSummary(2, 1, 1), 0, WEAK) == pytest.approx(math.log(0.07), abs=1e-14)


def test_log_complete_term_infeasible_z():
    with pytest.raises(DomainError):
        log_complete_term(MarginalSummary(2, 1, 1), 2, WEAK)
    with pytest.raises(DomainError):
        log_complete_term(MarginalSummary(3, 3, 3), 2, WEAK)


def test_log_complete_term_zero_cell():
    p = JointBinaryParams(0.5, 0.5, 0.5)  # q10 = q01 = 0
    assert log_complete_term(MarginalSummary(2, 1, 1), 0, p) == -math.inf
    assert log_complete_term(MarginalSummary(2, 1, 1), 1, p) == pytest.approx(math.log(2 * 0.25))


def test_observed_likelihood_examples():
    assert log_observed_likelihood_single(MarginalSummary(1, 1, 1), WEAK) == pytest.approx(math.log(0.25))
    assert log_observed_likelihood_single(MarginalSummary(2, 1, 1), WEAK) == pytest.approx(math.log(0.22), abs=1e-14)
    indep = JointBinaryParams(0.5, 0.5, 0.25)
    assert log_observed_likelihood_single(MarginalSummary(3, 2, 1), indep) == pytest.approx(
        math.log(0.375 * 0.375), abs=1e-14
    )


def test_enumeration_oracle_small_n():
    rng = np.random.default_rng(1)
    for _ in range(3):
        p = JointBinaryParams(*random_interior_triple(rng))
        for n in range(1, 6):
            table = enumerate_pmf(n, *p.as_tuple())
            for x in range(n + 1):
                for y in range(n + 1):
                    b = math.exp(log_observed_likelihood_single(MarginalSummary(n, x, y), p))
                    assert abs(b - table[(x, y)]) < 1e-12


@pytest.mark.parametrize("n", [1, 7, 30])
@pytest.mark.parametrize("triple", [(0.35, 0.6, 0.25), (0.5, 0.4, 0.2), (0.8, 0.77, 0.75)])
def test_normalization(n, triple):
    p = JointBinaryParams(*triple)
    total = math.fsum(
        math.exp(log_observed_likelihood_single(MarginalSummary(n, x, y), p))
        for x in range(n + 1)
        for y in range(n + 1)
    )
    assert abs(total - 1.0) < 1e-10


@given(
    st.integers(1, 40).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, n), st.integers(0, n))),
    st.floats(0.05, 0.95),
    st.floats(0.05, 0.95),
    st.floats(0.0, 1.0),
)
def test_symmetry(nxy, p1, p2, frac):
    lo, hi = max(0.0, p1 + p2 - 1.0), min(p1, p2)
    p11 = lo + frac * (hi - lo)
    n, x, y = nxy
    a = log_observed_likelihood_single(MarginalSummary(n, x, y), JointBinaryParams(p1, p2, p11))
    b = log_observed_likelihood_single(MarginalSummary(n, y, x), JointBinaryParams(p2, p1, p11))
    assert a == b or (math.isinf(a) and math.isinf(b))


@given(
    st.integers(1, 20).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, n), st.integers(0, n))),
    st.floats(0.05, 0.95),
    st.floats(0.05, 0.95),
)
def test_independence_factorizes(nxy, p1, p2):
    n, x, y = nxy
    got = math.exp(log_observed_likelihood_single(MarginalSummary(n, x, y), JointBinaryParams(p1, p2, p1 * p2)))
    want = binom_pmf(x, n, p1) * binom_pmf(y, n, p2)
    assert got == pytest.approx(want, rel=1e-10)


@pytest.mark.parametrize("n", [1, 4, 12])
def test_perfect_overlap(n):
    p = JointBinaryParams(0.3, 0.3, 0.3)
    for x in range(n + 1):
        for y in range(n + 1):
            b = math.exp(log_observed_likelihood_single(MarginalSummary(n, x, y), p))
            if x != y:
                assert b == 0.0
            else:
                assert b == pytest.approx(binom_pmf(x, n, 0.3), rel=1e-12)


def test_loglik_additive_and_order_invariant(real_data):
    rec = MarginalSummary(20, 7, 12)
    single = log_observed_likelihood_single(rec, WEAK)
    assert log_likelihood(_coll((20, 7, 12)), WEAK) == pytest.approx(single, abs=1e-15)
    assert log_likelihood(_coll((20, 7, 12), (20, 7, 12)), WEAK) == pytest.approx(2 * single, rel=1e-15)

    p = JointBinaryParams(0.69551, 0.72327, 0.4794)
    fwd = log_likelihood(real_data, p)
    rev = log_likelihood(SummaryCollection(tuple(reversed(real_data.records))), p)
    assert math.isfinite(fwd) and fwd < 0
    assert fwd == pytest.approx(rev, rel=1e-13)


def test_cutoff_drops_negligible_mass(real_data):
    p = JointBinaryParams(0.69551, 0.72327, 0.4794)
    exact = log_likelihood(real_data, p)
    fast = log_likelihood(real_data, p, cutoff=45.0)
    assert abs(exact - fast) < 1e-12


# --- latent expectation and derivatives ------------------------------------


def test_expected_latent_sum_examples():
    assert expected_latent_sum(_coll((1, 1, 1)), WEAK) == pytest.approx(1.0)
    assert expected_latent_sum(_coll((1, 1, 0)), WEAK) == pytest.approx(0.0)
    assert expected_latent_sum(_coll((2, 1, 1)), WEAK) == pytest.approx(0.15 / 0.22, rel=1e-12)


def test_expected_latent_sum_boundary_rejected():
    with pytest.raises(DomainError):
        expected_latent_sum(_coll((2, 1, 1)), JointBinaryParams(0.5, 0.5, 0.5))


@given(
    st.lists(
        st.integers(1, 60).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, n), st.integers(0, n))),
        min_size=1,
        max_size=5,
    ),
    st.floats(0.1, 0.9),
)
def test_expected_latent_sum_bounds(rows, frac):
    data = _coll(*rows)
    p1, p2 = 0.4, 0.55
    p11 = 0.01 + frac * (0.4 - 0.02)
    s = expected_latent_sum(data, JointBinaryParams(p1, p2, p11))
    assert -1e-12 <= s <= sum(min(x, y) for _, x, y in rows) + 1e-9


def test_derivatives_small_fixture():
    data = _coll((2, 1, 1))
    d1, d2 = score_and_curvature(data, WEAK)
    # frozen from the closed-form posterior of z: 1/q11 - 1/q10 - 1/q01 + 1/q00 weighted
    assert d1 == pytest.approx(0.9090909090909, rel=1e-10)
    assert d1 == pytest.approx(fd_first(data, WEAK), rel=1e-6)
    assert d2 == pytest.approx(fd_second(data, WEAK), rel=1e-5)

    def f(t):
        return log_likelihood(data, JointBinaryParams(0.35, 0.60, t))

    h1, h2 = 1e-6, 1e-4
    assert d1 == pytest.approx((f(0.25 + h1) - f(0.25 - h1)) / (2 * h1), rel=1e-6)
    assert d2 == pytest.approx((f(0.25 + h2) - 2 * f(0.25) + f(0.25 - h2)) / h2**2, rel=1e-5)
    assert d1_loglik_dp11(data, WEAK) == d1
    assert d2_loglik_dp11(data, WEAK) == d2


def test_derivatives_randomized_fixtures():
    rng = np.random.default_rng(8)
    for _ in range(40):
        p = JointBinaryParams(*random_interior_triple(rng))
        k = int(rng.integers(1, 5))
        rows = []
        for _ in range(k):
            n = int(rng.integers(1, 30))
            rows.append((n, int(rng.integers(0, n + 1)), int(rng.integers(0, n + 1))))
        data = _coll(*rows)
        d1, d2 = score_and_curvature(data, p)
        assert d1 == pytest.approx(fd_first(data, p), rel=1e-5, abs=1e-6)
        assert d2 == pytest.approx(fd_second(data, p), rel=1e-5)


def test_d2_additive():
    one = d2_loglik_dp11(_coll((9, 4, 6)), WEAK)
    two = d2_loglik_dp11(_coll((9, 4, 6), (9, 4, 6)), WEAK)
    assert two == pytest.approx(2 * one, rel=1e-14)


def test_derivatives_reject_boundary():
    with pytest.raises(DomainError):
        score_and_curvature(_coll((2, 1, 1)), JointBinaryParams(0.5, 0.5, 0.5))


def test_stationarity_score_is_not_the_derivative_but_vanishes_at_mle(real_data):
    from margjoint.binary_estimate import estimate_p11

    data = _coll((2, 1, 1))
    assert stationarity_score_p11(data, WEAK) == pytest.approx((1 + 1 - 2) + (1 - 0.35 - 0.60) / 0.25 * (0.15 / 0.22), rel=1e-9)
    assert stationarity_score_p11(data, WEAK) != pytest.approx(d1_loglik_dp11(data, WEAK))

    est = estimate_p11(real_data)
    p = JointBinaryParams(real_data.sum_x / real_data.sum_n, real_data.sum_y / real_data.sum_n, est.value)
    assert abs(d1_loglik_dp11(real_data, p)) < 1e-4
    assert abs(stationarity_score_p11(real_data, p)) < 1e-4
    assert d2_loglik_dp11(real_data, p) < 0


# --- phi -------------------------------------------------------------------


def test_phi_examples():
    assert round(phi_coefficient(JointBinaryParams(0.35, 0.60, 0.25)), 3) == 0.171
    assert round(phi_coefficient(JointBinaryParams(0.80, 0.77, 0.75)), 3) == 0.796
    assert phi_coefficient(JointBinaryParams(0.3, 0.6, 0.18)) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(DomainError):
        phi_coefficient(JointBinaryParams(1.0, 0.5, 0.5))
