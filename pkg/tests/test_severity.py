import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from sma_lda.errors import InputError
from sma_lda.severity import (
    CompoundModel,
    SeverityModel,
    alpha_star_analytic,
    expected_lc,
    frequency_above,
    lambda_from_el,
    partial_expectation_fraction,
    trunc_cdf,
    trunc_mean,
    trunc_quantile,
)

FLOOR = 1e4
SEV = SeverityModel(9, 2.1, FLOOR)


def quad_mean(mu, sigma, t):
    """Truncated mean by quadrature over the log amount."""
    dens = lambda y: math.exp(y) * stats.norm.pdf(y, mu, sigma)
    lo = math.log(t) if t > 0 else mu - 12 * sigma
    return integrate.quad(dens, lo, mu + 18 * sigma, limit=400)[0] / stats.norm.sf(lo, mu, sigma)


class TestTruncatedLognormal:
    def test_untruncated_mean(self):
        s = SeverityModel(9, 2.1)
        assert trunc_mean(s) == pytest.approx(math.exp(9 + 2.1**2 / 2), rel=1e-14)

    def test_truncated_mean_value(self):
        # quadrature oracle: 156103.19
        assert trunc_mean(SEV) == pytest.approx(156103.19, rel=1e-6)

    @pytest.mark.parametrize("mu, sigma", [(8, 1), (9, 2.6), (10, 3.1), (12, 4)])
    def test_mean_against_quadrature(self, mu, sigma):
        s = SeverityModel(mu, sigma, FLOOR)
        assert s.mean() == pytest.approx(quad_mean(mu, sigma, FLOOR), rel=1e-7)

    def test_cdf_boundaries(self):
        assert trunc_cdf(SEV, FLOOR) == 0.0
        assert trunc_cdf(SEV, 5e3) == 0.0
        assert trunc_cdf(SEV, 1e30) == pytest.approx(1.0, abs=1e-15)

    def test_cdf_matches_scipy_conditional(self):
        x = np.array([2e4, 1e5, 1e6, 1e8])
        d = stats.lognorm(2.1, scale=math.exp(9))
        expected = (d.cdf(x) - d.cdf(FLOOR)) / d.sf(FLOOR)
        assert trunc_cdf(SEV, x) == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("p", [1e-6, 0.1, 0.5, 0.999, 1 - 1e-9])
    def test_quantile_inverts_cdf(self, p):
        assert trunc_cdf(SEV, trunc_quantile(SEV, p)) == pytest.approx(p, rel=1e-9, abs=1e-15)

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
    def test_quantile_domain(self, p):
        with pytest.raises(InputError):
            trunc_quantile(SEV, p)

    def test_sampling_respects_truncation(self):
        x = SEV.sample(np.random.default_rng(3), 100_000)
        assert x.min() >= FLOOR
        # KS against the truncated cdf
        assert stats.kstest(x, lambda v: trunc_cdf(SEV, v)).pvalue > 1e-3

    def test_invalid_parameters(self):
        with pytest.raises(InputError):
            SeverityModel(9, 0.0)
        with pytest.raises(InputError):
            SeverityModel(9, 1.0, -1.0)
        with pytest.raises(InputError):
            CompoundModel(SEV, 0.0)


class TestPartialExpectation:
    def test_whole_mass_at_truncation(self):
        assert partial_expectation_fraction(SEV, FLOOR) == pytest.approx(1.0, rel=1e-14)

    def test_value(self):
        # quadrature oracle: 0.1008964
        assert partial_expectation_fraction(SEV, 1e7) == pytest.approx(0.1008964, rel=1e-5)

    def test_against_monte_carlo(self):
        x = SEV.sample(np.random.default_rng(11), 10_000_000)
        w = x * (x > 1e7)
        est = w.sum() / x.sum()
        # ratio-estimator standard error via the delta method
        m = x.mean()
        resid = w - est * x
        se = resid.std() / (m * math.sqrt(x.size))
        assert abs(partial_expectation_fraction(SEV, 1e7) - est) < 4 * se

    def test_vanishing_tail(self):
        assert partial_expectation_fraction(SEV, 1e30) < 1e-12

    def test_below_truncation_rejected(self):
        with pytest.raises(InputError):
            partial_expectation_fraction(SEV, 1e3)

    @given(st.floats(1e4, 1e12), st.floats(1e4, 1e12))
    def test_nonincreasing(self, a, b):
        lo, hi = sorted((a, b))
        assert partial_expectation_fraction(SEV, lo) >= partial_expectation_fraction(SEV, hi)


class TestRiskFactorAnalytic:
    @pytest.mark.parametrize(
        "mu, sigma, expected",
        [(8, 2, 7.2), (9, 2.1, 7.7), (10, 2, 8.1), (9, 2.6, 10.9), (10, 2.5, 11.6), (9, 3.1, 15.2), (10, 3.1, 16.3)],
    )
    def test_reference_values(self, mu, sigma, expected):
        assert alpha_star_analytic(SeverityModel(mu, sigma, FLOOR)) == pytest.approx(expected, abs=0.05)

    @settings(max_examples=100)
    @given(st.floats(8, 12), st.floats(1, 4), st.floats(1, 4))
    def test_range_and_monotone_in_sigma(self, mu, s1, s2):
        lo, hi = sorted((s1, s2))
        a_lo = alpha_star_analytic(SeverityModel(mu, lo, FLOOR))
        a_hi = alpha_star_analytic(SeverityModel(mu, hi, FLOOR))
        assert 7 <= a_lo <= 19 and 7 <= a_hi <= 19
        assert a_lo <= a_hi + 1e-12

    def test_empirical_risk_factor_converges(self):
        rng = np.random.default_rng(2024)
        sev = SeverityModel(9, 2.1, FLOOR)
        x = sev.sample(rng, 2_000_000)
        w = 7 + 7 * (x > 1e7) + 5 * (x > 1e8)
        est = (w * x).sum() / x.sum()
        resid = w * x - est * x
        se = resid.std() / (x.mean() * math.sqrt(x.size))
        assert abs(est - alpha_star_analytic(sev)) < 3 * se


class TestFrequency:
    def test_expected_lc_table_value(self):
        m = CompoundModel(SEV, 323)
        assert expected_lc(m) == pytest.approx(0.390e9, rel=0.01)

    def test_expected_lc_second_value(self):
        m = CompoundModel(SeverityModel(9, 2.6, FLOOR), 857)
        assert expected_lc(m) == pytest.approx(4.728e9, rel=0.01)

    def test_expected_lc_linear_in_frequency(self):
        m1, m2 = CompoundModel(SEV, 100), CompoundModel(SEV, 200)
        assert expected_lc(m2) == pytest.approx(2 * expected_lc(m1), rel=1e-14)

    @given(st.floats(8, 12), st.floats(1, 4), st.floats(1, 1e4))
    def test_decomposition_identity(self, mu, sigma, lam):
        m = CompoundModel(SeverityModel(mu, sigma, FLOOR), lam)
        ratio = expected_lc(m) / (lam * trunc_mean(m.severity))
        assert ratio == pytest.approx(alpha_star_analytic(m.severity), rel=1e-12)

    def test_lambda_unit(self):
        assert lambda_from_el(SEV, trunc_mean(SEV)) == pytest.approx(1.0, rel=1e-15)

    @pytest.mark.parametrize(
        "mu, sigma, el, lam",
        [(9, 2.1, 0.050e9, 323), (10, 3.1, 0.415e9, 93)],
    )
    def test_lambda_reference(self, mu, sigma, el, lam):
        assert lambda_from_el(SeverityModel(mu, sigma, FLOOR), el) == pytest.approx(lam, rel=0.01)

    @given(st.floats(1e3, 1e12))
    def test_lambda_round_trip(self, el):
        lam = lambda_from_el(SEV, el)
        assert CompoundModel(SEV, lam).expected_loss == pytest.approx(el, rel=1e-9)

    def test_lambda_rejects_nonpositive(self):
        with pytest.raises(InputError):
            lambda_from_el(SEV, 0.0)

    def test_frequency_at_truncation(self):
        m = CompoundModel(SEV, 323)
        assert frequency_above(m, FLOOR) == pytest.approx(323, rel=1e-14)

    def test_frequency_vanishes(self):
        assert frequency_above(CompoundModel(SEV, 323), 1e40) < 1e-12

    def test_frequency_all_losses(self):
        m = CompoundModel(SeverityModel(8, 2), 1000)
        # 1000 * (1 - Phi((ln 2e4 - 8) / 2)) at 40 digits
        assert frequency_above(m, 2e4) == pytest.approx(170.61347112929055, rel=1e-12)

    def test_frequency_by_simulation(self):
        rng = np.random.default_rng(5)
        m = CompoundModel(SeverityModel(8, 2), 1000)
        counts = rng.poisson(m.lam, 2000)
        x = m.severity.sample(rng, counts.sum())
        rate = (x > 2e4).sum() / counts.size
        se = math.sqrt(frequency_above(m, 2e4) / counts.size)
        assert abs(rate - frequency_above(m, 2e4)) < 4 * se

    def test_frequency_below_truncation_rejected(self):
        with pytest.raises(InputError):
            frequency_above(CompoundModel(SEV, 1), 5e3)

    def test_thinning_preserves_expected_loss_above_floor(self):
        m = CompoundModel(SeverityModel(9, 2.1), 1000)
        t = m.thinned(FLOOR)
        full = m.lam * m.severity.tail_expectation(FLOOR)
        assert t.expected_loss == pytest.approx(full, rel=1e-12)
