import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sma_lda.errors import InputError, UndefinedFractionError
from sma_lda.sma_core import (
    BankProfile,
    BicSchedule,
    LossEvent,
    LossHistory,
    alpha_fractions,
    alpha_ratio_curve,
    alpha_star,
    compute_bi,
    compute_bic,
    compute_lc,
    compute_sma,
    sma_breakdown,
    sma_el_curve,
)

BN = 1e9
M = 1e6


def history(*amounts, years=None, window=10):
    return LossHistory.from_arrays(amounts, years, window_years=window)


class TestBusinessIndicator:
    def test_zero_components(self):
        assert compute_bi(BankProfile(0, 0, 0)) == 0

    def test_direct_passthrough(self):
        assert compute_bi(BankProfile(bi_direct=8 * BN)) == 8 * BN

    def test_sum_of_components(self):
        assert compute_bi(BankProfile(3 * BN, 4 * BN, 1 * BN)) == 8 * BN

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"ildc_avg": -1, "sc_avg": 0, "fc_avg": 0},
            {"bi_direct": -5.0},
            {"ildc_avg": 1, "sc_avg": 1, "fc_avg": 1, "bi_direct": 3},
            {"ildc_avg": 1, "sc_avg": 1},
            {},
        ],
    )
    def test_invalid_profiles(self, kwargs):
        with pytest.raises(InputError):
            BankProfile(**kwargs)


class TestBicSchedule:
    def test_small_bucket(self):
        assert compute_bic(0.5 * BN) == pytest.approx(55 * M, rel=1e-12)

    def test_edge_continuity(self):
        assert compute_bic(1 * BN) == pytest.approx(110 * M, rel=1e-12)
        assert 0.11 * 1 * BN == pytest.approx(110 * M, rel=1e-12)

    @pytest.mark.parametrize("bi, bic", [(8, 1.36), (20, 4.04), (40, 9.24)])
    def test_reference_levels(self, bi, bic):
        assert compute_bic(bi * BN) == pytest.approx(bic * BN, rel=1e-9)

    def test_offsets_match_schedule_table(self):
        assert BicSchedule().offsets == pytest.approx((0, 110 * M, 410 * M, 1.74 * BN, 6.34 * BN))

    @pytest.mark.parametrize("edge", [1, 3, 10, 30])
    def test_finite_difference_slopes_nondecreasing(self, edge):
        eps = 1e3
        x = edge * BN
        left = (compute_bic(x) - compute_bic(x - eps)) / eps
        right = (compute_bic(x + eps) - compute_bic(x)) / eps
        assert right > left
        assert abs(compute_bic(x + 1e-3) - compute_bic(x - 1e-3)) < 1.0

    def test_slopes(self):
        pts = np.array([0.5, 2, 5, 20, 50]) * BN
        h = 1e4
        slopes = [(compute_bic(p + h) - compute_bic(p - h)) / (2 * h) for p in pts]
        assert slopes == pytest.approx([0.11, 0.15, 0.19, 0.23, 0.29], rel=1e-6)

    def test_negative_bi_rejected(self):
        with pytest.raises(InputError):
            compute_bic(-1.0)

    @given(st.floats(0, 100 * BN), st.floats(0, 100 * BN))
    def test_monotone(self, a, b):
        lo, hi = sorted((a, b))
        assert compute_bic(lo) <= compute_bic(hi)

    def test_custom_schedule(self):
        sched = BicSchedule(breakpoints=(0.0, 2 * BN), slopes=(0.1, 0.2))
        assert compute_bic(3 * BN, sched) == pytest.approx(0.4 * BN)
        assert sched.bi(0.4 * BN) == pytest.approx(3 * BN)

    def test_schedule_from_mapping(self):
        assert BicSchedule.from_mapping(None) == BicSchedule()
        sched = BicSchedule.from_mapping({"breakpoints": [0, 2e9], "slopes": [0.1, 0.2]})
        assert sched.slopes == (0.1, 0.2)
        with pytest.raises(InputError):
            BicSchedule.from_mapping({"breakpoints": [0], "slope": [0.1]})


class TestLossComponent:
    def test_small_loss(self):
        assert compute_lc(history(5 * M)) == pytest.approx(3.5 * M)

    def test_medium_loss(self):
        assert compute_lc(history(50 * M)) == pytest.approx(70 * M)

    def test_large_loss(self):
        assert compute_lc(history(200 * M)) == pytest.approx(380 * M)

    def test_thresholds_are_strict(self):
        assert compute_lc(history(10 * M)) == pytest.approx(7.0 * M)
        assert compute_lc(history(100 * M)) == pytest.approx(140 * M)

    def test_empty_history(self):
        assert compute_lc(history()) == 0.0

    def test_floor_applied_at_ingestion(self):
        h = history(5_000.0, 9_999.99, 10_000.0, 2 * M)
        assert len(h) == 2
        assert h.n_below_floor == 2

    def test_window_violation(self):
        with pytest.raises(InputError):
            history(1 * M, 2 * M, years=[2000, 2010])

    def test_events_round_trip(self):
        evs = [LossEvent(2e6, 2015), LossEvent(3e7, 2016)]
        h = LossHistory.from_events(evs)
        assert h.events == evs

    def test_nonpositive_event_rejected(self):
        with pytest.raises(InputError):
            LossEvent(0.0, 2015)

    @settings(max_examples=200)
    @given(
        st.lists(st.floats(1e4, 9e6), min_size=1, max_size=30),
        st.floats(1.0, 1.1),
    )
    def test_homogeneous_below_thresholds(self, amounts, c):
        # scaled amounts stay inside (1e4, 1e7], so no indicator flips
        base = compute_lc(history(*amounts))
        assert compute_lc(history(*(c * a for a in amounts))) == pytest.approx(c * base, rel=1e-12)

    @given(st.lists(st.floats(2e7, 9e7), min_size=1, max_size=10), st.floats(0.6, 1.1))
    def test_homogeneous_between_thresholds(self, amounts, c):
        base = compute_lc(history(*amounts))
        assert compute_lc(history(*(c * a for a in amounts))) == pytest.approx(c * base, rel=1e-12)


class TestRiskFactor:
    def test_fractions_all_small(self):
        assert alpha_fractions(history(1 * M, 2 * M)) == (0.0, 0.0)

    def test_fractions_all_large(self):
        assert alpha_fractions(history(150 * M, 300 * M)) == (1.0, 1.0)

    def test_fractions_mixed(self):
        assert alpha_fractions(history(5 * M, 15 * M)) == pytest.approx((0.75, 0.0))

    def test_fractions_zero_total(self):
        with pytest.raises(UndefinedFractionError):
            alpha_fractions(history())

    @pytest.mark.parametrize("a10, a100, expected", [(0, 0, 7), (1, 1, 19)])
    def test_extremes(self, a10, a100, expected):
        assert alpha_star(a10, a100) == expected

    def test_intermediate(self):
        # fractions from numerical integration of the (9, 2.1) severity above 10k
        assert alpha_star(0.1009, 0.00871) == pytest.approx(7.75, abs=5e-4)

    def test_invalid_order(self):
        with pytest.raises(InputError):
            alpha_star(0.1, 0.2)

    @given(st.lists(st.floats(1e4, 1e9), min_size=1, max_size=40))
    def test_range_and_decomposition(self, amounts):
        h = history(*amounts)
        a10, a100 = alpha_fractions(h)
        assert a100 <= a10
        a = alpha_star(a10, a100)
        assert 7 <= a <= 19
        assert compute_lc(h) == pytest.approx(a * sum(amounts) / 10, rel=1e-12)


class TestSma:
    def test_fixed_point(self):
        assert compute_sma(8 * BN, 1.36 * BN, 1.36 * BN) == pytest.approx(1.36 * BN, rel=1e-12)

    @pytest.mark.parametrize(
        "bic, lc, sma",
        [(1.36, 0.390, 0.980), (4.04, 4.728, 4.279)],
    )
    def test_reference_pairs(self, bic, lc, sma):
        assert compute_sma(5 * BN, bic * BN, lc * BN) / BN == pytest.approx(sma, abs=5e-4)

    def test_small_bank_ignores_lc(self):
        assert compute_sma(0.5 * BN, 55 * M, 10 * BN) == 55 * M
        assert compute_sma(0.5 * BN, 55 * M, 0.0) == 55 * M

    def test_zero_lc_is_legal(self):
        bic = 1.36 * BN
        assert compute_sma(8 * BN, bic, 0.0) == pytest.approx(110 * M + (bic - 110 * M) * math.log(math.e - 1))

    def test_nonpositive_bic_rejected(self):
        with pytest.raises(InputError):
            compute_sma(2 * BN, 0.0, 1.0)

    @given(st.floats(1, 100), st.floats(0, 50), st.floats(0, 50))
    def test_monotone_in_lc(self, bi_bn, lc1, lc2):
        bi = bi_bn * BN
        bic = compute_bic(bi)
        lo, hi = sorted((lc1, lc2))
        assert compute_sma(bi, bic, lo * bic) <= compute_sma(bi, bic, hi * bic)

    @given(st.floats(1, 100), st.floats(1, 100), st.floats(0.01, 10))
    def test_monotone_in_bic_at_fixed_ratio(self, a, b, r):
        lo, hi = sorted((a * BN, b * BN))
        blo, bhi = compute_bic(lo), compute_bic(hi)
        assert compute_sma(lo, blo, r * blo) <= compute_sma(hi, bhi, r * bhi) * (1 + 1e-12)

    @given(st.floats(1, 100))
    def test_fixed_point_property(self, bi_bn):
        bic = compute_bic(bi_bn * BN)
        assert compute_sma(bi_bn * BN, bic, bic) == pytest.approx(bic, rel=1e-12)


class TestBreakdown:
    def test_breakdown_consistency(self):
        h = history(2 * M, 20 * M, 200 * M, years=[2010, 2012, 2019])
        b = sma_breakdown(BankProfile(bi_direct=8 * BN), h)
        assert b.lc == pytest.approx(b.alpha_star * b.el, rel=1e-12)
        assert b.bic == pytest.approx(1.36 * BN)
        assert not b.short_window

    def test_short_window_flagged(self):
        h = history(2 * M, window=5)
        with pytest.warns(UserWarning):
            b = sma_breakdown(BankProfile(bi_direct=2 * BN), h)
        assert b.short_window
        assert b.lc == pytest.approx(7 * 2 * M / 10)

    def test_empty_history_breakdown(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            b = sma_breakdown(BankProfile(bi_direct=0.5 * BN), history())
        assert b.alpha_star is None
        assert b.sma == pytest.approx(55 * M)


class TestCurves:
    @pytest.mark.parametrize(
        "alpha, r, expected",
        [(19, 0.5, 30.275851913), (19, 2, 12.475986031), (7, 0.5, 11.154261231), (7, 2, 4.596415906)],
    )
    def test_sma_el_endpoints(self, alpha, r, expected):
        # expected values evaluated independently at 40 digits with mpmath
        assert sma_el_curve(alpha, r) == pytest.approx(expected, rel=1e-9)

    def test_sma_el_rejects_zero_ratio(self):
        with pytest.raises(InputError):
            sma_el_curve(7, [0.0, 1.0])

    def test_exact_form_approaches_asymptotic(self):
        r = np.array([0.5, 1, 2])
        near = sma_el_curve(19, r, exact=True, bic=1e15)
        assert near == pytest.approx(sma_el_curve(19, r), rel=1e-6)
        # at LC = BIC the offset cancels and SMA/EL equals the risk factor
        assert sma_el_curve(19, 1.0, exact=True, bic=1.36 * BN) == pytest.approx(19.0, rel=1e-12)

    def test_ratio_at_unit_el(self):
        # mpmath: ln(e - 1 + 19) / ln(e - 1 + 7)
        assert alpha_ratio_curve(1.0) == pytest.approx(1.3997346651, rel=1e-10)

    def test_ratio_near_zero(self):
        assert alpha_ratio_curve(1e-9) == pytest.approx(1.0, abs=1e-7)

    def test_ratio_peak(self):
        u = np.linspace(1e-4, 10, 200_001)
        vals = alpha_ratio_curve(u)
        assert vals.min() >= 1.0
        assert vals.max() == pytest.approx(1.50, abs=0.03)
        assert u[np.argmax(vals)] == pytest.approx(0.2, abs=0.03)
