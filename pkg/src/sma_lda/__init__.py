"""SMA operational-risk capital and a compound Poisson-lognormal LDA engine."""

from sma_lda.sma_core import (
    BankProfile,
    LossEvent,
    LossHistory,
    SmaBreakdown,
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
from sma_lda.severity import (
    CompoundModel,
    SeverityModel,
    alpha_star_analytic,
    expected_lc,
    frequency_above,
    lambda_from_el,
    partial_expectation_fraction,
)
from sma_lda.aggregate import (
    AggregateDistribution,
    DiscretizationConfig,
    aggregate_fft,
    number_of_nines,
    sla_capital,
)
from sma_lda.calibration import FitResult, fit_poisson_rate, fit_truncated_lognormal
from sma_lda.regression import (
    RegressionParams,
    lc_quantile_given_bic,
    median_bi_from_bic,
    sample_bic,
)

__version__ = "0.1.0"
