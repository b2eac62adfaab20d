"""Empirical link between the BI Component and the Loss Component.

The link is a log-log-log regression in EUR millions,
``ln(BIC) = intercept + slope * ln(ln(LC)) + eps`` with Gaussian ``eps``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from sma_lda.errors import InputError, RegressionDomainError
from sma_lda.sma_core import DEFAULT_SCHEDULE, BicSchedule

MILLION = 1e6

QUANTILE_LABELS = {"low": 0.1, "median": 0.5, "high": 0.9}


@dataclass(frozen=True)
class RegressionParams:
    intercept: float = -2.16
    slope: float = 4.90
    resid_sd: float = 0.486

    def __post_init__(self):
        if not self.slope > 0:
            raise InputError("regression slope must be positive")
        if not self.resid_sd > 0:
            raise InputError("residual standard deviation must be positive")

    @classmethod
    def from_mapping(cls, data: dict | None) -> "RegressionParams":
        return cls(**{k: float(v) for k, v in (data or {}).items()})


DEFAULT_PARAMS = RegressionParams()


def bic_from_lc(expected_lc: float, eps: float, params: RegressionParams = DEFAULT_PARAMS) -> float:
    lc_m = expected_lc / MILLION
    if not lc_m > math.e:
        raise RegressionDomainError(
            f"expected LC must exceed e million EUR for the double log, got {expected_lc:.6g}"
        )
    return math.exp(params.intercept + params.slope * math.log(math.log(lc_m)) + eps) * MILLION


def sample_bic(
    expected_lc: float,
    params: RegressionParams,
    rng: np.random.Generator,
) -> float:
    """Draw a BIC for a bank whose expected Loss Component is ``expected_lc``."""
    # validate before drawing so a domain error leaves the stream untouched
    bic_from_lc(expected_lc, 0.0, params)
    eps = float(rng.normal(0.0, params.resid_sd))
    return bic_from_lc(expected_lc, eps, params)


def lc_quantile_given_bic(bic: float, q: float | str, params: RegressionParams = DEFAULT_PARAMS) -> float:
    """q-quantile of the LC consistent with ``bic``.

    LC decreases in ``eps`` at fixed BIC, so the q-quantile of LC uses the
    (1 - q)-quantile of ``eps``. ``q`` may also be one of the labels
    ``"low"``, ``"median"``, ``"high"`` (10%, 50%, 90%).
    """
    if isinstance(q, str):
        q = QUANTILE_LABELS[q]
    if not 0 < q < 1:
        raise InputError(f"quantile must lie in (0, 1), got {q}")
    if not bic > 0:
        raise InputError("BIC must be positive")
    eps = params.resid_sd * float(ndtri(1.0 - q))
    loglog = (math.log(bic / MILLION) - params.intercept - eps) / params.slope
    return math.exp(math.exp(loglog)) * MILLION


def median_bi_from_bic(bic: float, schedule: BicSchedule = DEFAULT_SCHEDULE) -> float:
    if not bic > 0:
        raise InputError("BIC must be positive")
    return schedule.bi(bic)


def median_bic(expected_lc: float, params: RegressionParams = DEFAULT_PARAMS) -> float:
    """BIC on the regression line (eps = 0)."""
    return bic_from_lc(expected_lc, 0.0, params)
