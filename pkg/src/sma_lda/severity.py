"""Lognormal severity (optionally left-truncated) and Poisson frequency analytics.

A :class:`SeverityModel` with ``truncation > 0`` describes losses conditional
on exceeding the truncation point; the frequency of a :class:`CompoundModel`
counts those losses only. ``CompoundModel.thinned`` moves between the
all-loss and the above-threshold descriptions of the same process.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from sma_lda.errors import InputError
from sma_lda.sma_core import LC_THRESHOLD_HIGH, LC_THRESHOLD_LOW


@dataclass(frozen=True)
class SeverityModel:
    mu: float
    sigma: float
    truncation: float = 0.0

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise InputError(f"sigma must be positive, got {self.sigma}")
        if not math.isfinite(self.mu):
            raise InputError(f"mu must be finite, got {self.mu}")
        if not self.truncation >= 0:
            raise InputError(f"truncation must be >= 0, got {self.truncation}")

    def with_truncation(self, truncation: float) -> "SeverityModel":
        return SeverityModel(self.mu, self.sigma, truncation)

    @property
    def z_trunc(self) -> float:
        if self.truncation == 0:
            return -math.inf
        return (math.log(self.truncation) - self.mu) / self.sigma

    @property
    def survival_at_truncation(self) -> float:
        """P(X > t) under the untruncated lognormal."""
        return float(ndtr(-self.z_trunc))

    def _z(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return (np.log(x) - self.mu) / self.sigma

    def sf(self, x):
        """P(X > x) under the truncated model."""
        x = np.maximum(np.asarray(x, dtype=float), self.truncation)
        out = ndtr(-self._z(x)) / self.survival_at_truncation
        return np.minimum(out, 1.0)

    def cdf(self, x):
        return 1.0 - self.sf(x)

    def isf(self, q):
        """Inverse survival function; accurate for tiny tail probabilities."""
        q = np.asarray(q, dtype=float)
        if np.any((q <= 0) | (q >= 1)):
            raise InputError("tail probability must lie in (0, 1)")
        z = -ndtri(q * self.survival_at_truncation)
        return np.exp(self.mu + self.sigma * z)

    def quantile(self, p):
        p = np.asarray(p, dtype=float)
        if np.any((p <= 0) | (p >= 1)):
            raise InputError("quantile level must lie in (0, 1)")
        return self.isf(1.0 - p)

    @property
    def raw_mean(self) -> float:
        return math.exp(self.mu + 0.5 * self.sigma**2)

    def mean(self) -> float:
        return self.raw_mean * float(ndtr(self.sigma - self.z_trunc)) / self.survival_at_truncation

    def tail_expectation(self, x):
        """E[X; X > x] under the truncated model (x clamped to the truncation point)."""
        x = np.maximum(np.asarray(x, dtype=float), self.truncation)
        with np.errstate(divide="ignore"):
            arg = (self.mu + self.sigma**2 - np.log(x)) / self.sigma
        return self.raw_mean * ndtr(arg) / self.survival_at_truncation

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.truncation == 0:
            return rng.lognormal(self.mu, self.sigma, size)
        u = rng.random(size)
        # 1 - u lies in (0, 1]; the zero endpoint of u maps to the truncation point
        u = np.where(u == 0.0, np.nextafter(0.0, 1.0), u)
        return self.isf(u)


@dataclass(frozen=True)
class CompoundModel:
    severity: SeverityModel
    lam: float

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise InputError(f"Poisson frequency must be positive, got {self.lam}")

    def thinned(self, threshold: float) -> "CompoundModel":
        """The same loss process seen only above ``threshold``."""
        return CompoundModel(
            self.severity.with_truncation(threshold), frequency_above(self, threshold)
        )

    @property
    def expected_loss(self) -> float:
        return self.lam * self.severity.mean()


def trunc_cdf(severity: SeverityModel, x):
    return severity.cdf(x)


def trunc_quantile(severity: SeverityModel, p):
    return severity.quantile(p)


def trunc_mean(severity: SeverityModel) -> float:
    return severity.mean()


def partial_expectation_fraction(severity: SeverityModel, threshold: float) -> float:
    """E[X 1{X > threshold}] / E[X] under the (truncated) severity."""
    if threshold < severity.truncation:
        raise InputError(
            f"threshold {threshold} is below the truncation point {severity.truncation}"
        )
    return float(severity.tail_expectation(threshold) / severity.mean())


def alpha_star_analytic(severity: SeverityModel) -> float:
    t = severity.truncation
    a10 = partial_expectation_fraction(severity, max(LC_THRESHOLD_LOW, t))
    a100 = partial_expectation_fraction(severity, max(LC_THRESHOLD_HIGH, t))
    return 7.0 + 7.0 * a10 + 5.0 * a100


def expected_lc(model: CompoundModel) -> float:
    return alpha_star_analytic(model.severity) * model.lam * model.severity.mean()


def lambda_from_el(severity: SeverityModel, el: float) -> float:
    if not el > 0:
        raise InputError(f"expected loss must be positive, got {el}")
    return el / severity.mean()


def frequency_above(model: CompoundModel, threshold: float) -> float:
    if threshold < model.severity.truncation:
        raise InputError(
            f"threshold {threshold} is below the truncation point {model.severity.truncation}"
        )
    return model.lam * float(model.severity.sf(threshold))
