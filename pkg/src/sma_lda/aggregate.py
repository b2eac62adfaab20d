"""FFT aggregation of the annual compound Poisson loss, VaR and the SLA.

The severity is discretized on ``{0, h, ..., (n-1) h}``; severity mass above
the grid is dropped rather than wrapped. Since every loss is positive, a year
containing one dropped loss has a total above the grid, so the resulting
(defective) aggregate is exact on the grid up to discretization and aliasing.
The missing probability is exposed as ``AggregateDistribution.overflow``.
Aliasing of multi-loss sums is damped by exponential tilting.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, replace
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.special import ndtr

from sma_lda.errors import InputError, ResolutionError, SlaUndefinedError
from sma_lda.severity import CompoundModel, SeverityModel

MIN_POINTS = 2**14
LAST_CELL_TOL = 1e-6
NEGATIVE_MASS_TOL = 1e-9


@dataclass(frozen=True)
class DiscretizationConfig:
    """Grid settings for :func:`aggregate_fft`.

    ``tilt`` is the total log-damping across the grid (the per-cell tilt is
    ``tilt / n_points``). Values much above 10 amplify FFT round-off in the
    far tail by ``exp(tilt)``.
    ``method`` is ``"moment"`` (mean-preserving split between neighbouring
    nodes) or ``"round"`` (all interval mass to the nearest node).
    """

    n_points: int = 2**20
    span: float | None = None
    span_mult: float = 8.0
    tilt: float = 8.0
    method: str = "moment"
    retries: int = 3
    retry_factor: float = 4.0

    def __post_init__(self):
        n = self.n_points
        if n < MIN_POINTS or n & (n - 1):
            raise InputError(f"n_points must be a power of two >= {MIN_POINTS}, got {n}")
        if self.span is not None and not self.span > 0:
            raise InputError("span must be positive")
        if self.tilt < 0:
            raise InputError("tilt must be >= 0")
        if self.method not in ("moment", "round"):
            raise InputError(f"unknown discretization method {self.method!r}")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class AggregateDistribution:
    grid_step: float
    masses: np.ndarray
    lam: float
    severity_mean: float
    tilt: float = 0.0
    method: str = "moment"

    @property
    def n_points(self) -> int:
        return int(self.masses.size)

    @property
    def span(self) -> float:
        return self.grid_step * self.n_points

    @property
    def grid(self) -> np.ndarray:
        return self.grid_step * np.arange(self.n_points)

    @cached_property
    def cdf(self) -> np.ndarray:
        c = np.cumsum(self.masses)
        c.setflags(write=False)
        return c

    @property
    def overflow(self) -> float:
        """Probability that the annual total lies beyond the grid."""
        return max(0.0, 1.0 - float(self.cdf[-1]))

    def mean(self) -> float:
        return float(np.dot(self.grid, self.masses))

    def cdf_at(self, x: float) -> float:
        if x < 0:
            raise InputError("cdf_at needs x >= 0")
        last = self.grid_step * (self.n_points - 1)
        if x > last:
            raise ResolutionError(
                f"x={x:.6g} lies beyond the grid end {last:.6g}; rebuild with a larger span"
            )
        pos = x / self.grid_step
        i = min(int(pos), self.n_points - 2)
        w = pos - i
        return float((1.0 - w) * self.cdf[i] + w * self.cdf[i + 1])

    def var_quantile(self, p: float) -> float:
        if not 0 < p < 1:
            raise InputError(f"quantile level must lie in (0, 1), got {p}")
        if self.cdf[-1] < p:
            raise ResolutionError(
                f"grid mass {self.cdf[-1]:.12f} never reaches {p}; increase the span"
            )
        return float(np.searchsorted(self.cdf, p, side="left") * self.grid_step)

    def nines_at(self, x: float) -> float:
        return number_of_nines(self.cdf_at(x))

    def to_csv(self, path, stride: int = 1) -> None:
        """Write ``(x, cdf)`` pairs; ``stride`` thins the output."""
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x_eur", "cdf"])
            for i in range(0, self.n_points, stride):
                w.writerow([f"{i * self.grid_step:.6f}", f"{self.cdf[i]:.15g}"])


def discretize_severity(severity: SeverityModel, h: float, n: int, method: str = "moment") -> np.ndarray:
    """Severity masses on ``{0, h, ..., (n-1) h}``; mass beyond the grid is dropped."""
    k = np.arange(n + 1, dtype=float)
    if method == "round":
        surv = severity.sf((k[:-1] + 0.5) * h)
        f = np.empty(n)
        f[0] = 1.0 - surv[0]
        f[1:] = surv[:-1] - surv[1:]
        return f
    x = k * h
    surv = severity.sf(x)
    tail = severity.tail_expectation(x)
    prob = surv[:-1] - surv[1:]
    part = tail[:-1] - tail[1:]
    up = np.clip((part - x[:-1] * prob) / h, 0.0, prob)
    f = prob - up
    f[1:] += up[:-1]
    return f


def sla_capital(severity: SeverityModel, lam: float, p: float = 0.999) -> float:
    """Single-loss approximation of the p-quantile of the annual total."""
    if not lam > 0:
        raise SlaUndefinedError(f"frequency must be positive, got {lam}")
    tail = (1.0 - p) / lam
    if tail >= 1.0:
        raise SlaUndefinedError(f"(1 - p) / lambda = {tail:.4g} >= 1; SLA undefined")
    return float(severity.isf(tail)) + lam * severity.mean()


def _second_moment(severity: SeverityModel) -> float:
    s = severity.sigma
    return math.exp(2 * severity.mu + 2 * s * s) * float(ndtr(2 * s - severity.z_trunc)) / severity.survival_at_truncation


def quantile_scale_estimate(model: CompoundModel, p: float = 0.999) -> float:
    """Rough upper-quantile scale used to size the grid."""
    sev = model.severity
    try:
        heavy = sla_capital(sev, model.lam, p)
    except SlaUndefinedError:
        heavy = float(sev.quantile(p)) + model.expected_loss
    light = model.expected_loss + 4.0 * math.sqrt(model.lam * _second_moment(sev))
    return max(heavy, light)


def _fft_pass(model: CompoundModel, span: float, cfg: DiscretizationConfig) -> AggregateDistribution:
    n = cfg.n_points
    h = span / n
    f = discretize_severity(model.severity, h, n, cfg.method)
    theta = cfg.tilt / n
    damp = np.exp(-theta * np.arange(n))
    transform = np.exp(model.lam * (np.fft.rfft(f * damp) - 1.0))
    g = np.fft.irfft(transform, n) / damp
    low = float(g.min())
    if low < -NEGATIVE_MASS_TOL:
        raise ResolutionError(
            f"FFT produced a mass of {low:.3g}; lower the tilt or change the grid"
        )
    np.maximum(g, 0.0, out=g)
    g.setflags(write=False)
    return AggregateDistribution(
        grid_step=h,
        masses=g,
        lam=model.lam,
        severity_mean=model.severity.mean(),
        tilt=cfg.tilt,
        method=cfg.method,
    )


def aggregate_fft(
    model: CompoundModel,
    cfg: DiscretizationConfig | None = None,
    *,
    p: float = 0.999,
    min_span: float = 0.0,
) -> AggregateDistribution:
    """Annual total-loss distribution of ``model`` by FFT.

    The span defaults to ``cfg.span_mult`` times a quantile-scale estimate at
    level ``p``, and is at least ``min_span``. When the last cell still holds
    noticeable mass, or the grid never reaches ``p``, the span is enlarged by
    ``cfg.retry_factor`` up to ``cfg.retries`` times.
    """
    cfg = cfg or DiscretizationConfig()
    span = cfg.span or cfg.span_mult * quantile_scale_estimate(model, p)
    span = max(span, min_span)
    last_err = None
    for _ in range(cfg.retries + 1):
        try:
            agg = _fft_pass(model, span, cfg)
        except ResolutionError as err:
            last_err = err
        else:
            if agg.masses[-1] > LAST_CELL_TOL:
                last_err = ResolutionError(
                    f"mass {agg.masses[-1]:.3g} in the last cell at span {span:.6g}"
                )
            elif agg.cdf[-1] < p:
                last_err = ResolutionError(f"grid never reaches level {p} at span {span:.6g}")
            else:
                return agg
        span *= cfg.retry_factor
    raise ResolutionError(f"{last_err}; retries exhausted, try a larger span or more points")


def var_quantile(agg: AggregateDistribution, p: float) -> float:
    return agg.var_quantile(p)


def cdf_at(agg: AggregateDistribution, x: float) -> float:
    return agg.cdf_at(x)


def number_of_nines(p: float) -> float:
    if not 0 <= p <= 1:
        raise InputError(f"probability must lie in [0, 1], got {p}")
    if p == 1:
        return math.inf
    return -math.log10(1.0 - p)


def with_points(cfg: DiscretizationConfig, n_points: int) -> DiscretizationConfig:
    return replace(cfg, n_points=n_points)
