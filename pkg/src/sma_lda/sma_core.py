"""Deterministic SMA calculus.

Business Indicator, the BIC bucket schedule, the Loss Component and its
risk-factor decomposition, the SMA formula and the closed-form ratio curves
used to study its sensitivity. All amounts are in EUR.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from sma_lda.errors import InputError, UndefinedFractionError

COLLECTION_FLOOR = 10_000.0
LC_THRESHOLD_LOW = 10e6
LC_THRESHOLD_HIGH = 100e6
LC_WINDOW_YEARS = 10
SMA_OFFSET = 110e6
SMALL_BANK_BI = 1e9

ALPHA_MIN = 7.0
ALPHA_MAX = 19.0


@dataclass(frozen=True)
class BicSchedule:
    """Piecewise-linear BI -> BIC map.

    ``breakpoints`` are the lower BI edges of each bucket (the first must be
    0) and ``slopes`` the marginal coefficient applied inside it. Offsets are
    implied by continuity, so the schedule can be re-calibrated by editing the
    two tuples only.
    """

    breakpoints: tuple[float, ...] = (0.0, 1e9, 3e9, 10e9, 30e9)
    slopes: tuple[float, ...] = (0.11, 0.15, 0.19, 0.23, 0.29)

    def __post_init__(self):
        if len(self.breakpoints) != len(self.slopes) or not self.breakpoints:
            raise InputError("breakpoints and slopes must have equal, nonzero length")
        if self.breakpoints[0] != 0.0:
            raise InputError("first breakpoint must be 0")
        if any(nxt <= cur for cur, nxt in zip(self.breakpoints, self.breakpoints[1:])):
            raise InputError("breakpoints must be strictly increasing")
        if any(s <= 0 for s in self.slopes):
            raise InputError("slopes must be positive")

    @classmethod
    def from_mapping(cls, data: dict | None) -> "BicSchedule":
        if not data:
            return cls()
        unknown = set(data) - {"breakpoints", "slopes"}
        if unknown:
            raise InputError(f"unknown schedule keys: {sorted(unknown)}")
        return cls(**{k: tuple(float(v) for v in data[k]) for k in data})

    @property
    def offsets(self) -> tuple[float, ...]:
        """BIC value at each bucket's lower edge."""
        out = [0.0]
        for i in range(1, len(self.breakpoints)):
            width = self.breakpoints[i] - self.breakpoints[i - 1]
            out.append(out[-1] + self.slopes[i - 1] * width)
        return tuple(out)

    def bic(self, bi: float) -> float:
        i = int(np.searchsorted(self.breakpoints, bi, side="right")) - 1
        return self.offsets[i] + self.slopes[i] * (bi - self.breakpoints[i])

    def bi(self, bic: float) -> float:
        offsets = self.offsets
        i = int(np.searchsorted(offsets, bic, side="right")) - 1
        return self.breakpoints[i] + (bic - offsets[i]) / self.slopes[i]


DEFAULT_SCHEDULE = BicSchedule()


@dataclass(frozen=True)
class BankProfile:
    """Three-year averaged BI components, or a directly supplied BI."""

    ildc_avg: float | None = None
    sc_avg: float | None = None
    fc_avg: float | None = None
    bi_direct: float | None = None

    def __post_init__(self):
        comps = (self.ildc_avg, self.sc_avg, self.fc_avg)
        has_comps = any(c is not None for c in comps)
        if has_comps and self.bi_direct is not None:
            raise InputError("supply either the BI components or bi_direct, not both")
        if has_comps and any(c is None for c in comps):
            raise InputError("ildc_avg, sc_avg and fc_avg must all be given")
        if not has_comps and self.bi_direct is None:
            raise InputError("profile has neither BI components nor bi_direct")
        for name in ("ildc_avg", "sc_avg", "fc_avg", "bi_direct"):
            v = getattr(self, name)
            if v is not None and (v < 0 or not math.isfinite(v)):
                raise InputError(f"{name} must be a finite non-negative amount, got {v}")

    @classmethod
    def from_mapping(cls, data: dict) -> "BankProfile":
        known = {"ildc_avg", "sc_avg", "fc_avg", "bi_direct"}
        unknown = set(data) - known
        if unknown:
            raise InputError(f"unknown profile keys: {sorted(unknown)}")
        return cls(**{k: (None if v is None else float(v)) for k, v in data.items()})


@dataclass(frozen=True)
class LossEvent:
    amount: float
    year: int

    def __post_init__(self):
        if not self.amount > 0:
            raise InputError(f"loss amount must be positive, got {self.amount}")


@dataclass(frozen=True, eq=False)
class LossHistory:
    """Losses collected over a window, stored column-wise.

    Use :meth:`from_events` or :meth:`from_arrays` to build one; both apply the
    collection floor so that sub-floor losses never reach the LC or a fit.
    """

    amounts: np.ndarray
    years: np.ndarray
    window_years: int = LC_WINDOW_YEARS
    n_below_floor: int = 0

    def __post_init__(self):
        if self.window_years < 1:
            raise InputError("window_years must be >= 1")
        if self.amounts.shape != self.years.shape:
            raise InputError("amounts and years must have the same length")
        if self.amounts.size and np.any(self.amounts <= 0):
            raise InputError("loss amounts must be positive")
        if self.years.size:
            span = int(self.years.max() - self.years.min()) + 1
            if span > self.window_years:
                raise InputError(
                    f"loss years span {span} years, more than the {self.window_years}-year window"
                )

    @classmethod
    def from_arrays(
        cls,
        amounts: Sequence[float] | np.ndarray,
        years: Sequence[int] | np.ndarray | None = None,
        window_years: int = LC_WINDOW_YEARS,
        floor: float = COLLECTION_FLOOR,
    ) -> "LossHistory":
        a = np.asarray(amounts, dtype=float)
        y = np.zeros(a.shape, dtype=int) if years is None else np.asarray(years, dtype=int)
        if a.size and np.any(~np.isfinite(a) | (a <= 0)):
            raise InputError("loss amounts must be finite and positive")
        keep = a >= floor
        return cls(
            amounts=a[keep],
            years=y[keep],
            window_years=window_years,
            n_below_floor=int(a.size - keep.sum()),
        )

    @classmethod
    def from_events(
        cls,
        events: Iterable[LossEvent],
        window_years: int = LC_WINDOW_YEARS,
        floor: float = COLLECTION_FLOOR,
    ) -> "LossHistory":
        events = list(events)
        return cls.from_arrays(
            [e.amount for e in events], [e.year for e in events], window_years, floor
        )

    @property
    def events(self) -> list[LossEvent]:
        return [LossEvent(float(a), int(y)) for a, y in zip(self.amounts, self.years)]

    @property
    def observed_years(self) -> int:
        if self.years.size == 0:
            return 0
        return int(self.years.max() - self.years.min()) + 1

    def __len__(self):
        return int(self.amounts.size)


@dataclass(frozen=True)
class SmaBreakdown:
    bi: float
    bic: float
    lc: float
    alpha_star: float | None
    el: float
    sma: float
    short_window: bool = False
    warnings: tuple[str, ...] = field(default_factory=tuple)


def compute_bi(profile: BankProfile) -> float:
    if profile.bi_direct is not None:
        return float(profile.bi_direct)
    return float(profile.ildc_avg + profile.sc_avg + profile.fc_avg)


def compute_bic(bi: float, schedule: BicSchedule = DEFAULT_SCHEDULE) -> float:
    if bi < 0 or not math.isfinite(bi):
        raise InputError(f"BI must be a finite non-negative amount, got {bi}")
    return schedule.bic(bi)


def _weighted_sums(amounts: np.ndarray) -> tuple[float, float, float]:
    total = float(amounts.sum())
    over_low = float(amounts[amounts > LC_THRESHOLD_LOW].sum())
    over_high = float(amounts[amounts > LC_THRESHOLD_HIGH].sum())
    return total, over_low, over_high


def compute_lc(history: LossHistory) -> float:
    """Loss Component: weighted loss sum over the window, annualized by a fixed 10."""
    total, over_low, over_high = _weighted_sums(history.amounts)
    return (7.0 * total + 7.0 * over_low + 5.0 * over_high) / LC_WINDOW_YEARS


def alpha_fractions(history: LossHistory) -> tuple[float, float]:
    total, over_low, over_high = _weighted_sums(history.amounts)
    if total <= 0:
        raise UndefinedFractionError("loss fractions are undefined for a loss-free history")
    return over_low / total, over_high / total


def alpha_star(alpha_10: float, alpha_100: float) -> float:
    if not (0.0 <= alpha_100 <= alpha_10 <= 1.0):
        raise InputError(
            f"need 0 <= alpha_100 <= alpha_10 <= 1, got ({alpha_10}, {alpha_100})"
        )
    return 7.0 + 7.0 * alpha_10 + 5.0 * alpha_100


def compute_sma(bi: float, bic: float, lc: float) -> float:
    if lc < 0:
        raise InputError(f"LC must be non-negative, got {lc}")
    if bi < SMALL_BANK_BI:
        return float(bic)
    if bic <= 0:
        raise InputError("BIC must be positive for banks with BI >= 1bn")
    return SMA_OFFSET + (bic - SMA_OFFSET) * math.log(math.e - 1.0 + lc / bic)


def sma_breakdown(
    profile: BankProfile,
    history: LossHistory,
    schedule: BicSchedule = DEFAULT_SCHEDULE,
) -> SmaBreakdown:
    bi = compute_bi(profile)
    bic = compute_bic(bi, schedule)
    lc = compute_lc(history)
    el = float(history.amounts.sum()) / LC_WINDOW_YEARS
    a_star = alpha_star(*alpha_fractions(history)) if el > 0 else None
    notes = []
    short = history.window_years < LC_WINDOW_YEARS
    if short:
        msg = (
            f"loss window is {history.window_years} years; LC still divides by "
            f"{LC_WINDOW_YEARS}"
        )
        notes.append(msg)
        warnings.warn(msg, stacklevel=2)
    return SmaBreakdown(
        bi=bi,
        bic=bic,
        lc=lc,
        alpha_star=a_star,
        el=el,
        sma=compute_sma(bi, bic, lc),
        short_window=short,
        warnings=tuple(notes),
    )


def _asymptotic_sma_over_bic(ratio):
    return np.log(math.e - 1.0 + ratio)


def sma_el_curve(alpha: float, lc_over_bic, exact: bool = False, bic: float | None = None):
    """SMA/EL as a function of LC/BIC for a fixed risk factor.

    With ``exact=False`` the 110m offset is dropped, which is the large-BIC
    limit. ``exact=True`` keeps it and needs the BIC level.
    """
    if not ALPHA_MIN <= alpha <= ALPHA_MAX:
        raise InputError(f"risk factor must lie in [7, 19], got {alpha}")
    r = np.asarray(lc_over_bic, dtype=float)
    if np.any(r <= 0):
        raise InputError("LC/BIC ratios must be positive")
    if not exact:
        return alpha * _asymptotic_sma_over_bic(r) / r
    if bic is None or bic <= SMA_OFFSET:
        raise InputError("exact curve needs a BIC above the 110m offset")
    sma = SMA_OFFSET + (bic - SMA_OFFSET) * np.log(math.e - 1.0 + r)
    el = r * bic / alpha
    return sma / el


def alpha_ratio_curve(el_over_bic, exact: bool = False, bic: float | None = None):
    """SMA at risk factor 19 divided by SMA at risk factor 7, same EL and BIC."""
    u = np.asarray(el_over_bic, dtype=float)
    if np.any(u <= 0):
        raise InputError("EL/BIC ratios must be positive")
    hi = np.log(math.e - 1.0 + ALPHA_MAX * u)
    lo = np.log(math.e - 1.0 + ALPHA_MIN * u)
    if not exact:
        return hi / lo
    if bic is None or bic <= SMA_OFFSET:
        raise InputError("exact curve needs a BIC above the 110m offset")
    scale = bic - SMA_OFFSET
    return (SMA_OFFSET + scale * hi) / (SMA_OFFSET + scale * lo)
