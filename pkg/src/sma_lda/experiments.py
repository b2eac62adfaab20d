"""The two simulation studies: the parameter-grid variability study and the
fixed-BI comparison of SMA against the FFT 99.9% VaR.

Every replication draws from its own generator keyed by
``(seed, combination index, replication index)``, so results do not depend on
execution order or worker count.
"""
from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from sma_lda.aggregate import DiscretizationConfig, aggregate_fft, sla_capital
from sma_lda.calibration import FitResult, fit_truncated_lognormal
from sma_lda.errors import (
    ConvergenceError,
    InputError,
    InsufficientDataError,
    SlaUndefinedError,
)
from sma_lda.regression import (
    DEFAULT_PARAMS,
    QUANTILE_LABELS,
    RegressionParams,
    lc_quantile_given_bic,
    median_bi_from_bic,
    median_bic,
    sample_bic,
)
from sma_lda.severity import (
    CompoundModel,
    SeverityModel,
    alpha_star_analytic,
    expected_lc,
    frequency_above,
    lambda_from_el,
)
from sma_lda.sma_core import (
    COLLECTION_FLOOR,
    DEFAULT_SCHEDULE,
    LC_WINDOW_YEARS,
    BicSchedule,
    LossHistory,
    compute_bic,
    compute_lc,
    compute_sma,
)

log = logging.getLogger(__name__)

AMA_LEVEL = 0.999
AMA_BOUNDS = (10e6, 50e9)
ELC_BOUNDS = (64e6, 150e9)
FREQ_THRESHOLD = 20_000.0
MIN_FREQ_PER_BI_BN = 20.0

# (mu, sigma) pairs per BI level; the rows of the BI comparison table
TABLE2_DESIGN: dict[float, tuple[tuple[float, float], ...]] = {
    8e9: ((8, 2), (9, 2.1), (9, 2.6), (10, 2.5), (9, 3.1), (10, 3.1)),
    20e9: ((9, 2.1), (10, 2), (9, 2.6), (10, 2.5), (9, 3.1), (10, 3.1)),
    40e9: ((9, 2.1), (10, 2), (9, 2.6), (10, 2.5), (9, 3.1), (10, 3.1)),
}

GRID_SCREEN_CONFIG = DiscretizationConfig(n_points=2**18)


@dataclass(frozen=True)
class GridSpec:
    mu_values: tuple[float, ...] = tuple(np.arange(8.0, 12.01, 0.5).round(10))
    sigma_values: tuple[float, ...] = tuple(np.arange(1.0, 4.01, 0.5).round(10))
    lambda_values: tuple[float, ...] = (100, 500, 1000, 5000, 10000)
    replications: int = 100
    seed: int = 0
    years: int = LC_WINDOW_YEARS
    floor: float = COLLECTION_FLOOR
    bic_sampling: str = "replication"
    schedule: BicSchedule = DEFAULT_SCHEDULE

    def __post_init__(self):
        if self.replications < 2:
            raise InputError("need at least 2 replications")
        if self.bic_sampling not in ("replication", "bank"):
            raise InputError(f"bic_sampling must be 'replication' or 'bank', got {self.bic_sampling!r}")
        if not (self.mu_values and self.sigma_values and self.lambda_values):
            raise InputError("grid lists must be non-empty")

    def combinations(self) -> list[tuple[float, float, float]]:
        return list(itertools.product(self.mu_values, self.sigma_values, self.lambda_values))


@dataclass(frozen=True)
class ConditionReport:
    cond_a: bool
    cond_b: bool
    cond_c: bool
    ama_999: float
    expected_lc: float
    median_bi: float
    freq_20k_per_bi_bn: float

    @property
    def passed(self) -> bool:
        return self.cond_a and self.cond_b and self.cond_c


@dataclass(frozen=True)
class ReplicationRecord:
    sim_lc: float
    sampled_bic: float
    sma: float
    sla: float
    fit: FitResult | None
    seed_path: str
    n_losses: int = 0
    failure: str = ""

    @property
    def fit_ok(self) -> bool:
        return self.fit is not None and self.fit.converged and math.isfinite(self.sla)


@dataclass
class CombinationResult:
    index: int
    mu: float
    sigma: float
    lam: float
    report: ConditionReport
    cov_sma: float = math.nan
    cov_sla: float = math.nan
    mean_sma: float = math.nan
    mean_sla: float = math.nan
    n_failed_fits: int = 0
    records: list[ReplicationRecord] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.report.passed


@dataclass
class GridStudyResult:
    spec: GridSpec
    combinations: list[CombinationResult]

    @property
    def n_screened(self) -> int:
        return len(self.combinations)

    @property
    def passing(self) -> list[CombinationResult]:
        return [c for c in self.combinations if c.passed]

    @property
    def n_passed(self) -> int:
        return len(self.passing)

    def share_sma_more_variable(self) -> float:
        rows = [c for c in self.passing if math.isfinite(c.cov_sla)]
        if not rows:
            return math.nan
        return sum(c.cov_sma > c.cov_sla for c in rows) / len(rows)

    def census(self) -> dict:
        cs = self.combinations
        return {
            "screened": self.n_screened,
            "passed": self.n_passed,
            "cond_a": sum(c.report.cond_a for c in cs),
            "cond_b": sum(c.report.cond_b for c in cs),
            "cond_c": sum(c.report.cond_c for c in cs),
            "failed_fits": sum(c.n_failed_fits for c in self.passing),
        }


@dataclass(frozen=True)
class Table2Row:
    bi: float
    bic: float
    mu: float
    sigma: float
    quantile_label: str
    lc: float
    lam: float
    alpha_star: float
    el: float
    sma: float
    var999: float
    sma_over_var: float
    nines: float
    cond_c_pass: bool


@dataclass(frozen=True)
class VarElFit:
    slope: float
    intercepts: dict[float, float]
    gap: float

    @property
    def ratio(self) -> float:
        return math.exp(self.gap)


def replication_rng(seed: int, combo: int, rep: int) -> np.random.Generator:
    return np.random.default_rng([seed, combo, rep])


def check_conditions(
    model: CompoundModel,
    params: RegressionParams = DEFAULT_PARAMS,
    cfg: DiscretizationConfig | None = None,
    floor: float = COLLECTION_FLOOR,
    schedule: BicSchedule = DEFAULT_SCHEDULE,
) -> ConditionReport:
    """Screen a parameter set for realism.

    ``model`` describes all losses; the expected LC and the loss frequency
    above 20k are computed for the losses that survive the collection floor.
    The AMA capital is the FFT 99.9% quantile of the true model.
    """
    cfg = cfg or GRID_SCREEN_CONFIG
    ama = aggregate_fft(model, cfg, p=AMA_LEVEL).var_quantile(AMA_LEVEL)
    elc = expected_lc(model.thinned(floor))
    try:
        median_bi = median_bi_from_bic(median_bic(elc, params), schedule)
    except InputError:
        median_bi = math.nan
    freq20 = frequency_above(model, max(FREQ_THRESHOLD, model.severity.truncation))
    ratio = freq20 / (median_bi / 1e9) if median_bi > 0 else math.nan
    return ConditionReport(
        cond_a=AMA_BOUNDS[0] < ama < AMA_BOUNDS[1],
        cond_b=ELC_BOUNDS[0] < elc < ELC_BOUNDS[1],
        cond_c=bool(ratio > MIN_FREQ_PER_BI_BN),
        ama_999=ama,
        expected_lc=elc,
        median_bi=median_bi,
        freq_20k_per_bi_bn=ratio,
    )


def run_replication(
    model: CompoundModel,
    params: RegressionParams,
    rng: np.random.Generator,
    *,
    expected_lc_value: float | None = None,
    bic: float | None = None,
    years: int = LC_WINDOW_YEARS,
    floor: float = COLLECTION_FLOOR,
    p: float = AMA_LEVEL,
    seed_path: str = "",
    schedule: BicSchedule = DEFAULT_SCHEDULE,
) -> ReplicationRecord:
    """One bank-history draw: LC, sampled BIC, SMA, and the refitted SLA capital.

    ``bic`` skips the regression draw (used when BIC is sampled once per bank).
    """
    counts = rng.poisson(model.lam, years)
    amounts = model.severity.sample(rng, int(counts.sum()))
    history = LossHistory.from_arrays(
        amounts, np.repeat(np.arange(years), counts), window_years=years, floor=floor
    )
    lc = compute_lc(history)
    if bic is None:
        elc = expected_lc(model.thinned(floor)) if expected_lc_value is None else expected_lc_value
        bic = sample_bic(elc, params, rng)
    sma = compute_sma(median_bi_from_bic(bic, schedule), bic, lc)

    fit, sla, failure = None, math.nan, ""
    try:
        fit = fit_truncated_lognormal(history.amounts, floor, years=years)
        sla = sla_capital(fit.severity, fit.lambda_hat, p)
    except ConvergenceError as err:
        fit, failure = err.best, f"convergence: {err}"
    except (InsufficientDataError, SlaUndefinedError) as err:
        failure = f"{type(err).__name__}: {err}"
    return ReplicationRecord(
        sim_lc=lc,
        sampled_bic=bic,
        sma=sma,
        sla=sla,
        fit=fit,
        seed_path=seed_path,
        n_losses=len(history),
        failure=failure,
    )


def _cov(values) -> float:
    v = np.asarray(values, dtype=float)
    if v.size < 2 or v.mean() == 0:
        return math.nan
    return float(v.std(ddof=1) / v.mean())


def _run_combination(args) -> CombinationResult:
    index, (mu, sigma, lam), spec, params, cfg, keep_records = args
    model = CompoundModel(SeverityModel(mu, sigma), lam)
    report = check_conditions(model, params, cfg, spec.floor, spec.schedule)
    out = CombinationResult(index=index, mu=mu, sigma=sigma, lam=lam, report=report)
    if not report.passed:
        return out
    bank_bic = None
    if spec.bic_sampling == "bank":
        bank_bic = sample_bic(report.expected_lc, params, replication_rng(spec.seed, index, spec.replications))
    records = [
        run_replication(
            model,
            params,
            replication_rng(spec.seed, index, r),
            expected_lc_value=report.expected_lc,
            bic=bank_bic,
            years=spec.years,
            floor=spec.floor,
            seed_path=f"{spec.seed}/{index}/{r}",
            schedule=spec.schedule,
        )
        for r in range(spec.replications)
    ]
    ok = [r for r in records if r.fit_ok]
    out.cov_sma = _cov([r.sma for r in records])
    out.mean_sma = float(np.mean([r.sma for r in records]))
    out.n_failed_fits = len(records) - len(ok)
    if len(ok) >= 2:
        out.cov_sla = _cov([r.sla for r in ok])
        out.mean_sla = float(np.mean([r.sla for r in ok]))
    if keep_records:
        out.records = records
    return out


def grid_study(
    spec: GridSpec,
    params: RegressionParams = DEFAULT_PARAMS,
    cfg: DiscretizationConfig | None = None,
    workers: int = 1,
    keep_records: bool = False,
) -> GridStudyResult:
    cfg = cfg or GRID_SCREEN_CONFIG
    tasks = [
        (i, combo, spec, params, cfg, keep_records) for i, combo in enumerate(spec.combinations())
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_combination, tasks, chunksize=4))
    else:
        results = []
        for t in tasks:
            results.append(_run_combination(t))
            log.debug("combination %d done", t[0])
    return GridStudyResult(spec=spec, combinations=results)


def table2_row(
    bi: float,
    mu: float,
    sigma: float,
    label: str,
    params: RegressionParams = DEFAULT_PARAMS,
    cfg: DiscretizationConfig | None = None,
    floor: float = COLLECTION_FLOOR,
    p: float = AMA_LEVEL,
    schedule: BicSchedule = DEFAULT_SCHEDULE,
) -> Table2Row:
    bic = compute_bic(bi, schedule)
    sev = SeverityModel(mu, sigma, floor)
    a_star = alpha_star_analytic(sev)
    lc = lc_quantile_given_bic(bic, QUANTILE_LABELS[label], params)
    el = lc / a_star
    model = CompoundModel(sev, lambda_from_el(sev, el))
    sma = compute_sma(bi, bic, lc)
    # the grid must also cover the SMA to read off its confidence level
    agg = aggregate_fft(model, cfg, p=p, min_span=2.0 * sma)
    var = agg.var_quantile(p)
    freq20 = frequency_above(model, max(FREQ_THRESHOLD, floor))
    return Table2Row(
        bi=bi,
        bic=bic,
        mu=mu,
        sigma=sigma,
        quantile_label=label,
        lc=lc,
        lam=model.lam,
        alpha_star=a_star,
        el=el,
        sma=sma,
        var999=var,
        sma_over_var=sma / var,
        nines=agg.nines_at(sma),
        cond_c_pass=freq20 / (bi / 1e9) > MIN_FREQ_PER_BI_BN,
    )


def table2_study(
    bi_values=(8e9, 20e9, 40e9),
    design: dict | None = None,
    params: RegressionParams = DEFAULT_PARAMS,
    cfg: DiscretizationConfig | None = None,
    floor: float = COLLECTION_FLOOR,
    schedule: BicSchedule = DEFAULT_SCHEDULE,
) -> list[Table2Row]:
    """Rows of the SMA-versus-VaR comparison, in BI, (mu, sigma), quantile order."""
    design = design or TABLE2_DESIGN
    return [
        table2_row(bi, mu, sigma, label, params, cfg, floor, schedule=schedule)
        for bi in bi_values
        for mu, sigma in design[bi]
        for label in QUANTILE_LABELS
    ]


def alpha_group(value: float) -> float:
    return round(value, 1)


def var_el_regression(rows: list[Table2Row]) -> VarElFit:
    """ln VaR on ln EL with a slope shared by all risk-factor groups."""
    groups = sorted({alpha_group(r.alpha_star) for r in rows})
    for g in groups:
        if sum(alpha_group(r.alpha_star) == g for r in rows) < 2:
            raise InputError(f"risk-factor group {g} has fewer than 2 rows")
    x = np.zeros((len(rows), 1 + len(groups)))
    y = np.empty(len(rows))
    for i, r in enumerate(rows):
        x[i, 0] = math.log(r.el)
        x[i, 1 + groups.index(alpha_group(r.alpha_star))] = 1.0
        y[i] = math.log(r.var999)
    coef, _, rank, _ = np.linalg.lstsq(x, y, rcond=None)
    if rank < x.shape[1]:
        raise InputError("singular design in the VaR/EL regression")
    intercepts = {g: float(coef[1 + j]) for j, g in enumerate(groups)}
    return VarElFit(
        slope=float(coef[0]),
        intercepts=intercepts,
        gap=intercepts[groups[-1]] - intercepts[groups[0]],
    )


__all__ = [
    "AMA_LEVEL",
    "ConditionReport",
    "GridSpec",
    "GridStudyResult",
    "ReplicationRecord",
    "Table2Row",
    "TABLE2_DESIGN",
    "VarElFit",
    "check_conditions",
    "grid_study",
    "run_replication",
    "table2_row",
    "table2_study",
    "var_el_regression",
]
