"""Loss-data ingestion, config loading and CSV / metadata emission."""
from __future__ import annotations

import csv
import json
import math
import platform
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy
import yaml

from sma_lda.errors import InputError
from sma_lda.experiments import alpha_group
from sma_lda.sma_core import COLLECTION_FLOOR, LC_WINDOW_YEARS, BankProfile, LossHistory

SCHEMA_VERSION = "1"
LOSS_HEADER = ("year", "amount_eur")


def read_loss_csv(
    path,
    window_years: int | None = None,
    floor: float = COLLECTION_FLOOR,
) -> LossHistory:
    """Read a ``year,amount_eur`` CSV into a floored :class:`LossHistory`.

    The window defaults to 10 years, or to the observed year span if that is
    longer (which then fails the history's window check).
    """
    years, amounts = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return LossHistory.from_arrays([], [], window_years or LC_WINDOW_YEARS, floor)
        if tuple(h.strip() for h in header) != LOSS_HEADER:
            raise InputError(f"{path}: line 1: expected header 'year,amount_eur', got {','.join(header)!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise InputError(f"{path}: line {lineno}: expected 2 fields, got {len(row)}")
            try:
                year = int(row[0])
                amount = float(row[1])
            except ValueError:
                raise InputError(f"{path}: line {lineno}: cannot parse {row!r}") from None
            if not (math.isfinite(amount) and amount > 0):
                raise InputError(f"{path}: line {lineno}: loss amount must be positive, got {row[1]}")
            years.append(year)
            amounts.append(amount)
    return LossHistory.from_arrays(amounts, years, window_years or LC_WINDOW_YEARS, floor)


def load_yaml(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise InputError(f"{path}: top level must be a mapping")
    return data


def load_profile(path) -> BankProfile:
    data = load_yaml(path)
    return BankProfile.from_mapping(data.get("profile", data))


def bn(x: float) -> str:
    """EUR amount as billions with 3 decimals."""
    return "" if x is None or not math.isfinite(x) else f"{x / 1e9:.3f}"


def raw(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return "nan" if math.isnan(x) else repr(x)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(r)
    return path


def versions() -> dict:
    from sma_lda import __version__

    return {
        "sma_lda": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def write_metadata(path, meta: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = {"schema_version": SCHEMA_VERSION, "versions": versions(), **meta}
    path.write_text(json.dumps(body, indent=2, sort_keys=True, default=_jsonable) + "\n", encoding="utf-8")
    return path


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


# ---- table layouts -------------------------------------------------------

SMA_HEADER = (
    "bi_bn", "bic_bn", "lc_bn", "alpha_star", "el_bn", "sma_bn",
    "bi_eur", "bic_eur", "lc_eur", "el_eur", "sma_eur", "short_window",
)

LDA_HEADER = (
    "mu", "sigma", "lambda", "truncation_eur", "p", "var_bn", "sla_bn",
    "var_eur", "sla_eur", "x_eur", "cdf_at_x", "nines_at_x",
)

TABLE2_HEADER = (
    "bi_bn", "bic_bn", "mu", "sigma", "quantile", "lc_bn", "lambda", "alpha_star",
    "el_bn", "sma_bn", "var_bn", "sma_over_var", "nines", "cond_c_pass",
    "lc_eur", "el_eur", "sma_eur", "var_eur",
)

GRID_HEADER = (
    "index", "mu", "sigma", "lambda", "cond_a", "cond_b", "cond_c", "passed",
    "ama999_eur", "expected_lc_eur", "median_bi_eur", "freq20k_per_bi_bn",
    "cov_sma", "cov_sla", "mean_sma_eur", "mean_sla_eur", "n_failed_fits",
)

REPLICATION_HEADER = (
    "index", "replication", "seed_path", "n_losses", "sim_lc_eur", "sampled_bic_eur",
    "sma_eur", "sla_eur", "mu_hat", "sigma_hat", "lambda_hat", "converged", "failure",
)

FIG2_HEADER = ("lc_over_bic", "sma_over_el_alpha7", "sma_over_el_alpha19")
FIG3_HEADER = ("el_over_bic", "sma_ratio_19_over_7")
FIG6_HEADER = ("expected_lc_bn", "cov_sma", "cov_sla", "mu", "sigma", "lambda", "expected_lc_eur")
FIG7_HEADER = ("bi_bn", "mu", "sigma", "alpha_star", "nines_low", "nines_median", "nines_high")
FIG8_HEADER = ("alpha_group", "el_bn", "var_bn", "ln_el", "ln_var", "fitted_ln_var")


def sma_rows(b) -> list:
    return [[
        bn(b.bi), bn(b.bic), bn(b.lc),
        "" if b.alpha_star is None else f"{b.alpha_star:.4f}",
        bn(b.el), bn(b.sma),
        raw(b.bi), raw(b.bic), raw(b.lc), raw(b.el), raw(b.sma), raw(b.short_window),
    ]]


def table2_rows(rows) -> list:
    return [
        [
            f"{r.bi / 1e9:g}", bn(r.bic), f"{r.mu:g}", f"{r.sigma:g}", r.quantile_label,
            bn(r.lc), f"{r.lam:.0f}", f"{r.alpha_star:.1f}", bn(r.el), bn(r.sma),
            bn(r.var999), f"{r.sma_over_var:.1f}", f"{r.nines:.1f}", raw(r.cond_c_pass),
            raw(r.lc), raw(r.el), raw(r.sma), raw(r.var999),
        ]
        for r in rows
    ]


def grid_rows(result) -> list:
    out = []
    for c in result.combinations:
        rep = c.report
        out.append([
            c.index, f"{c.mu:g}", f"{c.sigma:g}", f"{c.lam:g}",
            raw(rep.cond_a), raw(rep.cond_b), raw(rep.cond_c), raw(c.passed),
            raw(rep.ama_999), raw(rep.expected_lc), raw(rep.median_bi), raw(rep.freq_20k_per_bi_bn),
            raw(c.cov_sma), raw(c.cov_sla), raw(c.mean_sma), raw(c.mean_sla), c.n_failed_fits,
        ])
    return out


def replication_rows(result) -> list:
    out = []
    for c in result.combinations:
        for i, r in enumerate(c.records):
            f = r.fit
            out.append([
                c.index, i, r.seed_path, r.n_losses, raw(r.sim_lc), raw(r.sampled_bic),
                raw(r.sma), raw(r.sla),
                raw(f.mu_hat if f else None), raw(f.sigma_hat if f else None),
                raw(f.lambda_hat if f else None), raw(bool(f and f.converged)), r.failure,
            ])
    return out


def fig6_rows(result) -> list:
    return [
        [bn(c.report.expected_lc), raw(c.cov_sma), raw(c.cov_sla), f"{c.mu:g}", f"{c.sigma:g}",
         f"{c.lam:g}", raw(c.report.expected_lc)]
        for c in result.passing
    ]


def fig7_rows(rows) -> list:
    blocks: dict = {}
    for r in rows:
        blocks.setdefault((r.bi, r.mu, r.sigma), {})[r.quantile_label] = r
    out = []
    for (bi, mu, sigma), by_label in blocks.items():
        a = next(iter(by_label.values())).alpha_star
        out.append([
            f"{bi / 1e9:g}", f"{mu:g}", f"{sigma:g}", f"{a:.1f}",
            *(f"{by_label[k].nines:.4f}" if k in by_label else "" for k in ("low", "median", "high")),
        ])
    return out


def fig8_rows(rows, fit) -> list:
    out = []
    for r in rows:
        g = alpha_group(r.alpha_star)
        ln_el = math.log(r.el)
        out.append([
            f"{g:.1f}", bn(r.el), bn(r.var999), f"{ln_el:.6f}", f"{math.log(r.var999):.6f}",
            f"{fit.intercepts[g] + fit.slope * ln_el:.6f}",
        ])
    return out
