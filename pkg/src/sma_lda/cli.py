"""Command-line entry point: ``sma-lda {sma,lda,grid,table2,curves}``.

Settings come from an optional YAML config (``--config``); command-line flags
override it. The default output directory is taken from ``SMA_LDA_OUTPUT_DIR``
and falls back to ``./out``.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from sma_lda import reporting as rep
from sma_lda.aggregate import DiscretizationConfig, aggregate_fft, number_of_nines, sla_capital
from sma_lda.calibration import OPTIMIZER_SETTINGS
from sma_lda.errors import InputError, ResolutionError, SlaUndefinedError
from sma_lda.experiments import (
    GRID_SCREEN_CONFIG,
    GridSpec,
    grid_study,
    table2_study,
    var_el_regression,
)
from sma_lda.regression import RegressionParams
from sma_lda.severity import CompoundModel, SeverityModel
from sma_lda.sma_core import BicSchedule, alpha_ratio_curve, sma_breakdown, sma_el_curve

log = logging.getLogger("sma_lda")

MODES = ("sma", "lda", "grid", "table2", "curves")
STOCHASTIC_MODES = ("grid",)
OUTPUT_ENV = "SMA_LDA_OUTPUT_DIR"


@dataclass
class RunConfig:
    mode: str
    output_dir: Path
    seed: int | None = None
    losses: Path | None = None
    profile: Path | None = None
    discretization: dict = field(default_factory=dict)
    regression: RegressionParams = field(default_factory=RegressionParams)
    schedule: BicSchedule = field(default_factory=BicSchedule)
    grid: dict = field(default_factory=dict)
    lda: dict = field(default_factory=dict)
    workers: int = 1
    keep_records: bool = False

    def validate(self) -> None:
        if self.mode not in MODES:
            raise InputError(f"unknown mode {self.mode!r}")
        if self.mode in STOCHASTIC_MODES and self.seed is None:
            raise InputError(f"mode {self.mode!r} needs a seed (--seed or 'seed:' in the config)")
        if self.mode == "sma" and (self.losses is None or self.profile is None):
            raise InputError("mode 'sma' needs --losses and --profile")
        if self.mode == "lda":
            missing = [k for k in ("mu", "sigma", "lam") if self.lda.get(k) is None]
            if missing:
                raise InputError(f"mode 'lda' is missing {', '.join(missing)}")

    def discretization_config(self, default: DiscretizationConfig | None = None) -> DiscretizationConfig:
        base = default or DiscretizationConfig()
        return dataclasses.replace(base, **self.discretization)


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML run config")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--seed", type=int)
    common.add_argument("--points", type=int, help="FFT grid points (power of two)")
    common.add_argument("--span-mult", type=float, help="grid span as a multiple of the quantile estimate")
    common.add_argument("--tilt", type=float, help="total exponential tilt across the grid")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="sma-lda", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="mode", required=True)

    s = sub.add_parser("sma", parents=[common], help="SMA capital from a loss CSV and a bank profile")
    s.add_argument("--losses", type=Path)
    s.add_argument("--profile", type=Path)
    s.add_argument("--window-years", type=int)

    s = sub.add_parser("lda", parents=[common], help="VaR, SLA and #9's of a compound Poisson-lognormal model")
    s.add_argument("--mu", type=float)
    s.add_argument("--sigma", type=float)
    s.add_argument("--lam", type=float, help="Poisson frequency of losses above the truncation")
    s.add_argument("--truncation", type=float)
    s.add_argument("-p", "--level", type=float, dest="p")
    s.add_argument("-x", "--capital", type=float, dest="x", help="capital level for cdf / #9's")

    s = sub.add_parser("grid", parents=[common], help="parameter-grid capital variability study")
    s.add_argument("--replications", type=int)
    s.add_argument("--lambdas", type=float, nargs="+", help="override the frequency grid")
    s.add_argument("--workers", type=int)
    s.add_argument("--records", action="store_true", help="also write per-replication rows")

    sub.add_parser("table2", parents=[common], help="SMA versus FFT VaR at BI 8/20/40bn")
    sub.add_parser("curves", parents=[common], help="SMA/EL and risk-factor ratio curves")
    return p


def build_run_config(args: argparse.Namespace) -> RunConfig:
    cfg = rep.load_yaml(args.config) if args.config else {}
    if cfg.get("mode") not in (None, args.mode):
        raise InputError(f"config mode {cfg['mode']!r} does not match command {args.mode!r}")
    out = args.out or cfg.get("output_dir") or os.environ.get(OUTPUT_ENV) or "out"
    disc = dict(cfg.get("discretization") or {})
    for flag, key in (("points", "n_points"), ("span_mult", "span_mult"), ("tilt", "tilt")):
        if getattr(args, flag, None) is not None:
            disc[key] = getattr(args, flag)
    grid = dict(cfg.get("grid") or {})
    if getattr(args, "replications", None) is not None:
        grid["replications"] = args.replications
    if getattr(args, "lambdas", None):
        grid["lambda_values"] = args.lambdas
    lda = dict(cfg.get("lda") or {})
    for key in ("mu", "sigma", "lam", "truncation", "p", "x"):
        if getattr(args, key, None) is not None:
            lda[key] = getattr(args, key)
    run = RunConfig(
        mode=args.mode,
        output_dir=Path(out),
        seed=args.seed if args.seed is not None else cfg.get("seed"),
        losses=getattr(args, "losses", None) or (Path(cfg["losses"]) if cfg.get("losses") else None),
        profile=getattr(args, "profile", None) or (Path(cfg["profile"]) if cfg.get("profile") else None),
        discretization=disc,
        regression=RegressionParams.from_mapping(cfg.get("regression")),
        schedule=BicSchedule.from_mapping(cfg.get("bic_schedule")),
        grid=grid,
        lda=lda,
        workers=getattr(args, "workers", None) or int(cfg.get("workers", 1)),
        keep_records=bool(getattr(args, "records", False) or cfg.get("records", False)),
    )
    if getattr(args, "window_years", None) is not None:
        run.lda["window_years"] = args.window_years
    run.validate()
    return run


def cmd_sma(run: RunConfig) -> int:
    history = rep.read_loss_csv(run.losses, window_years=run.lda.get("window_years"))
    b = sma_breakdown(rep.load_profile(run.profile), history, run.schedule)
    path = rep.write_csv(run.output_dir / "sma.csv", rep.SMA_HEADER, rep.sma_rows(b))
    a = "n/a" if b.alpha_star is None else f"{b.alpha_star:.3f}"
    print(f"BI   {rep.bn(b.bi)} bn")
    print(f"BIC  {rep.bn(b.bic)} bn")
    print(f"LC   {rep.bn(b.lc)} bn   (alpha* {a}, EL {rep.bn(b.el)} bn/yr)")
    print(f"SMA  {rep.bn(b.sma)} bn")
    if history.n_below_floor:
        print(f"note: {history.n_below_floor} losses below the 10k collection floor were dropped")
    for w in b.warnings:
        print(f"warning: {w}")
    print(f"wrote {path}")
    return 0


def cmd_lda(run: RunConfig) -> int:
    d = run.lda
    p = float(d.get("p", 0.999))
    sev = SeverityModel(float(d["mu"]), float(d["sigma"]), float(d.get("truncation", 10_000.0)))
    model = CompoundModel(sev, float(d["lam"]))
    x = d.get("x")
    cfg = run.discretization_config()
    try:
        agg = aggregate_fft(model, cfg, p=p, min_span=2.0 * float(x) if x else 0.0)
    except ResolutionError as err:
        print(f"error: {err} (retry with a larger --span-mult or --points)", file=sys.stderr)
        return 3
    var = agg.var_quantile(p)
    try:
        sla = sla_capital(sev, model.lam, p)
    except SlaUndefinedError:
        sla = math.nan
    print(f"VaR({p})  {rep.bn(var)} bn")
    print(f"SLA({p})  {rep.bn(sla) or 'undefined'} bn")
    cdf_x = nines_x = None
    if x is not None:
        cdf_x = agg.cdf_at(float(x))
        nines_x = number_of_nines(cdf_x)
        print(f"F_A({float(x):.6g}) = {cdf_x:.10f}   #9's = {nines_x:.3f}")
    row = [
        f"{sev.mu:g}", f"{sev.sigma:g}", rep.raw(model.lam), rep.raw(sev.truncation), rep.raw(p),
        rep.bn(var), rep.bn(sla), rep.raw(var), rep.raw(sla), rep.raw(x), rep.raw(cdf_x), rep.raw(nines_x),
    ]
    rep.write_csv(run.output_dir / "lda.csv", rep.LDA_HEADER, [row])
    rep.write_metadata(run.output_dir / "run_metadata.json", {
        "mode": "lda", "discretization": cfg.as_dict(), "grid_step": agg.grid_step,
        "span": agg.span, "overflow": agg.overflow,
    })
    return 0


def cmd_grid(run: RunConfig) -> int:
    spec = GridSpec(seed=int(run.seed), schedule=run.schedule, **{k: (tuple(v) if isinstance(v, list) else v) for k, v in run.grid.items()})
    cfg = run.discretization_config(GRID_SCREEN_CONFIG)
    t0 = time.perf_counter()
    result = grid_study(spec, run.regression, cfg, workers=run.workers, keep_records=run.keep_records)
    out = run.output_dir
    rep.write_csv(out / "grid.csv", rep.GRID_HEADER, rep.grid_rows(result))
    rep.write_csv(out / "fig6.csv", rep.FIG6_HEADER, rep.fig6_rows(result))
    if run.keep_records:
        rep.write_csv(out / "replications.csv", rep.REPLICATION_HEADER, rep.replication_rows(result))
    census = result.census()
    share = result.share_sma_more_variable()
    rep.write_metadata(out / "run_metadata.json", {
        "mode": "grid",
        "seed": spec.seed,
        "grid": dataclasses.asdict(spec),
        "discretization": cfg.as_dict(),
        "regression": dataclasses.asdict(run.regression),
        "optimizer": OPTIMIZER_SETTINGS,
        "census": census,
        "share_cov_sma_above_cov_sla": share,
    })
    print(f"screened {census['screened']}, passed {census['passed']} "
          f"(A {census['cond_a']}, B {census['cond_b']}, C {census['cond_c']})")
    print(f"CoV(SMA) > CoV(SLA) in {share:.1%} of passing combinations; "
          f"{census['failed_fits']} failed fits; {time.perf_counter() - t0:.1f}s")
    return 0


def cmd_table2(run: RunConfig) -> int:
    cfg = run.discretization_config()
    rows = table2_study(params=run.regression, cfg=cfg, schedule=run.schedule)
    fit = var_el_regression(rows)
    out = run.output_dir
    rep.write_csv(out / "table2.csv", rep.TABLE2_HEADER, rep.table2_rows(rows))
    rep.write_csv(out / "fig7.csv", rep.FIG7_HEADER, rep.fig7_rows(rows))
    rep.write_csv(out / "fig8.csv", rep.FIG8_HEADER, rep.fig8_rows(rows, fit))
    rep.write_metadata(out / "run_metadata.json", {
        "mode": "table2",
        "bic_schedule": dataclasses.asdict(run.schedule),
        "discretization": cfg.as_dict(),
        "regression": dataclasses.asdict(run.regression),
        "var_el_fit": {"slope": fit.slope, "intercepts": {f"{k:.1f}": v for k, v in fit.intercepts.items()},
                       "gap": fit.gap, "ratio": fit.ratio},
    })
    print(f"{len(rows)} rows written to {out / 'table2.csv'}")
    print(f"VaR/EL common slope {fit.slope:.3f}; intercept gap {fit.gap:.2f} (x{fit.ratio:.0f})")
    return 0


def cmd_curves(run: RunConfig) -> int:
    r = np.round(np.arange(0.1, 5.0001, 0.05), 10)
    u = np.round(np.arange(0.01, 2.0001, 0.01), 10)
    lo, hi = sma_el_curve(7, r), sma_el_curve(19, r)
    ratio = alpha_ratio_curve(u)
    out = run.output_dir
    rep.write_csv(out / "fig2.csv", rep.FIG2_HEADER,
                  [[f"{a:g}", f"{b:.6f}", f"{c:.6f}"] for a, b, c in zip(r, lo, hi)])
    rep.write_csv(out / "fig3.csv", rep.FIG3_HEADER, [[f"{a:g}", f"{b:.6f}"] for a, b in zip(u, ratio)])
    rep.write_metadata(out / "run_metadata.json", {"mode": "curves", "form": "asymptotic (no 110m offset)"})
    k = int(np.argmax(ratio))
    print(f"SMA/EL at LC/BIC=0.5: {sma_el_curve(19, 0.5):.2f} (alpha*=19), {sma_el_curve(7, 0.5):.2f} (alpha*=7)")
    print(f"max SMA(19)/SMA(7) = {ratio[k]:.4f} at EL/BIC = {u[k]:g}")
    return 0


COMMANDS = {"sma": cmd_sma, "lda": cmd_lda, "grid": cmd_grid, "table2": cmd_table2, "curves": cmd_curves}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        run = build_run_config(args)
        return COMMANDS[run.mode](run)
    except (InputError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
