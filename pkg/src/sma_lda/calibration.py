"""Maximum-likelihood fit of a left-truncated lognormal severity and a Poisson rate.

The truncated log-likelihood depends on the data only through the count and
the mean and variance of the log amounts, so each evaluation is O(1) after a
single pass over the sample.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import log_ndtr

from sma_lda.errors import ConvergenceError, InputError, InsufficientDataError
from sma_lda.severity import SeverityModel

MIN_OBS = 10
GRAD_TOL = 1e-8
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

OPTIMIZER_SETTINGS = {
    "parameterization": "(mu, log sigma)",
    "optimizer": "BFGS + Newton polish",
    "grad_tol": GRAD_TOL,
    "restarts": 3,
}


@dataclass(frozen=True)
class FitResult:
    mu_hat: float
    sigma_hat: float
    lambda_hat: float | None
    n_obs: int
    converged: bool
    log_likelihood: float
    truncation: float = 0.0
    grad_norm: float = 0.0
    se_mu: float = math.nan
    se_sigma: float = math.nan

    @property
    def severity(self) -> SeverityModel:
        return SeverityModel(self.mu_hat, self.sigma_hat, self.truncation)


@dataclass(frozen=True)
class _LogStats:
    n: int
    mean: float
    var: float
    sum_log: float
    log_t: float  # -inf when untruncated


def _log_stats(amounts: np.ndarray, truncation: float) -> _LogStats:
    y = np.log(amounts)
    m = float(y.mean())
    return _LogStats(
        n=int(y.size),
        mean=m,
        var=float(np.mean((y - m) ** 2)),
        sum_log=float(y.sum()),
        log_t=math.log(truncation) if truncation > 0 else -math.inf,
    )


def _mills(zt: float) -> float:
    """phi(zt) / (1 - Phi(zt)), evaluated in log space."""
    if zt == -math.inf:
        return 0.0
    return math.exp(-0.5 * zt * zt - _LOG_SQRT_2PI - float(log_ndtr(-zt)))


def _terms(theta, st: _LogStats):
    mu, tau = float(theta[0]), float(theta[1])
    sigma = math.exp(tau)
    d = st.mean - mu
    m2 = (st.var + d * d) / (sigma * sigma)
    if st.log_t == -math.inf:
        zt, log_surv, q = -math.inf, 0.0, 0.0
    else:
        zt = (st.log_t - mu) / sigma
        log_surv = float(log_ndtr(-zt))
        q = _mills(zt)
    return mu, sigma, d, m2, zt, log_surv, q


def _mean_loglik(theta, st: _LogStats) -> float:
    _, _, _, m2, _, log_surv, _ = _terms(theta, st)
    return -0.5 * m2 - theta[1] - _LOG_SQRT_2PI - st.sum_log / st.n - log_surv


def _mean_grad(theta, st: _LogStats) -> np.ndarray:
    _, sigma, d, m2, zt, _, q = _terms(theta, st)
    zq = 0.0 if q == 0.0 else q * zt
    return np.array([d / sigma**2 - q / sigma, m2 - 1.0 - zq])


def _mean_hess(theta, st: _LogStats) -> np.ndarray:
    _, sigma, d, m2, zt, _, q = _terms(theta, st)
    if q == 0.0:
        dq, mix, zmix = 0.0, 0.0, 0.0
    else:
        dq = q * (q - zt)
        mix = dq * zt + q
        zmix = zt * mix
    h_mm = (-1.0 + dq) / sigma**2
    h_mt = -2.0 * d / sigma**2 + mix / sigma
    h_tt = -2.0 * m2 + zmix
    return np.array([[h_mm, h_mt], [h_mt, h_tt]])


def truncated_loglik(mu: float, sigma: float, amounts, truncation: float = 0.0) -> float:
    """Total log-likelihood of ``amounts`` under the truncated lognormal."""
    a = np.asarray(amounts, dtype=float)
    st = _log_stats(a, truncation)
    return st.n * _mean_loglik((mu, math.log(sigma)), st)


def truncated_loglik_grad(mu: float, log_sigma: float, amounts, truncation: float = 0.0) -> np.ndarray:
    """Gradient of the total log-likelihood with respect to (mu, log sigma)."""
    a = np.asarray(amounts, dtype=float)
    st = _log_stats(a, truncation)
    return st.n * _mean_grad((mu, log_sigma), st)


def _newton_polish(theta: np.ndarray, st: _LogStats, steps: int = 25) -> np.ndarray:
    for _ in range(steps):
        g = _mean_grad(theta, st)
        if np.linalg.norm(g) < GRAD_TOL * 1e-2:
            break
        hess = _mean_hess(theta, st)
        try:
            step = np.linalg.solve(hess, -g)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)) or np.dot(step, g) <= 0:
            break
        f0 = _mean_loglik(theta, st)
        t = 1.0
        while t > 1e-6:
            cand = theta + t * step
            if _mean_loglik(cand, st) >= f0 - 1e-15 * abs(f0):
                break
            t *= 0.5
        else:
            break
        theta = cand
    return theta


def _optimize(start: np.ndarray, st: _LogStats) -> np.ndarray:
    res = minimize(
        lambda th: (-_mean_loglik(th, st), -_mean_grad(th, st)),
        start,
        jac=True,
        method="BFGS",
        options={"gtol": GRAD_TOL * 1e-2, "maxiter": 500},
    )
    theta = np.asarray(res.x, dtype=float)
    if np.all(np.isfinite(theta)):
        theta = _newton_polish(theta, st)
    return theta


def _result(theta, st: _LogStats, truncation: float, years, converged: bool) -> FitResult:
    g = _mean_grad(theta, st)
    sigma = math.exp(theta[1])
    se_mu = se_sigma = math.nan
    try:
        cov = np.linalg.inv(-st.n * _mean_hess(theta, st))
        if cov[0, 0] > 0 and cov[1, 1] > 0:
            se_mu = math.sqrt(cov[0, 0])
            se_sigma = sigma * math.sqrt(cov[1, 1])
    except np.linalg.LinAlgError:
        pass
    return FitResult(
        mu_hat=float(theta[0]),
        sigma_hat=sigma,
        lambda_hat=None if years is None else fit_poisson_rate(st.n, years),
        n_obs=st.n,
        converged=converged,
        log_likelihood=st.n * _mean_loglik(theta, st),
        truncation=truncation,
        grad_norm=float(np.linalg.norm(g)),
        se_mu=se_mu,
        se_sigma=se_sigma,
    )


def fit_truncated_lognormal(amounts, truncation: float = 0.0, years: float | None = None) -> FitResult:
    """MLE of (mu, sigma) for lognormal data observed only above ``truncation``.

    Starts from the moments of the log data, then from three perturbed starts
    if that run does not reach a gradient norm below ``GRAD_TOL``. Raises
    :class:`ConvergenceError` carrying the best iterate when all starts fail.
    If ``years`` is given the Poisson rate of the observations is filled in.
    """
    a = np.asarray(amounts, dtype=float).ravel()
    if a.size < MIN_OBS:
        raise InsufficientDataError(f"need at least {MIN_OBS} observations, got {a.size}")
    if np.any(~np.isfinite(a)) or np.any(a < truncation) or np.any(a <= 0):
        raise InputError("all observations must be finite, positive and >= the truncation point")
    st = _log_stats(a, truncation)
    if st.var <= 0 or math.sqrt(st.var) < 1e-12 * max(1.0, abs(st.mean)):
        raise ConvergenceError("degenerate sample: log amounts have zero variance")

    if truncation == 0:
        return _result(np.array([st.mean, 0.5 * math.log(st.var)]), st, truncation, years, True)

    sd = math.sqrt(st.var)
    base = np.array([st.mean, math.log(sd)])
    starts = [
        base,
        base + np.array([-sd, 0.5]),
        base + np.array([-2.0 * sd, 1.0]),
        base + np.array([0.5 * sd, -0.3]),
    ]
    best = None
    for start in starts:
        theta = _optimize(start, st)
        if not np.all(np.isfinite(theta)):
            continue
        fit = _result(theta, st, truncation, years, False)
        if fit.grad_norm < GRAD_TOL and math.isfinite(fit.log_likelihood):
            return _result(theta, st, truncation, years, True)
        if best is None or fit.log_likelihood > best.log_likelihood:
            best = fit
    raise ConvergenceError("truncated lognormal fit did not converge", best=best)


def fit_poisson_rate(n_obs: int, years: float) -> float:
    if not years > 0:
        raise InputError(f"observation period must be positive, got {years}")
    return n_obs / years
