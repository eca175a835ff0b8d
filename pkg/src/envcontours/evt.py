"""Univariate peaks-over-threshold modelling.

Generalized Pareto tails fitted to storm maxima by maximum likelihood,
return levels, threshold diagnostics, and Gumbel fits for the normalized
20-min tension maxima of the meta-model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.optimize
import scipy.stats

XI_ZERO_TOL = 1e-9  # |xi| below this switches to the exponential branch


class EvtError(ValueError):
    pass


@dataclass
class GpdFit:
    threshold: float
    scale: float  # sigma > 0
    shape: float  # xi
    exceedance_rate: float  # lambda, events per year
    n_exceedances: int
    loglik: float

    def __post_init__(self):
        if self.scale <= 0:
            raise EvtError("GPD scale must be positive")

    @property
    def upper_endpoint(self) -> float:
        if self.shape < -XI_ZERO_TOL:
            return self.threshold - self.scale / self.shape
        return np.inf


@dataclass
class GumbelFit:
    mode: float  # mu
    scale: float  # beta > 0

    def __post_init__(self):
        if self.scale <= 0:
            raise EvtError("Gumbel scale must be positive")


def gpd_cdf(x, fit: GpdFit):
    """P(X <= x | X > u) for the fitted tail; requires x >= u."""
    x = np.asarray(x, dtype=float)
    if np.any(x < fit.threshold):
        raise EvtError("x below GPD threshold")
    z = (x - fit.threshold) / fit.scale
    if abs(fit.shape) < XI_ZERO_TOL:
        out = -np.expm1(-z)
    else:
        arg = np.maximum(fit.shape * z, -1.0)
        with np.errstate(divide="ignore"):
            out = -np.expm1(-np.log1p(arg) / fit.shape)
    return out if out.ndim else float(out)


def gpd_quantile(p, fit: GpdFit):
    """Inverse of :func:`gpd_cdf` on the fitted support."""
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p >= 1)):
        raise EvtError("probability must be in [0, 1)")
    if abs(fit.shape) < XI_ZERO_TOL:
        z = -np.log1p(-p)
    else:
        z = np.expm1(-fit.shape * np.log1p(-p)) / fit.shape
    out = fit.threshold + fit.scale * z
    return out if out.ndim else float(out)


def _gpd_negloglik(params, excesses):
    sigma, xi = params
    if sigma <= 0:
        return np.inf
    z = excesses / sigma
    if abs(xi) < XI_ZERO_TOL:
        return len(excesses) * np.log(sigma) + np.sum(z)
    arg = 1.0 + xi * z
    if np.any(arg <= 0):
        return np.inf
    return len(excesses) * np.log(sigma) + (1.0 + 1.0 / xi) * np.sum(np.log(arg))


def _gpd_grad(params, excesses):
    """Analytic gradient of the negative log-likelihood."""
    sigma, xi = params
    n = len(excesses)
    z = excesses / sigma
    if abs(xi) < XI_ZERO_TOL:
        return np.array([n / sigma - np.sum(excesses) / sigma**2, 0.0])
    arg = 1.0 + xi * z
    d_sigma = n / sigma - (1.0 + 1.0 / xi) * np.sum(xi * z / arg) / sigma
    d_xi = -np.sum(np.log(arg)) / xi**2 + (1.0 + 1.0 / xi) * np.sum(z / arg)
    return np.array([d_sigma, d_xi])


def fit_gpd_mle(excesses, threshold: float, rate: float) -> GpdFit:
    """Maximum-likelihood GPD fit to positive excesses over ``threshold``.

    Deterministic: simplex search from (mean excess, 0), Newton polish on the
    analytic gradient, and a profile fallback over the shape on failure.
    """
    excesses = np.asarray(excesses, dtype=float)
    if len(excesses) < 10:
        raise EvtError("need at least 10 exceedances")
    if np.any(excesses <= 0):
        raise EvtError("excesses must be positive")
    if np.ptp(excesses) == 0:
        raise EvtError("degenerate sample (all excesses identical)")

    start = np.array([np.mean(excesses), 0.0])
    res = scipy.optimize.minimize(
        _gpd_negloglik,
        start,
        args=(excesses,),
        method="Nelder-Mead",
        # loose tolerances: the Newton polish below drives the gradient to
        # machine zero, the simplex only needs the right basin
        options={"xatol": 1e-5, "fatol": 1e-7, "maxiter": 400},
    )
    best = res.x if res.success or np.isfinite(res.fun) else None
    if best is None or not np.isfinite(_gpd_negloglik(best, excesses)):
        best = _profile_fallback(excesses)
        if best is None:
            raise EvtError("GPD optimizer failed to converge")
    best = _newton_polish(best, excesses)
    sigma, xi = best
    nll = _gpd_negloglik(best, excesses)
    fit = GpdFit(
        threshold=threshold,
        scale=float(sigma),
        shape=float(xi),
        exceedance_rate=rate,
        n_exceedances=len(excesses),
        loglik=float(-nll),
    )
    if fit.shape < -XI_ZERO_TOL:
        # likelihood support guarantees this, up to rounding
        if fit.upper_endpoint < threshold + np.max(excesses) - 1e-8:
            raise EvtError("fitted upper endpoint below sample maximum")
    return fit


def _profile_fallback(excesses):
    best, best_val = None, np.inf
    for xi in np.linspace(-0.9, 0.9, 37):
        def nll_sigma(log_sigma):
            return _gpd_negloglik((np.exp(log_sigma), xi), excesses)

        r = scipy.optimize.minimize_scalar(
            nll_sigma, bounds=(-10, 15), method="bounded"
        )
        if r.fun < best_val:
            best_val = r.fun
            best = np.array([np.exp(r.x), xi])
    return best


def _newton_polish(params, excesses, max_iter=25):
    """Drive the gradient of the log-likelihood toward machine zero."""
    p = np.array(params, dtype=float)
    if abs(p[1]) < XI_ZERO_TOL:
        return p
    f0 = _gpd_negloglik(p, excesses)
    for _ in range(max_iter):
        g = _gpd_grad(p, excesses)
        if np.linalg.norm(g) < 1e-10:
            break
        h = np.empty((2, 2))
        eps = 1e-6 * np.maximum(np.abs(p), 1e-3)
        for j in range(2):
            dp = np.zeros(2)
            dp[j] = eps[j]
            h[:, j] = (_gpd_grad(p + dp, excesses) - _gpd_grad(p - dp, excesses)) / (
                2 * eps[j]
            )
        try:
            step = np.linalg.solve(h, g)
        except np.linalg.LinAlgError:
            break
        cand = p - step
        if _gpd_negloglik(cand, excesses) <= f0 + 1e-9:
            p = cand
            f0 = _gpd_negloglik(p, excesses)
        else:
            break
    return p


def return_level(fit: GpdFit, return_period: float) -> float:
    """Level exceeded on average once per ``return_period`` years."""
    if return_period <= 0:
        raise EvtError("return period must be positive")
    lt = fit.exceedance_rate * return_period
    if lt <= 1.0:
        raise EvtError("return period below threshold rate")
    if abs(fit.shape) < XI_ZERO_TOL:
        return fit.threshold + fit.scale * np.log(lt)
    return fit.threshold + fit.scale / fit.shape * (lt**fit.shape - 1.0)


def return_level_curve(
    fit: GpdFit,
    return_periods,
    n_bootstrap: int = 1000,
    seed: int = 0,
    excesses=None,
) -> list[dict]:
    """Return-level curve with nonparametric bootstrap confidence bands.

    Emitted as plain dict rows (T, level, ci_low, ci_high) for the plotting
    scripts.  ``excesses`` must be supplied for bootstrap bands.
    """
    rows = []
    boot_levels = None
    if excesses is not None:
        excesses = np.asarray(excesses, dtype=float)
        rng = np.random.default_rng(seed)
        boot_levels = np.full((n_bootstrap, len(return_periods)), np.nan)
        for b in range(n_bootstrap):
            resample = rng.choice(excesses, size=len(excesses), replace=True)
            try:
                bf = fit_gpd_mle(resample, fit.threshold, fit.exceedance_rate)
                boot_levels[b] = [return_level(bf, t) for t in return_periods]
            except EvtError:
                continue
    for k, t in enumerate(return_periods):
        row = {"T": float(t), "level": return_level(fit, t)}
        if boot_levels is not None:
            ok = boot_levels[:, k][np.isfinite(boot_levels[:, k])]
            row["ci_low"] = float(np.quantile(ok, 0.025))
            row["ci_high"] = float(np.quantile(ok, 0.975))
        rows.append(row)
    return rows


def threshold_diagnostics(
    events,
    thresholds,
    years: float,
    peak_years=None,
    n_bootstrap: int = 200,
    seed: int = 0,
) -> list[dict]:
    """Per-threshold diagnostics for threshold selection.

    ``events`` are storm maxima; ``peak_years`` (calendar year of each event)
    enables the dispersion index (variance/mean of annual exceedance counts).
    Grid points with fewer than 10 exceedances are marked unavailable.
    """
    events = np.asarray(events, dtype=float)
    rng = np.random.default_rng(seed)
    rows = []
    for u in np.asarray(thresholds, dtype=float):
        exc = events[events > u] - u
        row: dict = {"threshold": float(u), "n_exceedances": int(len(exc))}
        if len(exc) < 10:
            row["available"] = False
            rows.append(row)
            continue
        row["available"] = True
        row["mean_excess"] = float(np.mean(exc))
        fit = fit_gpd_mle(exc, u, len(exc) / years)
        # modified scale sigma* = sigma - xi*u is threshold-stable
        row["scale"] = fit.scale
        row["modified_scale"] = fit.scale - fit.shape * u
        row["shape"] = fit.shape
        boot = np.full((n_bootstrap, 2), np.nan)
        for b in range(n_bootstrap):
            try:
                bf = fit_gpd_mle(
                    rng.choice(exc, size=len(exc), replace=True), u, fit.exceedance_rate
                )
                boot[b] = (bf.scale, bf.shape)
            except EvtError:
                continue
        ok = boot[np.isfinite(boot).all(axis=1)]
        if len(ok):
            row["scale_ci"] = [float(q) for q in np.quantile(ok[:, 0], [0.025, 0.975])]
            row["shape_ci"] = [float(q) for q in np.quantile(ok[:, 1], [0.025, 0.975])]
        if peak_years is not None:
            counts = np.bincount(np.asarray(peak_years)[events > u] - np.min(peak_years))
            mean = counts.mean()
            row["dispersion_index"] = float(counts.var(ddof=1) / mean) if mean > 0 else np.nan
        rows.append(row)
    return rows


def fit_gumbel(sample) -> GumbelFit:
    """Maximum-likelihood Gumbel fit (mode, scale) to normalized maxima."""
    sample = np.asarray(sample, dtype=float)
    if len(sample) < 10:
        raise EvtError("need at least 10 values")
    if np.ptp(sample) == 0:
        raise EvtError("degenerate sample")
    mu, beta = scipy.stats.gumbel_r.fit(sample)
    if not np.isfinite(mu) or not np.isfinite(beta) or beta <= 0:
        raise EvtError("Gumbel fit failed to converge")
    return GumbelFit(mode=float(mu), scale=float(beta))


def gumbel_quantile(fit: GumbelFit, p: float) -> float:
    if not 0.0 < p < 1.0:
        raise EvtError("probability must be in (0,1)")
    return fit.mode - fit.scale * np.log(-np.log(p))
