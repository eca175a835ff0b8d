"""Joint-tail dependence models over semi-parametric margins.

Five variants share one fit/simulate interface: independence, perfect
dependence, tail-matched Nataf (Gaussian copula), symmetric logistic
extreme-value copula, and the conditional-extremes regression model.
Margins are empirical below the GPD threshold and GPD above, so simulated
cluster-maxima vectors cover the full physical range.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize
import scipy.stats

from .decluster import ClusterMaxima
from .evt import EvtError, GpdFit, fit_gpd_mle, gpd_cdf, gpd_quantile

MODEL_SCHEMA = "envcontours/dependence-model/1"
MARGINS_SCHEMA = "envcontours/margins/1"


class DependenceError(ValueError):
    pass


# --- semi-parametric margins ------------------------------------------------


@dataclass
class SemiParametricMargin:
    """Empirical cdf below the GPD threshold, fitted GPD tail above."""

    gpd: GpdFit
    body_values: np.ndarray  # sorted unique sample values
    body_probs: np.ndarray  # strictly increasing cdf values at body_values
    tail_fraction: float  # P(X > threshold) within the storm-peak sample

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        u = self.gpd.threshold
        below = np.interp(x, self.body_values, self.body_probs)
        above = np.where(
            x > u,
            1.0 - self.tail_fraction * (1.0 - _gpd_cdf_clipped(x, u, self.gpd)),
            0.0,
        )
        out = np.where(x > u, above, below)
        return out if out.ndim else float(out)

    def ppf(self, p):
        p = np.asarray(p, dtype=float)
        if np.any((p <= 0) | (p >= 1)):
            raise DependenceError("probability must be in (0,1)")
        split = 1.0 - self.tail_fraction
        body = np.interp(p, self.body_probs, self.body_values)
        tail_p = np.clip(1.0 - (1.0 - p) / self.tail_fraction, 0.0, 1.0 - 1e-16)
        tail = gpd_quantile(tail_p, self.gpd)
        out = np.where(p > split, tail, body)
        return out if out.ndim else float(out)


def _gpd_cdf_clipped(x, u, fit):
    return gpd_cdf(np.maximum(np.asarray(x, dtype=float), u), fit)


def fit_margin(
    values, years: float, threshold_quantile: float = 0.99, reference=None
) -> SemiParametricMargin:
    """Fit one semi-parametric margin to storm-peak values.

    The GPD threshold is the ``threshold_quantile`` quantile of ``reference``
    (e.g. the full hourly series, as used for threshold selection) when given,
    else of the storm peaks themselves.
    """
    values = np.asarray(values, dtype=float)
    values = values[np.isfinite(values)]
    base = np.asarray(reference, dtype=float) if reference is not None else values
    base = base[np.isfinite(base)]
    u = float(np.quantile(base, threshold_quantile))
    exc = values[values > u] - u
    if len(exc) < 10:
        raise DependenceError("fewer than 10 exceedances above the GPD threshold")
    gpd = fit_gpd_mle(exc, u, rate=len(exc) / years)

    srt = np.sort(values)
    probs = (np.arange(1, len(srt) + 1) - 0.5) / len(srt)
    vals, idx = np.unique(srt, return_index=True)
    # average plotting positions of duplicates to keep strict monotonicity
    probs = np.array([probs[i0:i1].mean() for i0, i1 in zip(idx, np.append(idx[1:], len(srt)))])
    tail_fraction = float(np.mean(values > u))
    # rescale body so the empirical cdf matches the tail split at u exactly
    split = 1.0 - tail_fraction
    at_u = np.interp(u, vals, probs)
    body = vals <= u
    body_probs = probs[body] * (split / at_u) if at_u > 0 else probs[body]
    body_vals = vals[body]
    # anchor both ends for invertible interpolation
    lo = body_vals[0] - max(1e-9, 0.01 * np.ptp(vals))
    body_vals = np.concatenate([[lo], body_vals, [u]])
    body_probs = np.concatenate([[1e-12], np.clip(body_probs, 1e-12, split), [split]])
    body_vals, keep = np.unique(body_vals, return_index=True)
    body_probs = np.maximum.accumulate(body_probs[keep])
    return SemiParametricMargin(
        gpd=gpd, body_values=body_vals, body_probs=body_probs, tail_fraction=tail_fraction
    )


@dataclass
class MarginalSet:
    variables: list[str]
    margins: list[SemiParametricMargin]
    events_per_year: float  # rate of the joint cluster-maxima sample

    @property
    def dim(self) -> int:
        return len(self.variables)

    def cdf_matrix(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.column_stack([m.cdf(x[:, j]) for j, m in enumerate(self.margins)])

    def ppf_matrix(self, u: np.ndarray) -> np.ndarray:
        u = np.atleast_2d(np.asarray(u, dtype=float))
        return np.column_stack([m.ppf(u[:, j]) for j, m in enumerate(self.margins)])


def fit_margins(
    events: ClusterMaxima,
    variables: list[str],
    threshold_quantile: float = 0.99,
    reference: dict | None = None,
) -> MarginalSet:
    margins = []
    for v in variables:
        ref = reference.get(v) if reference else None
        margins.append(
            fit_margin(events.column(v), events.years, threshold_quantile, ref)
        )
    return MarginalSet(
        variables=list(variables), margins=margins, events_per_year=events.events_per_year
    )


# --- Frechet transforms -----------------------------------------------------


def _event_matrix(events, margins: MarginalSet) -> np.ndarray:
    """Event vectors as columns aligned with ``margins.variables``.

    ClusterMaxima stores all dataset columns in dataset order, which need
    not match the modeled variable selection or order.
    """
    if isinstance(events, ClusterMaxima):
        return np.column_stack([events.column(v) for v in margins.variables])
    return np.asarray(events, dtype=float)


def frechet_from_uniform(u):
    return -1.0 / np.log(u)


def uniform_from_frechet(z):
    return np.exp(-1.0 / z)


def to_frechet(x: np.ndarray, margins: MarginalSet) -> np.ndarray:
    """Map physical vectors to unit-Frechet scale, Z = -1/log F(X)."""
    f = margins.cdf_matrix(x)
    if np.any((f <= 0.0) | (f >= 1.0)):
        raise DependenceError("marginal cdf hit 0 or 1; value outside modeled support")
    return frechet_from_uniform(f)


def from_frechet(z: np.ndarray, margins: MarginalSet) -> np.ndarray:
    return margins.ppf_matrix(uniform_from_frechet(np.asarray(z, dtype=float)))


# --- simulated events -------------------------------------------------------


@dataclass
class SimulatedEvents:
    values: np.ndarray  # (n, d) physical cluster-maxima vectors
    variables: list[str]
    events_per_year: float

    def __len__(self):
        return len(self.values)


# --- model variants ----------------------------------------------------------


@dataclass
class Independence:
    kind: str = field(default="independence", init=False)

    def copula_uniforms(self, d, n, rng):
        return rng.random((n, d))


@dataclass
class PerfectDependence:
    kind: str = field(default="perfect_dependence", init=False)

    def copula_uniforms(self, d, n, rng):
        u = rng.random(n)
        return np.repeat(u[:, None], d, axis=1)


@dataclass
class Nataf:
    corr: np.ndarray
    tail_quantile: float
    boundary_flags: list[str] = field(default_factory=list)
    projected: bool = False
    kind: str = field(default="nataf", init=False)

    def copula_uniforms(self, d, n, rng):
        chol = np.linalg.cholesky(self.corr)
        z = rng.standard_normal((n, d)) @ chol.T
        return scipy.stats.norm.cdf(z)


@dataclass
class Logistic:
    alpha: float
    censor_level: float
    boundary_flags: list[str] = field(default_factory=list)
    kind: str = field(default="logistic", init=False)

    def copula_uniforms(self, d, n, rng):
        if self.alpha >= 1.0 - 1e-12:
            return rng.random((n, d))
        z = sample_logistic_frechet(self.alpha, d, n, rng)
        return uniform_from_frechet(z)


@dataclass
class ConditionalExtremes:
    """Per conditioning variable i: regression of the others on Z_i."""

    nu: float  # Frechet-scale dependence threshold
    a: np.ndarray  # (d, d), a[i, j] for j != i
    b: np.ndarray
    res_mean: np.ndarray
    res_sd: np.ndarray
    residuals: list[np.ndarray]  # standardized residual rows per i, (n_i, d-1)
    partition_weights: np.ndarray  # empirical rate of each variable being the max
    tail_events_per_year: float
    gaussian_residuals: bool = False
    boundary_flags: list[str] = field(default_factory=list)
    kind: str = field(default="conditional_extremes", init=False)


DependenceModel = Independence | PerfectDependence | Nataf | Logistic | ConditionalExtremes


# --- Nataf fitting ------------------------------------------------------------


def _truncated_bvn_corr(rho: float, t: float, n_nodes: int = 96) -> float:
    """Correlation of a bivariate standard normal conditioned on both > t."""
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    hi = t + 9.0
    x = t + (nodes + 1.0) * (hi - t) / 2.0
    w = weights * (hi - t) / 2.0
    x1 = x[:, None]
    x2 = x[None, :]
    det = 1.0 - rho * rho
    dens = np.exp(-(x1**2 - 2 * rho * x1 * x2 + x2**2) / (2 * det)) / (
        2 * np.pi * np.sqrt(det)
    )
    ww = w[:, None] * w[None, :]
    m00 = np.sum(dens * ww)
    if m00 <= 0:
        return np.nan
    m10 = np.sum(x1 * dens * ww) / m00
    m20 = np.sum(x1**2 * dens * ww) / m00
    m11 = np.sum(x1 * x2 * dens * ww) / m00
    var = m20 - m10**2
    return float((m11 - m10**2) / var)


def fit_nataf(
    events: ClusterMaxima | np.ndarray,
    margins: MarginalSet,
    tail_quantile: float = 0.99,
    min_joint: int = 30,
) -> Nataf:
    """Tail-matched Gaussian copula.

    For each pair, finds the Gaussian correlation whose conditional
    correlation above the ``tail_quantile`` normal threshold matches the
    empirical conditional correlation of the normal scores of the data.
    """
    x = _event_matrix(events, margins)
    f = margins.cdf_matrix(x)
    f = np.clip(f, 1e-12, 1.0 - 1e-12)
    y = scipy.stats.norm.ppf(f)
    t = scipy.stats.norm.ppf(tail_quantile)
    d = y.shape[1]
    corr = np.eye(d)
    flags = []
    for i in range(d):
        for j in range(i + 1, d):
            sel = (y[:, i] > t) & (y[:, j] > t)
            if sel.sum() < min_joint:
                raise DependenceError(
                    f"only {int(sel.sum())} joint tail points for pair ({i},{j}); "
                    f"need {min_joint}"
                )
            target = float(np.corrcoef(y[sel, i], y[sel, j])[0, 1])

            def gap(rho):
                return _truncated_bvn_corr(rho, t) - target

            # The implied conditional correlation is not monotone over all of
            # (-1, 1): it dips to a shallow minimum at a moderate negative rho
            # and rises again toward -1.  Invert on the increasing branch from
            # that minimum up to the bound, so near-zero noisy targets map to
            # modest correlations instead of the boundary.
            lo, hi = -0.995, 0.995
            branch = scipy.optimize.minimize_scalar(
                lambda r: _truncated_bvn_corr(r, t), bounds=(lo, 0.0), method="bounded"
            )
            lo = float(branch.x)
            if gap(hi) < 0:
                corr[i, j] = corr[j, i] = hi
                flags.append(f"pair ({i},{j}) at upper correlation bound")
                continue
            if gap(lo) > 0:
                corr[i, j] = corr[j, i] = lo
                flags.append(
                    f"pair ({i},{j}) target below attainable conditional correlation"
                )
                continue
            rho = scipy.optimize.brentq(gap, lo, hi, xtol=1e-6)
            corr[i, j] = corr[j, i] = rho
    projected = False
    eigvals = np.linalg.eigvalsh(corr)
    if eigvals[0] <= 1e-10:
        corr = _nearest_positive_definite(corr)
        projected = True
        flags.append("correlation matrix projected to nearest positive definite")
    return Nataf(
        corr=corr, tail_quantile=tail_quantile, boundary_flags=flags, projected=projected
    )


def _nearest_positive_definite(a: np.ndarray, floor: float = 1e-8) -> np.ndarray:
    vals, vecs = np.linalg.eigh(a)
    vals = np.maximum(vals, floor)
    b = vecs @ np.diag(vals) @ vecs.T
    scale = np.sqrt(np.diag(b))
    return b / np.outer(scale, scale)


# --- logistic copula ----------------------------------------------------------


def logistic_exponent(z, alpha: float):
    """V(z) = (sum z_i^(-1/alpha))^alpha for the symmetric logistic."""
    z = np.asarray(z, dtype=float)
    return np.sum(z ** (-1.0 / alpha), axis=-1) ** alpha


def sample_logistic_frechet(alpha: float, d: int, n: int, rng) -> np.ndarray:
    """Unit-Frechet logistic sample via the positive-stable construction."""
    u = rng.uniform(0.0, np.pi, size=n)
    w = rng.standard_exponential(n)
    s = (np.sin((1.0 - alpha) * u) / w) ** ((1.0 - alpha) / alpha) * np.sin(
        alpha * u
    ) / np.sin(u) ** (1.0 / alpha)
    e = rng.standard_exponential((n, d))
    return (s[:, None] / e) ** alpha


def _logistic_censored_nll(alpha: float, z: np.ndarray, censor: np.ndarray) -> float:
    """Negative censored log-likelihood of the symmetric logistic.

    Components below the Frechet-scale censor threshold contribute through
    partial differentiation of the cdf with respect to the exceeding
    components only.
    """
    zt = np.maximum(z, censor)  # censored components evaluated at the threshold
    s = np.sum(zt ** (-1.0 / alpha), axis=1)
    w = s**alpha
    uncensored = z > censor
    k = uncensored.sum(axis=1)

    # first derivatives of W for uncensored components
    # W_i = -s^(alpha-1) * z_i^(-1/alpha - 1)
    zi = np.where(uncensored, zt, np.nan)
    wi = -(s[:, None] ** (alpha - 1.0)) * zi ** (-1.0 / alpha - 1.0)

    loglik = np.zeros(len(z))
    g_log = -w  # log G
    for kk in np.unique(k):
        rows = k == kk
        if kk == 0:
            contrib = g_log[rows]
        elif kk == 1:
            v = -np.nansum(wi[rows], axis=1)  # the single W_i
            contrib = g_log[rows] + np.log(v)
        elif kk == 2:
            pair = np.sort(np.where(uncensored[rows])[1].reshape(-1, 2), axis=1)
            w1 = wi[rows, pair[:, 0]]
            w2 = wi[rows, pair[:, 1]]
            w12 = _w2(alpha, s[rows], zt[rows, pair[:, 0]], zt[rows, pair[:, 1]])
            contrib = g_log[rows] + np.log(w1 * w2 - w12)
        elif kk == 3:
            w1, w2, w3 = wi[rows, 0], wi[rows, 1], wi[rows, 2]
            z1, z2, z3 = zt[rows, 0], zt[rows, 1], zt[rows, 2]
            sr = s[rows]
            w12 = _w2(alpha, sr, z1, z2)
            w13 = _w2(alpha, sr, z1, z3)
            w23 = _w2(alpha, sr, z2, z3)
            w123 = _w3(alpha, sr, z1, z2, z3)
            val = -w1 * w2 * w3 + w1 * w23 + w2 * w13 + w3 * w12 - w123
            contrib = g_log[rows] + np.log(val)
        else:
            raise DependenceError("logistic model supports d <= 3")
        loglik[rows] = contrib
    if not np.all(np.isfinite(loglik)):
        return np.inf
    return -float(np.sum(loglik))


def _w2(alpha, s, z1, z2):
    # d2 W / dz1 dz2 = ((alpha-1)/alpha) s^(alpha-2) (z1 z2)^(-1/alpha - 1)
    return ((alpha - 1.0) / alpha) * s ** (alpha - 2.0) * (z1 * z2) ** (
        -1.0 / alpha - 1.0
    )


def _w3(alpha, s, z1, z2, z3):
    return (
        -((alpha - 1.0) * (alpha - 2.0) / alpha**2)
        * s ** (alpha - 3.0)
        * (z1 * z2 * z3) ** (-1.0 / alpha - 1.0)
    )


def fit_logistic(
    events: ClusterMaxima | np.ndarray,
    margins: MarginalSet,
    censor_level: float = 0.9,
    min_events: int = 30,
) -> Logistic:
    """Censored-likelihood fit of the symmetric logistic dependence."""
    x = _event_matrix(events, margins)
    if len(x) < min_events:
        raise DependenceError(f"need at least {min_events} events")
    z = to_frechet(x, margins)
    censor = np.full(z.shape[1], frechet_from_uniform(censor_level))

    res = scipy.optimize.minimize_scalar(
        lambda a: _logistic_censored_nll(a, z, censor),
        bounds=(0.01, 1.0),
        method="bounded",
        options={"xatol": 1e-6},
    )
    alpha = float(res.x)
    flags = []
    if alpha <= 0.02:
        flags.append("near-perfect dependence (alpha at lower bound)")
    if alpha >= 1.0 - 1e-4:
        alpha = 1.0
    return Logistic(alpha=alpha, censor_level=censor_level, boundary_flags=flags)


# --- conditional extremes ------------------------------------------------------


def _ce_profile_nll(a, b, z, zj):
    r = (zj - a * z) / z**b
    sd = np.std(r)
    if sd < 1e-12:
        return -1e12  # exact fit; strongly preferred
    # the profile depends on the residual sd only, which is invariant in a
    # when b -> 1 (changing a shifts r by a constant); the tiny ridge term
    # resolves that flat direction deterministically toward the smallest a
    return len(z) * np.log(sd) + b * np.sum(np.log(z)) + 1e-3 * a


def _fit_ce_pair(z, zj):
    """Gaussian pseudo-likelihood fit of (a, b, mu, sd) for one target."""
    # exact comonotone shortcut
    slope = np.dot(z, zj) / np.dot(z, z)
    if 0.0 <= slope <= 1.0:
        resid = zj - slope * z
        scale = max(np.max(np.abs(zj)), 1.0)
        if np.max(np.abs(resid)) < 1e-9 * scale:
            return slope, 0.0, 0.0, 0.0, np.zeros(len(z))

    best = None
    for a0 in (0.0, 0.5, 1.0):
        for b0 in (-0.5, 0.0, 0.5):
            res = scipy.optimize.minimize(
                lambda p: _ce_profile_nll(p[0], p[1], z, zj),
                np.array([a0, b0]),
                method="L-BFGS-B",
                bounds=[(0.0, 1.0), (-5.0, 1.0 - 1e-6)],
            )
            if best is None or res.fun < best.fun:
                best = res
    a, b = best.x
    r = (zj - a * z) / z**b
    mu = float(np.mean(r))
    sd = float(np.std(r))
    eps = (r - mu) / sd if sd > 0 else np.zeros_like(r)
    return float(a), float(b), mu, sd, eps


def fit_conditional_extremes(
    events: ClusterMaxima | np.ndarray,
    margins: MarginalSet,
    nu: float,
    years: float | None = None,
    min_events: int = 20,
    condition_on_max: bool = True,
    gaussian_residuals: bool = False,
) -> ConditionalExtremes:
    """Heffernan-Tawn regression on the Frechet scale above threshold ``nu``.

    ``condition_on_max=True`` restricts, per conditioning variable i, to
    events where Z_i is also the componentwise maximum (the partition used
    here); False uses the original exceedance-only conditioning.
    """
    if isinstance(events, ClusterMaxima) and years is None:
        years = events.years
    x = _event_matrix(events, margins)
    if years is None:
        raise DependenceError("years required when events is a plain array")
    z = to_frechet(x, margins)
    n, d = z.shape
    a = np.zeros((d, d))
    b = np.zeros((d, d))
    res_mean = np.zeros((d, d))
    res_sd = np.zeros((d, d))
    residuals = []
    weights = np.zeros(d)
    flags = []
    zmax = z.max(axis=1)
    is_max = z == zmax[:, None]
    for i in range(d):
        sel = z[:, i] > nu
        if condition_on_max:
            sel &= is_max[:, i]
        n_i = int(sel.sum())
        if n_i < min_events:
            raise DependenceError(
                f"only {n_i} conditioning events for variable index {i}; need {min_events}"
            )
        weights[i] = n_i
        zi = z[sel, i]
        eps_rows = np.zeros((n_i, d))
        for j in range(d):
            if j == i:
                continue
            aj, bj, mj, sj, eps = _fit_ce_pair(zi, z[sel, j])
            a[i, j], b[i, j], res_mean[i, j], res_sd[i, j] = aj, bj, mj, sj
            eps_rows[:, j] = eps
            if aj in (0.0, 1.0) or bj >= 1.0 - 1e-5:
                flags.append(f"parameter at bound for pair ({i},{j})")
        residuals.append(np.delete(eps_rows, i, axis=1))
    tail_rate = float(np.sum(zmax > nu)) / years
    return ConditionalExtremes(
        nu=nu,
        a=a,
        b=b,
        res_mean=res_mean,
        res_sd=res_sd,
        residuals=residuals,
        partition_weights=weights / weights.sum(),
        tail_events_per_year=tail_rate,
        gaussian_residuals=gaussian_residuals,
        boundary_flags=flags,
    )


def _simulate_ce_frechet(model: ConditionalExtremes, d: int, n: int, rng) -> np.ndarray:
    out = np.empty((n, d))
    filled = 0
    while filled < n:
        batch = max(4 * (n - filled), 256)
        comp = rng.choice(d, size=batch, p=model.partition_weights)
        u_lo = uniform_from_frechet(model.nu)
        zi = frechet_from_uniform(rng.uniform(u_lo, 1.0, size=batch))
        z = np.empty((batch, d))
        for i in range(d):
            rows = comp == i
            m = int(rows.sum())
            if m == 0:
                continue
            others = [j for j in range(d) if j != i]
            if model.gaussian_residuals or len(model.residuals[i]) == 0:
                eps = rng.standard_normal((m, len(others)))
            else:
                pick = rng.integers(0, len(model.residuals[i]), size=m)
                eps = model.residuals[i][pick]
            zi_rows = zi[rows]
            z[rows, i] = zi_rows
            for k, j in enumerate(others):
                mu = model.res_mean[i, j] + model.res_sd[i, j] * eps[:, k]
                z[rows, j] = model.a[i, j] * zi_rows + zi_rows ** model.b[i, j] * mu
        ok = (z.argmax(axis=1) == comp) & np.all(z > 0, axis=1)
        take = min(int(ok.sum()), n - filled)
        out[filled : filled + take] = z[ok][:take]
        filled += take
    return out


# --- common simulate ------------------------------------------------------------


def simulate(model, margins: MarginalSet, n: int, seed: int) -> SimulatedEvents:
    """Draw n cluster-maxima vectors; bit-reproducible from (model, seed, n)."""
    if n < 1:
        raise DependenceError("n must be >= 1")
    rng = np.random.default_rng(seed)
    if isinstance(model, ConditionalExtremes):
        z = _simulate_ce_frechet(model, margins.dim, n, rng)
        u = uniform_from_frechet(z)
        u = np.clip(u, 1e-15, 1.0 - 1e-15)
        x = margins.ppf_matrix(u)
        rate = model.tail_events_per_year
    else:
        u = model.copula_uniforms(margins.dim, n, rng)
        u = np.clip(u, 1e-15, 1.0 - 1e-15)
        x = margins.ppf_matrix(u)
        rate = margins.events_per_year
    return SimulatedEvents(values=x, variables=margins.variables, events_per_year=rate)


# --- serialization ---------------------------------------------------------------


def margins_to_dict(margins: MarginalSet) -> dict:
    return {
        "schema": MARGINS_SCHEMA,
        "variables": margins.variables,
        "events_per_year": margins.events_per_year,
        "margins": [
            {
                "gpd": {
                    "threshold": m.gpd.threshold,
                    "scale": m.gpd.scale,
                    "shape": m.gpd.shape,
                    "exceedance_rate": m.gpd.exceedance_rate,
                    "n_exceedances": m.gpd.n_exceedances,
                    "loglik": m.gpd.loglik,
                },
                "body_values": m.body_values.tolist(),
                "body_probs": m.body_probs.tolist(),
                "tail_fraction": m.tail_fraction,
            }
            for m in margins.margins
        ],
    }


def margins_from_dict(doc: dict) -> MarginalSet:
    if doc.get("schema") != MARGINS_SCHEMA:
        raise DependenceError(f"expected schema {MARGINS_SCHEMA!r}")
    margins = [
        SemiParametricMargin(
            gpd=GpdFit(**m["gpd"]),
            body_values=np.asarray(m["body_values"]),
            body_probs=np.asarray(m["body_probs"]),
            tail_fraction=m["tail_fraction"],
        )
        for m in doc["margins"]
    ]
    return MarginalSet(
        variables=doc["variables"], margins=margins, events_per_year=doc["events_per_year"]
    )


def model_to_dict(model) -> dict:
    doc: dict = {"schema": MODEL_SCHEMA, "kind": model.kind}
    if isinstance(model, Nataf):
        doc["corr"] = model.corr.tolist()
        doc["tail_quantile"] = model.tail_quantile
        doc["boundary_flags"] = model.boundary_flags
        doc["projected"] = model.projected
    elif isinstance(model, Logistic):
        doc["alpha"] = model.alpha
        doc["censor_level"] = model.censor_level
        doc["boundary_flags"] = model.boundary_flags
    elif isinstance(model, ConditionalExtremes):
        doc.update(
            nu=model.nu,
            a=model.a.tolist(),
            b=model.b.tolist(),
            res_mean=model.res_mean.tolist(),
            res_sd=model.res_sd.tolist(),
            residuals=[r.tolist() for r in model.residuals],
            partition_weights=model.partition_weights.tolist(),
            tail_events_per_year=model.tail_events_per_year,
            gaussian_residuals=model.gaussian_residuals,
            boundary_flags=model.boundary_flags,
        )
    return doc


def model_from_dict(doc: dict):
    if doc.get("schema") != MODEL_SCHEMA:
        raise DependenceError(f"expected schema {MODEL_SCHEMA!r}")
    kind = doc["kind"]
    if kind == "independence":
        return Independence()
    if kind == "perfect_dependence":
        return PerfectDependence()
    if kind == "nataf":
        return Nataf(
            corr=np.asarray(doc["corr"]),
            tail_quantile=doc["tail_quantile"],
            boundary_flags=doc.get("boundary_flags", []),
            projected=doc.get("projected", False),
        )
    if kind == "logistic":
        return Logistic(
            alpha=doc["alpha"],
            censor_level=doc["censor_level"],
            boundary_flags=doc.get("boundary_flags", []),
        )
    if kind == "conditional_extremes":
        return ConditionalExtremes(
            nu=doc["nu"],
            a=np.asarray(doc["a"]),
            b=np.asarray(doc["b"]),
            res_mean=np.asarray(doc["res_mean"]),
            res_sd=np.asarray(doc["res_sd"]),
            residuals=[np.asarray(r) for r in doc["residuals"]],
            partition_weights=np.asarray(doc["partition_weights"]),
            tail_events_per_year=doc["tail_events_per_year"],
            gaussian_residuals=doc.get("gaussian_residuals", False),
            boundary_flags=doc.get("boundary_flags", []),
        )
    raise DependenceError(f"unknown model kind {kind!r}")


def save_model(model, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, sort_keys=True)


def load_model(path):
    with open(path) as fh:
        return model_from_dict(json.load(fh))
