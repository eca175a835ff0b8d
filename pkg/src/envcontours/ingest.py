"""Loading, validation and synthesis of concomitant metocean time series.

A :class:`Dataset` is a column store over a strictly increasing hourly (or
other constant-step) time axis.  Missing values are kept as NaN and reported
in a gap report; they are never interpolated, since interpolation would bias
the extremes downstream.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import scipy.stats

INTENSITY_FIELDS = ("hs", "tp", "ws", "cs")
DIRECTION_FIELDS = ("dp", "dm", "wdir", "cdir")
KNOWN_FIELDS = ("timestamp",) + INTENSITY_FIELDS + DIRECTION_FIELDS


class IngestError(ValueError):
    pass


@dataclass(frozen=True)
class SeaStateRecord:
    """One time step of environmental state."""

    timestamp: np.datetime64
    hs: float = np.nan
    tp: float = np.nan
    dp: float = np.nan
    dm: float = np.nan
    ws: float = np.nan
    wdir: float = np.nan
    cs: float = np.nan
    cdir: float = np.nan


@dataclass
class Dataset:
    """Ordered, constant-step collection of sea-state records.

    ``columns`` maps canonical field names to float arrays aligned with
    ``times``.  Gaps (NaN entries) are listed in ``gap_report``.
    """

    times: np.ndarray  # datetime64[s], strictly increasing
    columns: dict[str, np.ndarray]
    time_step: np.timedelta64
    gap_report: list[dict] = field(default_factory=list)

    def __post_init__(self):
        n = len(self.times)
        if n == 0:
            raise IngestError("empty dataset")
        for name, col in self.columns.items():
            if len(col) != n:
                raise IngestError(f"column {name!r} length mismatch")
        dt = np.diff(self.times)
        if n > 1 and np.any(dt <= np.timedelta64(0, "s")):
            raise IngestError("non-monotone time axis")
        _validate_ranges(self.columns)

    def __len__(self):
        return len(self.times)

    @property
    def span_years(self) -> float:
        dt = (self.times[-1] - self.times[0]) / np.timedelta64(1, "s")
        step = self.time_step / np.timedelta64(1, "s")
        return (dt + step) / (365.25 * 86400.0)

    def records(self):
        fields = [f for f in KNOWN_FIELDS[1:] if f in self.columns]
        for i, t in enumerate(self.times):
            yield SeaStateRecord(
                timestamp=t, **{f: float(self.columns[f][i]) for f in fields}
            )

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame({"timestamp": self.times})
        for name in KNOWN_FIELDS[1:]:
            if name in self.columns:
                df[name] = self.columns[name]
        return df


def _validate_ranges(columns: dict[str, np.ndarray]) -> None:
    for name in INTENSITY_FIELDS:
        if name in columns:
            col = columns[name]
            finite = np.isfinite(col)
            if np.any(col[finite] < 0):
                raise IngestError(f"negative values in intensity column {name!r}")
            if np.any(np.isinf(col)):
                raise IngestError(f"non-finite values in column {name!r}")
    for name in DIRECTION_FIELDS:
        if name in columns:
            col = columns[name]
            finite = np.isfinite(col)
            if np.any((col[finite] < 0) | (col[finite] >= 360.0)):
                raise IngestError(f"directions in {name!r} outside [0, 360)")


def _build_gap_report(times: np.ndarray, columns: dict[str, np.ndarray]) -> list[dict]:
    report = []
    names = list(columns)
    mask = np.column_stack([~np.isfinite(columns[n]) for n in names])
    for i in np.flatnonzero(mask.any(axis=1)):
        missing = [names[j] for j in np.flatnonzero(mask[i])]
        report.append(
            {"timestamp": np.datetime_as_string(times[i], unit="s"), "missing_fields": missing}
        )
    return report


def write_gap_report(dataset: Dataset, path) -> None:
    with open(path, "w") as fh:
        json.dump(dataset.gap_report, fh, indent=1)


def load_csv(path, schema: dict[str, str], delimiter: str = ",") -> Dataset:
    """Load a dataset from CSV under an explicit column mapping.

    ``schema`` maps canonical names (``timestamp``, ``hs``, ``ws``, ...) to
    the CSV header names.  Rows with missing values are kept (as NaN) and
    listed in the gap report; they are never dropped silently.
    """
    unknown = set(schema) - set(KNOWN_FIELDS)
    if unknown:
        raise IngestError(f"unknown column(s) in schema: {sorted(unknown)}")
    if "timestamp" not in schema:
        raise IngestError("schema must map 'timestamp'")
    df = pd.read_csv(path, delimiter=delimiter, float_precision="round_trip")
    missing = [src for src in schema.values() if src not in df.columns]
    if missing:
        raise IngestError(f"mapped column(s) not in CSV: {missing}")

    try:
        times = pd.to_datetime(df[schema["timestamp"]], utc=True, format="ISO8601")
    except (ValueError, TypeError) as exc:
        raise IngestError(f"unparseable timestamps: {exc}") from exc
    times = times.dt.tz_localize(None).to_numpy().astype("datetime64[s]")
    if np.any(np.diff(times) <= np.timedelta64(0, "s")):
        bad = int(np.flatnonzero(np.diff(times) <= np.timedelta64(0, "s"))[0]) + 1
        raise IngestError(f"non-monotone time axis at row {bad}")

    columns = {}
    for name, src in schema.items():
        if name == "timestamp":
            continue
        raw = pd.to_numeric(df[src], errors="coerce").to_numpy(dtype=float)
        bad = np.flatnonzero(~np.isfinite(raw) & df[src].notna().to_numpy())
        if bad.size and df[src].dtype == object:
            raise IngestError(f"malformed value in column {src!r} at row {int(bad[0])}")
        columns[name] = raw

    step = _infer_time_step(times)
    ds = Dataset(times=times, columns=columns, time_step=step)
    ds.gap_report = _build_gap_report(times, columns)
    return ds


def _infer_time_step(times: np.ndarray) -> np.timedelta64:
    if len(times) < 2:
        return np.timedelta64(3600, "s")
    diffs = np.diff(times).astype("timedelta64[s]")
    # modal step; larger diffs are gaps, flagged downstream
    vals, counts = np.unique(diffs, return_counts=True)
    return vals[np.argmax(counts)]


def write_csv(dataset: Dataset, path, schema: dict[str, str] | None = None) -> None:
    """Write a dataset back to CSV (full float precision round-trip)."""
    df = dataset.to_frame()
    df["timestamp"] = np.datetime_as_string(dataset.times, unit="s")
    if schema:
        df = df.rename(columns=schema)
    df.to_csv(path, index=False, float_format="%.17g")


def vector_mean_direction(intensities, directions) -> float:
    """Intensity-weighted mean direction in degrees, in [0, 360).

    Averages the Cartesian components (I cos D, I sin D) and takes the atan2
    angle of the mean vector.
    """
    w = np.asarray(intensities, dtype=float)
    d = np.asarray(directions, dtype=float)
    if w.shape != d.shape or w.size == 0:
        raise IngestError("intensities and directions must have equal nonzero length")
    if np.any(w < 0):
        raise IngestError("negative intensity")
    rad = np.deg2rad(d)
    x = np.mean(w * np.cos(rad))
    y = np.mean(w * np.sin(rad))
    if np.hypot(x, y) < 1e-300:
        raise IngestError("undefined mean direction")
    deg = float(np.rad2deg(np.arctan2(y, x)) % 360.0)
    return 0.0 if deg >= 360.0 else deg


# --- synthetic generation -------------------------------------------------

_DIST_REGISTRY = {
    "lognorm": scipy.stats.lognorm,
    "weibull": scipy.stats.weibull_min,
    "gamma": scipy.stats.gamma,
    "expon": scipy.stats.expon,
    "genpareto": scipy.stats.genpareto,
}


@dataclass
class MarginalSpec:
    """Marginal distribution for one intensity variable."""

    dist: str
    params: dict

    def frozen(self):
        if self.dist not in _DIST_REGISTRY:
            raise IngestError(f"unknown marginal distribution {self.dist!r}")
        frozen = _DIST_REGISTRY[self.dist](**self.params)
        if frozen.kwds.get("scale", 1.0) <= 0:
            raise IngestError("marginal scale must be positive")
        return frozen


@dataclass
class SynthesisConfig:
    """Configuration of the synthetic-environment generator.

    ``correlation`` is the Gaussian-copula correlation between the listed
    variables; temporal dependence comes from a shared AR(1) driver with lag-1
    autocorrelation ``ar_coefficient``, so the stationary cross-correlation of
    the latent field equals ``correlation`` exactly.
    """

    marginals: dict[str, MarginalSpec]
    correlation: np.ndarray | None = None
    ar_coefficient: float = 0.9
    start: str = "2000-01-01T00:00:00"
    n_steps: int = 8760
    time_step_hours: float = 1.0
    mean_directions: dict[str, float] = field(default_factory=dict)
    direction_spread: float = 30.0

    def __post_init__(self):
        if not 0 <= self.ar_coefficient < 1:
            raise IngestError("ar_coefficient must be in [0, 1)")
        d = len(self.marginals)
        if self.correlation is None:
            self.correlation = np.eye(d)
        self.correlation = np.asarray(self.correlation, dtype=float)
        if self.correlation.shape != (d, d):
            raise IngestError("correlation matrix shape mismatch")
        if not np.allclose(self.correlation, self.correlation.T):
            raise IngestError("correlation matrix must be symmetric")
        if np.linalg.eigvalsh(self.correlation)[0] <= 1e-12:
            raise IngestError("correlation matrix not positive definite")


_DIR_FOR = {"hs": "dm", "ws": "wdir", "cs": "cdir"}


def generate_synthetic_dataset(config: SynthesisConfig, seed: int) -> Dataset:
    """Draw a synthetic dataset; deterministic for a given seed.

    The latent field is a vector AR(1) process with standard-normal
    stationary margins; probability-integral transforms map it to the
    configured marginals, so the empirical marginal cdfs converge to the
    specification as the span grows.
    """
    rng = np.random.default_rng(seed)
    names = list(config.marginals)
    d = len(names)
    n = config.n_steps
    phi = config.ar_coefficient
    chol = np.linalg.cholesky(config.correlation)

    innov = rng.standard_normal((n, d)) @ chol.T
    z = np.empty((n, d))
    z[0] = innov[0]
    scale = np.sqrt(1.0 - phi * phi)
    for t in range(1, n):
        z[t] = phi * z[t - 1] + scale * innov[t]

    u = scipy.stats.norm.cdf(z)
    columns = {}
    for j, name in enumerate(names):
        columns[name] = config.marginals[name].frozen().ppf(u[:, j])

    for name in names:
        dir_name = _DIR_FOR.get(name)
        if dir_name is None:
            continue
        mean_dir = config.mean_directions.get(name, 225.0)
        wander = config.direction_spread * rng.standard_normal(n)
        columns[dir_name] = (mean_dir + wander) % 360.0

    step = np.timedelta64(int(round(config.time_step_hours * 3600)), "s")
    t0 = np.datetime64(config.start, "s")
    times = t0 + step * np.arange(n)
    return Dataset(times=times, columns=columns, time_step=step)
