"""Mooring-line tension meta-model.

Maximum 20-min tension decomposed into pretension, quasi-static tension,
and low/high-frequency dynamic components whose standard deviations follow
closed-form models in (Hs, Ws, Cs) and the mean directions.  The 20-min
maxima of the dynamic parts are tied to their standard deviations through
Gumbel quantile factors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .evt import GumbelFit, gumbel_quantile

PARAMS_SCHEMA = "envcontours/metamodel-params/1"


class MetaModelError(ValueError):
    pass


@dataclass
class MetaModelParams:
    pretension: float  # kN
    alpha_h: float
    alpha_w: float
    alpha_c: float
    a_lf: float
    b_lf: float
    a_hf: float
    b_hf: float
    c_hf: float
    d_hf: float
    gumbel_lf: GumbelFit
    gumbel_hf: GumbelFit
    quantile_level: float = 0.75

    def __post_init__(self):
        if not 0.0 < self.quantile_level < 1.0:
            raise MetaModelError("quantile level must be in (0,1)")

    @property
    def r_lf(self) -> float:
        return gumbel_quantile(self.gumbel_lf, self.quantile_level)

    @property
    def r_hf(self) -> float:
        return gumbel_quantile(self.gumbel_hf, self.quantile_level)

    def to_json(self, path=None) -> str:
        doc = {
            "schema": PARAMS_SCHEMA,
            "pretension": self.pretension,
            "alpha": {"hs": self.alpha_h, "ws": self.alpha_w, "cs": self.alpha_c},
            "lf": {"a": self.a_lf, "b": self.b_lf,
                   "gumbel": {"mode": self.gumbel_lf.mode, "scale": self.gumbel_lf.scale}},
            "hf": {"a": self.a_hf, "b": self.b_hf, "c": self.c_hf, "d": self.d_hf,
                   "gumbel": {"mode": self.gumbel_hf.mode, "scale": self.gumbel_hf.scale}},
            "quantile_level": self.quantile_level,
        }
        text = json.dumps(doc, indent=1, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_json(cls, source) -> "MetaModelParams":
        if isinstance(source, (str, bytes)) and str(source).lstrip().startswith("{"):
            doc = json.loads(source)
        else:
            with open(source) as fh:
                doc = json.load(fh)
        if doc.get("schema") != PARAMS_SCHEMA:
            raise MetaModelError(
                f"expected schema {PARAMS_SCHEMA!r}, got {doc.get('schema')!r}"
            )
        return cls(
            pretension=doc["pretension"],
            alpha_h=doc["alpha"]["hs"],
            alpha_w=doc["alpha"]["ws"],
            alpha_c=doc["alpha"]["cs"],
            a_lf=doc["lf"]["a"],
            b_lf=doc["lf"]["b"],
            a_hf=doc["hf"]["a"],
            b_hf=doc["hf"]["b"],
            c_hf=doc["hf"]["c"],
            d_hf=doc["hf"]["d"],
            gumbel_lf=GumbelFit(**doc["lf"]["gumbel"]),
            gumbel_hf=GumbelFit(**doc["hf"]["gumbel"]),
            quantile_level=doc["quantile_level"],
        )


@dataclass
class TensionDecomposition:
    t_qs: float
    sigma_lf: float
    sigma_hf: float
    t_max: float


@dataclass
class FloorCounter:
    """Counts raw negative standard deviations clipped to zero."""

    lf: int = 0
    hf: int = 0


def _trig(deg):
    rad = np.deg2rad(np.asarray(deg, dtype=float))
    return np.cos(rad) + np.sin(rad)


def quasi_static(params: MetaModelParams, hs, dm, ws, wdir, cs, cdir):
    """Quasi-static tension from squared intensities and mean directions."""
    return (
        params.alpha_h * np.asarray(hs, dtype=float) ** 2 * _trig(dm)
        + params.alpha_w * np.asarray(ws, dtype=float) ** 2 * _trig(wdir)
        + params.alpha_c * np.asarray(cs, dtype=float) ** 2 * _trig(cdir)
    )


def sigma_lf(params: MetaModelParams, hs, t_qs, counter: FloorCounter | None = None):
    raw = params.a_lf * np.asarray(hs, dtype=float) ** 2 + params.b_lf * np.asarray(
        t_qs, dtype=float
    ) * np.abs(t_qs)
    if counter is not None:
        counter.lf += int(np.sum(np.asarray(raw) < 0))
    return np.maximum(raw, 0.0)


def sigma_hf(params: MetaModelParams, hs, t_qs, s_lf, counter: FloorCounter | None = None):
    hs = np.asarray(hs, dtype=float)
    raw = (
        params.a_hf * hs
        + params.b_hf * hs**3
        + params.c_hf * np.asarray(t_qs, dtype=float) * np.abs(t_qs)
        + params.d_hf * np.asarray(s_lf, dtype=float) ** 2
    )
    if counter is not None:
        counter.hf += int(np.sum(np.asarray(raw) < 0))
    return np.maximum(raw, 0.0)


def max_tension(
    params: MetaModelParams, hs, dm, ws, wdir, cs, cdir, counter: FloorCounter | None = None
):
    """Full decomposition of the 20-min maximum tension for one or many states."""
    t_qs = quasi_static(params, hs, dm, ws, wdir, cs, cdir)
    s_lf = sigma_lf(params, hs, t_qs, counter)
    s_hf = sigma_hf(params, hs, t_qs, s_lf, counter)
    t_max = params.pretension + t_qs + params.r_lf * s_lf + params.r_hf * s_hf
    if np.ndim(t_max) == 0:
        return TensionDecomposition(float(t_qs), float(s_lf), float(s_hf), float(t_max))
    return TensionDecomposition(t_qs, s_lf, s_hf, t_max)


def max_tension_from_record(params: MetaModelParams, state) -> TensionDecomposition:
    return max_tension(
        params, state.hs, state.dm, state.ws, state.wdir, state.cs, state.cdir
    )


def response_series(params: MetaModelParams, dataset) -> np.ndarray:
    """Vectorized t_max over a whole dataset."""
    c = dataset.columns
    return max_tension(
        params, c["hs"], c["dm"], c["ws"], c["wdir"], c["cs"], c["cdir"]
    ).t_max


def evaluate_to_csv(params: MetaModelParams, dataset, path) -> None:
    c = dataset.columns
    dec = max_tension(params, c["hs"], c["dm"], c["ws"], c["wdir"], c["cs"], c["cdir"])
    df = pd.DataFrame(
        {
            "timestamp": np.datetime_as_string(dataset.times, unit="s"),
            "t_qs": dec.t_qs,
            "sigma_lf": dec.sigma_lf,
            "sigma_hf": dec.sigma_hf,
            "t_max": dec.t_max,
        }
    )
    df.to_csv(path, index=False, float_format="%.17g")


@dataclass
class CalibrationSample:
    """One 20-min sea-state with decomposed tension measurements."""

    hs: float
    dm: float
    ws: float
    wdir: float
    cs: float
    cdir: float
    t_qs: float
    sigma_lf: float
    sigma_hf: float
    lf_max_ratio: float  # measured 20-min LF max / sigma_lf
    hf_max_ratio: float

    state_fields = ("hs", "dm", "ws", "wdir", "cs", "cdir")


_RANK_TOL = 1e-8


def _lstsq_checked(design: np.ndarray, target: np.ndarray, names: list[str]) -> np.ndarray:
    scale = np.linalg.norm(design, axis=0)
    if np.any(scale == 0):
        dead = names[int(np.flatnonzero(scale == 0)[0])]
        raise MetaModelError(f"regressor {dead!r} is identically zero")
    scaled = design / scale
    if np.linalg.matrix_rank(scaled, tol=_RANK_TOL * len(design)) < design.shape[1]:
        # name one regressor in the null space
        _, _, vt = np.linalg.svd(scaled)
        worst = names[int(np.argmax(np.abs(vt[-1])))]
        raise MetaModelError(f"rank-deficient design matrix (regressor {worst!r})")
    coef, *_ = np.linalg.lstsq(scaled, target, rcond=None)
    return coef / scale


def fit_metamodel(
    samples: list[CalibrationSample],
    pretension: float,
    quantile_level: float = 0.75,
) -> MetaModelParams:
    """Stage-wise least-squares calibration of all meta-model coefficients.

    Quasi-static coefficients first, then the LF model given measured t_qs,
    then the HF model; Gumbel parameters from the measured normalized maxima.
    """
    from .evt import fit_gumbel

    if len(samples) < 20:
        raise MetaModelError("need at least 20 calibration samples")
    hs = np.array([s.hs for s in samples])
    t_qs = np.array([s.t_qs for s in samples])
    s_lf = np.array([s.sigma_lf for s in samples])
    s_hf = np.array([s.sigma_hf for s in samples])

    qs_design = np.column_stack(
        [
            hs**2 * _trig([s.dm for s in samples]),
            np.array([s.ws for s in samples]) ** 2 * _trig([s.wdir for s in samples]),
            np.array([s.cs for s in samples]) ** 2 * _trig([s.cdir for s in samples]),
        ]
    )
    alpha = _lstsq_checked(qs_design, t_qs, ["alpha_h", "alpha_w", "alpha_c"])

    lf_design = np.column_stack([hs**2, t_qs * np.abs(t_qs)])
    ab_lf = _lstsq_checked(lf_design, s_lf, ["a_lf", "b_lf"])

    hf_design = np.column_stack([hs, hs**3, t_qs * np.abs(t_qs), s_lf**2])
    coef_hf = _lstsq_checked(hf_design, s_hf, ["a_hf", "b_hf", "c_hf", "d_hf"])

    gumbel_lf = fit_gumbel([s.lf_max_ratio for s in samples])
    gumbel_hf = fit_gumbel([s.hf_max_ratio for s in samples])

    return MetaModelParams(
        pretension=pretension,
        alpha_h=float(alpha[0]),
        alpha_w=float(alpha[1]),
        alpha_c=float(alpha[2]),
        a_lf=float(ab_lf[0]),
        b_lf=float(ab_lf[1]),
        a_hf=float(coef_hf[0]),
        b_hf=float(coef_hf[1]),
        c_hf=float(coef_hf[2]),
        d_hf=float(coef_hf[3]),
        gumbel_lf=gumbel_lf,
        gumbel_hf=gumbel_hf,
        quantile_level=quantile_level,
    )
