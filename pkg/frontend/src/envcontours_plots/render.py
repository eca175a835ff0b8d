"""Build matplotlib figures from envcontours JSON artifacts.

Each figure kind consumes exactly one artifact schema; the mapping is in
``KINDS``.  Loading validates the schema tag before any output file is
touched, so a corrupt or mismatched input never leaves a partial image.
Saved images carry no embedded timestamps, making repeated renders
byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from mpl_toolkits.mplot3d.art3d import Poly3DCollection  # noqa: E402

REPORT_SCHEMA = "envcontours/study-report/1"

KINDS = {
    "return-level": "envcontours/return-level-curve/1",
    "density-matrix": "envcontours/density/1",
    "series": "envcontours/series/1",
    "quantile-compare": "envcontours/quantile-compare/1",
    "contour-3d": "envcontours/contour-surface/1",
}

DESIGN_POINT_COLOR = "red"
PERFECT_DEPENDENCE_COLOR = "grey"


class RenderError(ValueError):
    pass


def load_artifact(path, expected_schema: str) -> dict:
    """Parse a JSON artifact and verify its schema tag."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise RenderError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("schema") != expected_schema:
        got = doc.get("schema") if isinstance(doc, dict) else type(doc).__name__
        raise RenderError(
            f"{path}: expected schema '{expected_schema}', got {got!r}"
        )
    return doc


def build_figure(kind: str, in_path, report_path=None, method: str | None = None):
    """Figure for ``kind`` from the artifact at ``in_path``."""
    if kind not in KINDS:
        raise RenderError(f"unknown figure kind '{kind}' (choices: {sorted(KINDS)})")
    if kind == "density-matrix" and Path(in_path).is_dir():
        return _density_matrix_dir(Path(in_path))
    doc = load_artifact(in_path, KINDS[kind])
    if kind == "return-level":
        return _return_level(doc)
    if kind == "density-matrix":
        return _density_single(doc)
    if kind == "series":
        return _series(doc)
    if kind == "quantile-compare":
        return _quantile_compare(doc)
    report = None
    if report_path is not None:
        report = load_artifact(report_path, REPORT_SCHEMA)
    return _contour_3d(doc, report, method)


def save_figure(fig, out_path) -> None:
    """Write the image without embedded timestamps; no partial file on error."""
    out = Path(out_path)
    # SVG and PDF backends stamp a creation date by default
    meta = {".svg": {"Date": None}, ".pdf": {"CreationDate": None}}.get(
        out.suffix.lower()
    )
    try:
        fig.savefig(out, metadata=meta)
    except Exception:
        out.unlink(missing_ok=True)
        raise
    finally:
        plt.close(fig)


# --- figure builders -------------------------------------------------------------


def _plot_curve_panel(ax, rows, label):
    rows = sorted(rows, key=lambda r: r["T"])
    t = [r["T"] for r in rows]
    level = [r["level"] for r in rows]
    ax.semilogx(t, level, color="C0", marker="o", ms=3, label="return level")
    if rows and "ci_low" in rows[0]:
        ax.fill_between(
            t,
            [r["ci_low"] for r in rows],
            [r["ci_high"] for r in rows],
            color="C0",
            alpha=0.25,
            label="95% CI",
        )
    ax.set_xlabel("return period (years)")
    ax.set_ylabel(label or "level")
    ax.grid(True, which="both", alpha=0.3)


def _return_level(doc):
    curves = doc.get("curves")
    if curves is None:
        curves = {"": doc["rows"]}
    n = len(curves)
    ncols = min(n, 2)
    nrows = -(-n // ncols)
    fig, axes = plt.subplots(
        nrows, ncols, figsize=(5.5 * ncols, 4 * nrows), squeeze=False
    )
    flat = axes.ravel()
    for ax, (name, rows) in zip(flat, curves.items()):
        _plot_curve_panel(ax, rows, name)
        if name:
            ax.set_title(name)
    for ax in flat[n:]:
        ax.set_visible(False)
    fig.tight_layout()
    return fig


def _density_single(doc):
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    x, y = np.asarray(doc["x"]), np.asarray(doc["y"])
    ax.contourf(x, y, np.asarray(doc["density"]), levels=12, cmap="viridis")
    ax.set_xlabel(doc["x_variable"])
    ax.set_ylabel(doc["y_variable"])
    fig.tight_layout()
    return fig


def _density_matrix_dir(path: Path):
    hists = {}
    for f in sorted(path.glob("stats_hist_*.json")):
        doc = load_artifact(f, "envcontours/hist/1")
        hists[doc["variable"]] = doc
    dens = {}
    for f in sorted(path.glob("stats_density_*.json")):
        doc = load_artifact(f, "envcontours/density/1")
        dens[(doc["x_variable"], doc["y_variable"])] = doc
    if not hists:
        raise RenderError(f"{path}: no stats_hist_*.json artifacts found")
    names = list(hists)
    k = len(names)
    fig, axes = plt.subplots(k, k, figsize=(3.2 * k, 3.0 * k), squeeze=False)
    for i, vi in enumerate(names):
        for j, vj in enumerate(names):
            ax = axes[i][j]
            if i == j:
                h = hists[vi]
                edges = np.asarray(h["edges"])
                ax.bar(
                    edges[:-1],
                    h["counts"],
                    width=np.diff(edges),
                    align="edge",
                    color="C0",
                )
            elif i > j:
                d = dens.get((vj, vi)) or dens.get((vi, vj))
                if d is None:
                    ax.set_visible(False)
                    continue
                flip = (vj, vi) not in dens
                z = np.asarray(d["density"])
                x, y = np.asarray(d["x"]), np.asarray(d["y"])
                if flip:
                    x, y, z = y, x, z.T
                ax.contourf(x, y, z, levels=10, cmap="viridis")
            else:
                ax.set_visible(False)
                continue
            if i == k - 1:
                ax.set_xlabel(vj)
            if j == 0:
                ax.set_ylabel(vi)
    fig.tight_layout()
    return fig


def _series(doc):
    names = [k for k in doc if k not in ("schema", "timestamps", "response")]
    panels = names + (["response"] if "response" in doc else [])
    times = np.asarray(doc["timestamps"], dtype="datetime64[s]")
    fig, axes = plt.subplots(
        len(panels), 1, figsize=(9, 1.8 * len(panels)), sharex=True, squeeze=False
    )
    for ax, name in zip(axes.ravel(), panels):
        ax.plot(times, doc[name], lw=0.8, color="C0")
        ax.set_ylabel(name)
        ax.grid(True, alpha=0.3)
    axes.ravel()[-1].set_xlabel("time")
    fig.autofmt_xdate()
    fig.tight_layout()
    return fig


def _quantile_compare(doc):
    rows = [r for r in doc["rows"] if r.get("available")]
    if not rows:
        raise RenderError("quantile-compare artifact has no available rows")
    rows = sorted(rows, key=lambda r: r["quantile"])
    q = [r["quantile"] for r in rows]
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    ax.fill_between(
        q,
        [r["ci_low"] for r in rows],
        [r["ci_high"] for r in rows],
        color="C0",
        alpha=0.25,
        label="empirical 95% CI",
    )
    ax.plot(q, [r["empirical"] for r in rows], color="C0", label="empirical quantile")
    ax.plot(
        q,
        [r["contour_estimate"] for r in rows],
        color="C1",
        marker="o",
        ms=3,
        label="contour estimate",
    )
    ax.set_xlabel("quantile level")
    ax.set_ylabel("response")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return fig


def _design_point_coords(report, method, period, variables):
    per = report["methods"].get(method)
    if per is None:
        raise RenderError(f"report has no method '{method}'")
    row = per.get(period)
    if row is None:
        raise RenderError(
            f"report method '{method}' has no return period {period}"
        )
    dp = row["design_point"]
    return np.array([dp[v] for v in variables]), row["tension_kn"]


def _contour_3d(doc, report, method):
    verts = np.asarray(doc["vertices"], dtype=float)
    facets = np.asarray(doc["facets"], dtype=int)
    if verts.shape[1] != 3:
        raise RenderError(
            f"contour-3d needs a 3-D surface, artifact has {verts.shape[1]} dimensions"
        )
    fig = plt.figure(figsize=(7, 6))
    ax = fig.add_subplot(projection="3d")
    mesh = Poly3DCollection(
        verts[facets], alpha=0.35, facecolor="C0", edgecolor="k", linewidths=0.2
    )
    ax.add_collection3d(mesh)
    lo, hi = verts.min(axis=0), verts.max(axis=0)

    if report is not None:
        variables = report["variables"]
        period = str(float(doc["T"])) if doc.get("T") is not None else None
        if period is None:
            raise RenderError("contour artifact has no return period for markers")
        if method is None:
            candidates = [m for m in sorted(report["methods"]) if m != "perfect_dependence"]
            if not candidates:
                raise RenderError("report has no non-perfect-dependence method")
            method = candidates[0]
        point, tension = _design_point_coords(report, method, period, variables)
        ax.scatter(
            *point,
            color=DESIGN_POINT_COLOR,
            s=60,
            depthshade=False,
            label=f"design point ({method}, {tension:.0f} kN)",
        )
        lo, hi = np.minimum(lo, point), np.maximum(hi, point)
        if "perfect_dependence" in report["methods"]:
            pd_point, _ = _design_point_coords(
                report, "perfect_dependence", period, variables
            )
            ax.scatter(
                *pd_point,
                color=PERFECT_DEPENDENCE_COLOR,
                s=60,
                depthshade=False,
                label="perfect dependence",
            )
            lo, hi = np.minimum(lo, pd_point), np.maximum(hi, pd_point)
        ax.legend(loc="upper left")

    labels = doc.get("variables") or ["x", "y", "z"]
    ax.set_xlabel(labels[0])
    ax.set_ylabel(labels[1])
    ax.set_zlabel(labels[2])
    pad = 0.05 * np.maximum(hi - lo, 1e-9)
    ax.set_xlim(lo[0] - pad[0], hi[0] + pad[0])
    ax.set_ylim(lo[1] - pad[1], hi[1] + pad[1])
    ax.set_zlim(lo[2] - pad[2], hi[2] + pad[2])
    if doc.get("T") is not None:
        ax.set_title(f"{doc['T']:g}-year environmental contour")
    return fig
