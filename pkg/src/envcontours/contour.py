"""Environmental contours in physical space by the Huseby method.

For every direction u on a grid, the projection quantile C(u) is the
empirical (1 - p_e)-quantile of the sample projections u.x; the contour is
the boundary of the intersection of the halfspaces u.x <= C(u), built by the
polar dual transform (convex hull of u / (C(u) - u.c) about an interior
point c).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.spatial import ConvexHull

from .metamodel import MetaModelParams, max_tension


class ContourError(ValueError):
    pass


# --- direction grids ---------------------------------------------------------


@dataclass
class DirectionGrid:
    vectors: np.ndarray  # (m, d) unit vectors

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self):
        return len(self.vectors)


def circle_grid(n: int = 720) -> DirectionGrid:
    theta = 2.0 * np.pi * np.arange(n) / n
    return DirectionGrid(np.column_stack([np.cos(theta), np.sin(theta)]))


def icosphere_grid(min_vertices: int = 2562) -> DirectionGrid:
    """Near-uniform sphere grid by icosahedron subdivision (10*4^k + 2 vertices)."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=float,
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ]
    )
    while len(verts) < min_vertices:
        verts, faces = _subdivide(verts, faces)
    return DirectionGrid(verts)


def _subdivide(verts, faces):
    verts = list(verts)
    cache: dict[tuple[int, int], int] = {}

    def midpoint(i, j):
        key = (min(i, j), max(i, j))
        if key not in cache:
            m = verts[i] + verts[j]
            verts.append(m / np.linalg.norm(m))
            cache[key] = len(verts) - 1
        return cache[key]

    new_faces = []
    for a, b, c in faces:
        ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
        new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
    return np.array(verts), np.array(new_faces)


def make_grid(dim: int, resolution: int | None = None) -> DirectionGrid:
    if dim == 2:
        return circle_grid(resolution or 720)
    if dim == 3:
        return icosphere_grid(resolution or 2562)
    raise ContourError("only d in {2, 3} supported")


# --- projection quantiles ------------------------------------------------------


def projection_quantile(sample: np.ndarray, u: np.ndarray, p_e: float) -> float:
    """Empirical (1 - p_e)-quantile of the projections u.x.

    Order-statistic convention: rank ceil(n (1 - p_e)), 1-based.
    """
    proj = np.asarray(sample, dtype=float) @ np.asarray(u, dtype=float)
    return float(_rank_quantile(proj[None, :], p_e)[0])


def _rank_quantile(proj: np.ndarray, p_e: float) -> np.ndarray:
    n = proj.shape[1]
    if n * p_e < 1.0:
        raise ContourError("insufficient sample for exceedance level")
    rank = int(np.ceil(n * (1.0 - p_e)))  # 1-based
    rank = min(max(rank, 1), n)
    return np.partition(proj, rank - 1, axis=1)[:, rank - 1]


def projection_quantiles(
    sample: np.ndarray, grid: DirectionGrid, p_e: float, chunk: int = 64
) -> np.ndarray:
    """C(u) on the whole grid, chunked to bound the projection matrix size."""
    sample = np.ascontiguousarray(sample, dtype=float)
    n = len(sample)
    if n * p_e < 1.0:
        raise ContourError("insufficient sample for exceedance level")
    if n * p_e < 20:
        import warnings

        warnings.warn("fewer than 20 expected tail points per direction", stacklevel=2)
    out = np.empty(len(grid))
    for start in range(0, len(grid), chunk):
        dirs = grid.vectors[start : start + chunk]
        proj = dirs @ sample.T
        out[start : start + chunk] = _rank_quantile(proj, p_e)
    return out


# --- halfspace intersection -----------------------------------------------------


@dataclass
class ContourSurface:
    directions: np.ndarray  # (m, d)
    c_values: np.ndarray  # (m,)
    vertices: np.ndarray  # (k, d)
    facets: np.ndarray  # (f, d) vertex indices (segments in 2-D, triangles in 3-D)
    exceedance_prob: float
    return_period: float | None = None
    variables: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "schema": "envcontours/contour-surface/1",
            "variables": self.variables,
            "directions": self.directions.tolist(),
            "c_values": self.c_values.tolist(),
            "vertices": self.vertices.tolist(),
            "facets": self.facets.tolist(),
            "p_e": self.exceedance_prob,
            "T": self.return_period,
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)

    def save_obj(self, path) -> None:
        """Wavefront-style facet list for external mesh viewers."""
        with open(path, "w") as fh:
            for v in self.vertices:
                fh.write("v " + " ".join(f"{c:.9g}" for c in v) + "\n")
            for f in self.facets:
                fh.write("f " + " ".join(str(i + 1) for i in f) + "\n")

    @classmethod
    def from_dict(cls, doc: dict) -> "ContourSurface":
        if doc.get("schema") != "envcontours/contour-surface/1":
            raise ContourError("expected schema 'envcontours/contour-surface/1'")
        return cls(
            directions=np.asarray(doc["directions"]),
            c_values=np.asarray(doc["c_values"]),
            vertices=np.asarray(doc["vertices"]),
            facets=np.asarray(doc["facets"], dtype=int),
            exceedance_prob=doc["p_e"],
            return_period=doc.get("T"),
            variables=doc.get("variables", []),
        )


def halfspaces_to_surface(
    directions: np.ndarray,
    c_values: np.ndarray,
    interior_point: np.ndarray | None = None,
    fallback_point: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Vertices and facets of the boundary of the intersection of u.x <= C(u)."""
    directions = np.asarray(directions, dtype=float)
    c_values = np.asarray(c_values, dtype=float)
    d = directions.shape[1]
    if interior_point is None:
        interior_point = np.zeros(d)
    margins = c_values - directions @ interior_point
    if np.any(margins <= 0) and fallback_point is not None:
        margins2 = c_values - directions @ fallback_point
        if np.all(margins2 > 0):
            interior_point, margins = fallback_point, margins2
    if np.any(margins <= 0):
        interior_point = _chebyshev_center(directions, c_values)
        margins = c_values - directions @ interior_point
        if np.any(margins <= 0):
            bad = np.flatnonzero(margins <= 0)[:5]
            raise ContourError(
                f"no interior point found; offending direction indices {bad.tolist()}"
            )

    dual = directions / margins[:, None]
    hull = ConvexHull(dual)
    # each dual facet (n.y + b <= 0 inside, origin interior so b < 0) maps to
    # the primal vertex c + n / (-b)
    eq = hull.equations
    verts = interior_point + eq[:, :d] / (-eq[:, d:])
    verts = _repair_vertices(verts, directions, c_values, interior_point, margins)
    verts = _dedupe(verts)
    primal_hull = ConvexHull(verts)
    if d == 2:
        order = primal_hull.vertices  # counter-clockwise
        verts = verts[order]
        k = len(verts)
        facets = np.column_stack([np.arange(k), (np.arange(k) + 1) % k])
    else:
        verts = verts[primal_hull.vertices]
        remap = {old: new for new, old in enumerate(primal_hull.vertices)}
        facets = np.vectorize(remap.get)(primal_hull.simplices)
    return verts, facets


def _chebyshev_center(directions: np.ndarray, c_values: np.ndarray) -> np.ndarray:
    """Deepest interior point: maximize r subject to u.x + r <= C(u)."""
    from scipy.optimize import linprog

    d = directions.shape[1]
    res = linprog(
        c=np.append(np.zeros(d), -1.0),
        A_ub=np.column_stack([directions, np.ones(len(directions))]),
        b_ub=c_values,
        bounds=[(None, None)] * d + [(0.0, None)],
        method="highs",
    )
    if not res.success or res.x[-1] <= 0:
        raise ContourError("halfspace intersection has empty interior")
    return res.x[:d]


def _repair_vertices(verts, directions, c_values, interior_point, margins):
    """Radially project infeasible vertices back onto the boundary.

    Nearly concurrent halfspaces (e.g. comonotone samples) make the dual
    hull ill-conditioned, which can throw derived vertices far outside the
    true body; pulling each vertex along its ray from the interior point to
    the first violated constraint restores exact feasibility.
    """
    rel = verts - interior_point
    denom = rel @ directions.T
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(denom > 1e-300, margins[None, :] / denom, np.inf)
    s = np.minimum(t.min(axis=1), 1.0)
    return interior_point + s[:, None] * rel


def _dedupe(points: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    scale = max(1.0, float(np.max(np.abs(points))))
    rounded = np.round(points / (scale * tol))
    _, idx = np.unique(rounded, axis=0, return_index=True)
    return points[np.sort(idx)]


def build_contour_at(
    sample: np.ndarray,
    grid: DirectionGrid,
    p_e: float,
    variables: list[str] | None = None,
    return_period: float | None = None,
) -> ContourSurface:
    """Contour at a direct exceedance probability p_e."""
    sample = np.asarray(sample, dtype=float)
    c = projection_quantiles(sample, grid, p_e)
    verts, facets = halfspaces_to_surface(
        grid.vectors,
        c,
        interior_point=np.mean(sample, axis=0),
        fallback_point=np.median(sample, axis=0),
    )
    return ContourSurface(
        directions=grid.vectors,
        c_values=c,
        vertices=verts,
        facets=facets,
        exceedance_prob=p_e,
        return_period=return_period,
        variables=variables or [],
    )


def build_contour(
    events, grid: DirectionGrid, return_period: float
) -> ContourSurface:
    """T-year contour from simulated events; p_e = 1 / (rate * T)."""
    rate = events.events_per_year
    if rate * return_period <= 1.0:
        raise ContourError("return period below the event rate")
    p_e = 1.0 / (rate * return_period)
    return build_contour_at(
        events.values, grid, p_e, variables=list(events.variables), return_period=return_period
    )


# --- design points ----------------------------------------------------------------


@dataclass
class DesignPoint:
    location: np.ndarray
    response: float
    method: str = ""

    def row(self) -> dict:
        return {"response": self.response, **{f"x{i}": float(v) for i, v in enumerate(self.location)}}


def _refine_facets(surface: ContourSurface, depth: int) -> np.ndarray:
    """Barycentric subdivision points on facet interiors."""
    pts = [surface.vertices]
    if surface.vertices.shape[1] == 2:
        a = surface.vertices[surface.facets[:, 0]]
        b = surface.vertices[surface.facets[:, 1]]
        for k in range(1, 2**depth):
            t = k / 2.0**depth
            pts.append(a + t * (b - a))
    else:
        a = surface.vertices[surface.facets[:, 0]]
        b = surface.vertices[surface.facets[:, 1]]
        c = surface.vertices[surface.facets[:, 2]]
        m = 2**depth
        for i in range(m + 1):
            for j in range(m + 1 - i):
                k = m - i - j
                if (i, j, k) in ((m, 0, 0), (0, m, 0), (0, 0, m)):
                    continue
                pts.append((i * a + j * b + k * c) / m)
    return np.vstack(pts)


def find_design_point(
    surface: ContourSurface,
    params: MetaModelParams,
    directions: dict | None = None,
    refine_depth: int = 2,
) -> DesignPoint:
    """Maximize the meta-model tension over the contour surface.

    ``directions`` supplies the fixed headings (dm, wdir, cdir) used for
    evaluation, since the contour lives in intensity space only.  Ties break
    by lexicographic coordinate order.
    """
    if len(surface.vertices) == 0:
        raise ContourError("empty surface")
    directions = directions or {"dm": 45.0, "wdir": 45.0, "cdir": 45.0}
    pts = _refine_facets(surface, refine_depth) if refine_depth > 0 else surface.vertices
    hs, ws = pts[:, 0], pts[:, 1]
    cs = pts[:, 2] if pts.shape[1] == 3 else np.zeros(len(pts))
    resp = max_tension(
        params, hs, directions["dm"], ws, directions["wdir"], cs, directions["cdir"]
    ).t_max
    best = np.max(resp)
    cand = pts[resp >= best - 1e-12]
    order = np.lexsort(cand.T[::-1])  # lexicographic by coordinates
    loc = cand[order[0]]
    return DesignPoint(location=loc, response=float(best))


# --- empirical check (low-quantile comparison) ---------------------------------------


def empirical_contour_check(
    dataset,
    params: MetaModelParams,
    quantile_grid,
    grid: DirectionGrid | None = None,
    directions: dict | None = None,
    n_bootstrap: int = 200,
    seed: int = 0,
    min_exceedances: int = 50,
) -> list[dict]:
    """Contour-based response quantiles against empirical ones, at low levels.

    For each quantile q <= 0.98: the empirical q-quantile of the full
    response series with a bootstrap CI, and the maximum response on the
    contour built directly from the data at exceedance level 1 - q.

    The CI uses a circular moving-block bootstrap (block length about
    n^(1/3)) because the hourly response series is serially dependent and
    an i.i.d. resample would understate the quantile uncertainty.

    At moderate levels (q near 0.5) the full-sphere halfspace intersection
    is empty for skewed data (no point has halfspace depth 1 - q), so the
    contour here uses only nonnegative directions, closed from below by the
    componentwise sample minima; with a response monotone in the
    intensities, only that upper boundary carries information.
    """
    from .metamodel import response_series

    cols = dataset.columns
    mask = np.isfinite(cols["hs"]) & np.isfinite(cols["ws"]) & np.isfinite(cols["cs"])
    sample = np.column_stack([cols["hs"][mask], cols["ws"][mask], cols["cs"][mask]])
    resp = response_series(params, dataset)[mask]
    n = len(resp)
    rng = np.random.default_rng(seed)
    if grid is None:
        grid = make_grid(3)

    block = max(1, int(round(n ** (1.0 / 3.0))))
    n_blocks = -(-n // block)
    starts = rng.integers(0, n, size=(n_bootstrap, n_blocks))
    idx = (starts[:, :, None] + np.arange(block)) % n
    boot_samples = resp[idx.reshape(n_bootstrap, -1)[:, :n]]

    rows = []
    for q in quantile_grid:
        q = float(q)
        row: dict = {"quantile": q}
        if q > 0.98 or n * (1.0 - q) < min_exceedances:
            row["available"] = False
            rows.append(row)
            continue
        row["available"] = True
        row["empirical"] = float(np.quantile(resp, q))
        boot = np.quantile(boot_samples, q, axis=1)
        row["ci_low"] = float(np.quantile(boot, 0.025))
        row["ci_high"] = float(np.quantile(boot, 0.975))
        surface = _one_sided_contour(sample, grid, 1.0 - q)
        dp = find_design_point(surface, params, directions)
        row["contour_estimate"] = dp.response
        row["relative_error"] = (dp.response - row["empirical"]) / row["empirical"]
        rows.append(row)
    return rows


def _one_sided_contour(sample: np.ndarray, grid: DirectionGrid, p_e: float) -> ContourSurface:
    d = sample.shape[1]
    keep = np.all(grid.vectors >= -1e-12, axis=1)
    dirs = grid.vectors[keep]
    c = projection_quantiles(sample, DirectionGrid(dirs), p_e)
    lo = sample.min(axis=0) - 1e-9 * np.maximum(1.0, np.abs(sample).max(axis=0))
    dirs = np.vstack([dirs, -np.eye(d)])
    c = np.concatenate([c, -lo])
    verts, facets = halfspaces_to_surface(
        dirs, c, interior_point=np.median(sample, axis=0), fallback_point=None
    )
    return ContourSurface(
        directions=dirs,
        c_values=c,
        vertices=verts,
        facets=facets,
        exceedance_prob=p_e,
    )


def design_points_to_csv(points: dict[str, DesignPoint], variables: list[str], path) -> None:
    rows = []
    for method, dp in points.items():
        row = {"method": method}
        row.update({v: float(x) for v, x in zip(variables, dp.location)})
        row["response"] = dp.response
        rows.append(row)
    pd.DataFrame(rows).to_csv(path, index=False, float_format="%.17g")
