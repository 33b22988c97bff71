"""Empirical cluster points, liminf/limsup, and convergence verdicts.

Cluster detection quantifies over an epsilon-net instead of arbitrary
open sets: the bounding box is covered by a grid of spacing ``eps_grid``
and a cell center counts as a cluster point when the indices visiting
its eps-ball form a positive (not small) set under the ideal model. For
the density ideal, positivity of visit sets uses a separate threshold
``theta`` (default 0.05), well above the smallness threshold.

The first ceil(sqrt(N)) indices are excluded from all visit statistics
(transient burn-in). Liminf is computed straight from the definition by
bisection on the threshold r, classifying {n : x_n < r} through the
model oracle; limsup is the exact sign mirror.

Two textbook facts about the limiting cluster set, its topological
closedness and its minimality among closed attractor sets, quantify over
infinitely many indices and have no finite-horizon rendering; they are
deliberately not estimated or tested here.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from turnlab.geometry import hausdorff_distance, min_distance
from turnlab.ideals import IdealModel, burn_in
from turnlab.windows import SequenceWindow

DEFAULT_POSITIVITY = 0.05
GRID_CELLS_PER_RANGE = 200
BISECTION_MAX_ITER = 60
BISECTION_WIDTH = 1e-9


class UnboundedWindowError(ValueError):
    """Raised when a window fails the boundedness precondition: no bound M
    has a small exceedance set {n : |x_n| >= M}."""


def default_grid(window: SequenceWindow) -> float:
    box = window.bounding_box()
    span = float((box[:, 1] - box[:, 0]).max())
    return span / GRID_CELLS_PER_RANGE if span > 0 else 0.0


def _require_finite(window: SequenceWindow) -> None:
    if not np.all(np.isfinite(window.values)):
        raise UnboundedWindowError(
            "window is unbounded: no M satisfies that {n : |x_n| >= M} is small"
        )


# ---------------------------------------------------------------------------
# cluster detection


def _visit_score(model: IdealModel, count: int, max_index: int, trace_count: int) -> float:
    """Scalar positivity score of a visit set; larger is more positive."""
    if model.kind == "density":
        return count / model.horizon
    if model.kind == "fin":
        return float(max_index)
    return float(trace_count)


def _positivity_floor(model: IdealModel, theta: float) -> float:
    if model.kind == "density":
        return theta
    if model.kind == "fin":
        return float(model.cutoff)
    return float(model.cutoff) + 1.0


def _cell_stats_1d(window: SequenceWindow, model: IdealModel, eps: float, start: int):
    vals = window.scalars()
    idx = np.arange(start, window.horizon, dtype=np.int64)
    v = vals[start:]
    order = np.argsort(v, kind="stable")
    sv = v[order]
    si = idx[order]
    lo = float(vals.min())
    n_cells = max(1, int(np.ceil((vals.max() - lo) / eps)))
    occupied = np.unique(np.clip(((v - lo) / eps).astype(np.int64), 0, n_cells - 1))
    stats = {}
    trace = model.trace_mask(si) if model.kind == "finite_trace" else None
    trace_cum = np.concatenate([[0], np.cumsum(trace)]) if trace is not None else None
    for c in occupied:
        center = lo + (float(c) + 0.5) * eps
        a = int(np.searchsorted(sv, center - eps, side="right"))
        b = int(np.searchsorted(sv, center + eps, side="left"))
        if b <= a:
            continue
        max_index = int(si[a:b].max()) if model.kind == "fin" else -1
        tcount = int(trace_cum[b] - trace_cum[a]) if trace_cum is not None else 0
        stats[(int(c),)] = {
            "center": np.array([center]),
            "count": b - a,
            "max_index": max_index,
            "trace_count": tcount,
            "slice": (a, b),
        }
    return stats, (sv, si, lo)


def _cell_stats_nd(window: SequenceWindow, model: IdealModel, eps: float, start: int):
    pts = window.values[start:]
    idx = np.arange(start, window.horizon, dtype=np.int64)
    lo = window.values.min(axis=0)
    cells = ((pts - lo) / eps).astype(np.int64)
    keys, inverse = np.unique(cells, axis=0, return_inverse=True)
    members: dict[tuple, np.ndarray] = {}
    order = np.argsort(inverse, kind="stable")
    bounds = np.searchsorted(inverse[order], np.arange(len(keys) + 1))
    for k in range(len(keys)):
        members[tuple(int(c) for c in keys[k])] = order[bounds[k] : bounds[k + 1]]
    offsets = list(itertools.product((-1, 0, 1), repeat=window.dim))

    def gather(key: tuple, center: np.ndarray):
        got = []
        for off in offsets:
            nb = tuple(k + o for k, o in zip(key, off))
            if nb in members:
                got.append(members[nb])
        pos = np.concatenate(got)
        near = np.sqrt(((pts[pos] - center) ** 2).sum(axis=1)) < eps
        return pos[near]

    def build(center_of) -> dict:
        out = {}
        for key, rows in members.items():
            center = center_of(key, rows)
            hit = gather(key, center)
            if hit.size == 0:
                continue
            hit_idx = idx[hit]
            out[key] = {
                "center": center,
                "count": int(hit.size),
                "max_index": int(hit_idx.max()) if model.kind == "fin" else -1,
                "trace_count": int(model.trace_mask(hit_idx).sum())
                if model.kind == "finite_trace"
                else 0,
                "members": hit,
            }
        return out

    stats = build(lambda key, rows: lo + (np.array(key, dtype=float) + 0.5) * eps)
    if not stats:
        # above dimension three a lone corner point can sit farther than
        # eps from every cell center; anchor candidates on visited points
        stats = build(lambda key, rows: pts[rows[0]])
    return stats, (pts, idx, lo)


def _merge_cells(
    qualifying: list[tuple],
    stats: dict,
    window: SequenceWindow,
    model: IdealModel,
    eps: float,
    start: int,
    aux,
) -> np.ndarray:
    """Merge Chebyshev-adjacent qualifying cells to visit-weighted centroids."""
    qual = set(qualifying)
    seen: set[tuple] = set()
    points = []
    d = window.dim
    offsets = [o for o in itertools.product((-1, 0, 1), repeat=d) if any(o)]
    for key in sorted(qualifying):
        if key in seen:
            continue
        component = []
        frontier = [key]
        seen.add(key)
        while frontier:
            cur = frontier.pop()
            component.append(cur)
            for off in offsets:
                nb = tuple(c + o for c, o in zip(cur, off))
                if nb in qual and nb not in seen:
                    seen.add(nb)
                    frontier.append(nb)
        member_pts = _component_points(component, stats, window, model, eps, start, aux)
        centroid = member_pts.mean(axis=0)
        # a hollow component (ring) can drop its centroid outside every
        # cell; keep the reported point within eps of a real visit
        if min_distance(centroid, member_pts) >= eps:
            j = int(np.argmin(np.sqrt(((member_pts - centroid) ** 2).sum(axis=1))))
            centroid = member_pts[j]
        points.append(centroid)
    out = np.array(points, dtype=float).reshape(-1, d)
    return out[np.lexsort(out.T[::-1])]


def _component_points(component, stats, window, model, eps, start, aux):
    if window.dim == 1:
        sv, si, lo = aux
        chunks = []
        for key in component:
            c_lo = lo + key[0] * eps
            c_hi = c_lo + eps
            aa = int(np.searchsorted(sv, c_lo, side="left"))
            bb = int(np.searchsorted(sv, c_hi, side="left"))
            if bb > aa:
                chunks.append(sv[aa:bb])
        if not chunks:  # fall back to the qualifying balls themselves
            for key in component:
                a, b = stats[key]["slice"]
                chunks.append(sv[a:b])
        return np.concatenate(chunks)[:, None]
    pts, idx, lo = aux
    rows = np.concatenate([stats[key]["members"] for key in component])
    return pts[np.unique(rows)]


def _cluster(window: SequenceWindow, model: IdealModel, eps: float, theta: float):
    _require_finite(window)
    model = model.at_horizon(window.horizon)
    vals = window.values
    span = float((vals.max(axis=0) - vals.min(axis=0)).max())
    diag = {
        "eps_grid": eps,
        "theta": theta,
        "burn_in": burn_in(window.horizon),
        "model": model.describe(),
        "theta_effective": None,
        "degenerate": False,
    }
    if span <= 1e-12:
        diag["degenerate"] = True
        return vals[:1].copy(), diag
    if eps <= 0:
        raise ValueError("eps_grid must be positive")
    start = burn_in(window.horizon)
    if window.dim == 1:
        stats, aux = _cell_stats_1d(window, model, eps, start)
    else:
        stats, aux = _cell_stats_nd(window, model, eps, start)
    floor = _positivity_floor(model, theta)
    scores = {
        key: _visit_score(model, s["count"], s["max_index"], s["trace_count"])
        for key, s in stats.items()
    }
    qualifying = [k for k, s in scores.items() if s >= floor]
    if not qualifying:
        # Positivity never clears theta when visits spread thin (a window
        # dense in an interval, say); every bounded window still has a
        # cluster point, so fall back to the maximally visited cells.
        top = max(scores.values())
        qualifying = [k for k, s in scores.items() if s >= top * (1 - 1e-12)]
        diag["theta_effective"] = top if model.kind == "density" else None
        diag["fallback"] = True
    pts = _merge_cells(qualifying, stats, window, model, eps, start, aux)
    return pts, diag


def cluster_points(
    window: SequenceWindow,
    model: IdealModel,
    eps_grid: float | None = None,
    theta: float = DEFAULT_POSITIVITY,
) -> np.ndarray:
    """Estimated cluster set as a (k, d) array, sorted lexicographically.

    A grid cell center qualifies when the post-burn-in indices visiting
    its eps-ball form a positive set; adjacent qualifying cells merge to
    their visit-weighted centroid. Every reported point lies within
    eps_grid of some window point.
    """
    eps = default_grid(window) if eps_grid is None else eps_grid
    pts, _ = _cluster(window, model, eps, theta)
    return pts


# ---------------------------------------------------------------------------
# liminf / limsup / limit


def _below_positive(vals: np.ndarray, model: IdealModel, start: int) -> Callable[[float], bool]:
    """Classifier of {n >= start : x_n < r} positivity, per model kind."""
    n = vals.size
    idx = np.arange(start, n, dtype=np.int64)
    tail = vals[start:]
    if model.kind == "density":
        thr = model.threshold * model.horizon

        def pos(r: float) -> bool:
            return int((tail < r).sum()) >= thr

    elif model.kind == "fin":
        lo = max(start, model.cutoff)
        late = vals[lo:]

        def pos(r: float) -> bool:
            return bool((late < r).any())

    else:
        on_trace = tail[model.trace_mask(idx)]

        def pos(r: float) -> bool:
            return int((on_trace < r).sum()) > model.cutoff

    return pos


def ideal_liminf(window: SequenceWindow, model: IdealModel) -> float:
    """Smallest value r such that the sequence dips below r on a positive
    index set: inf{r : {n : x_n < r} is not small}. Bisection on r."""
    _require_finite(window)
    if window.dim != 1:
        raise ValueError("liminf needs a scalar window")
    model = model.at_horizon(window.horizon)
    vals = window.scalars()
    start = burn_in(window.horizon)
    pos = _below_positive(vals, model, start)
    vmin, vmax = float(vals.min()), float(vals.max())
    pad = max(1e-12, 1e-9 * (1.0 + abs(vmax) + abs(vmin)))
    lo, hi = vmin - pad, vmax + pad
    if not pos(hi):
        raise UnboundedWindowError(
            "no threshold r makes {n : x_n < r} positive; the window has no "
            "essential mass under this model"
        )
    if pos(lo):  # cannot happen for a finite window; defensive
        return lo
    width_stop = BISECTION_WIDTH * max(1.0, abs(vmin), abs(vmax))
    for _ in range(BISECTION_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if pos(mid):
            hi = mid
        else:
            lo = mid
        if hi - lo <= width_stop:
            break
    return 0.5 * (lo + hi)


def ideal_limsup(window: SequenceWindow, model: IdealModel) -> float:
    """Exact sign mirror of liminf."""
    return -ideal_liminf(SequenceWindow(-window.values), model)


def deviation_densities(
    window: SequenceWindow,
    target: np.ndarray,
    model: IdealModel,
    scales: tuple[float, ...],
    apply_burn_in: bool = True,
) -> list[dict]:
    """Per-scale diagnostics of {n : ||x_n - target|| >= scale}."""
    model = model.at_horizon(window.horizon)
    target = np.asarray(target, dtype=float).ravel()
    dist = np.sqrt(((window.values - target) ** 2).sum(axis=1))
    start = burn_in(window.horizon) if apply_burn_in else 0
    rungs = []
    for s in scales:
        dev = np.nonzero(dist[start:] >= s)[0] + start
        rungs.append(
            {
                "scale": float(s),
                "count": int(dev.size),
                "upper_density": dev.size / window.horizon,
                "small": _small_index_set(dev, model),
            }
        )
    return rungs


def _small_index_set(indices: np.ndarray, model: IdealModel) -> bool:
    from turnlab.ideals import is_small

    return is_small(indices, model)


def ideal_limit(
    window: SequenceWindow,
    model: IdealModel,
    eps: float,
    eps_grid: float | None = None,
    theta: float = DEFAULT_POSITIVITY,
) -> Optional[np.ndarray]:
    """The limit point, when one exists at the tested scales.

    The candidate is the sole cluster point (nothing is returned when the
    cluster set is not a singleton); it is confirmed when the deviation
    set {n : ||x_n - candidate|| >= s} is small for s in (eps, eps/2, eps/4).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    pts = cluster_points(window, model, eps_grid=eps_grid, theta=theta)
    if pts.shape[0] != 1:
        return None
    candidate = pts[0]
    rungs = deviation_densities(window, candidate, model, (eps, eps / 2, eps / 4))
    if all(r["small"] for r in rungs):
        return candidate
    return None


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class ClusterReport:
    cluster_points: np.ndarray
    liminf: Optional[float]
    limsup: Optional[float]
    converges_to: Optional[np.ndarray]
    eps_grid: float
    theta: float
    limit_eps: float
    ladder: list[dict]
    model: dict
    burn_in: int
    degenerate: bool

    def to_dict(self) -> dict:
        return {
            "cluster_points": [[float(v) for v in p] for p in self.cluster_points],
            "liminf": self.liminf,
            "limsup": self.limsup,
            "converges_to": None
            if self.converges_to is None
            else [float(v) for v in self.converges_to],
            "eps_grid": self.eps_grid,
            "theta": self.theta,
            "limit_eps": self.limit_eps,
            "ladder": self.ladder,
            "model": self.model,
            "burn_in": self.burn_in,
            "degenerate": self.degenerate,
        }


def analyze_window(
    window: SequenceWindow,
    model: IdealModel,
    eps_grid: float | None = None,
    theta: float = DEFAULT_POSITIVITY,
    limit_eps: float | None = None,
) -> ClusterReport:
    """One-stop analysis: cluster set, liminf/limsup (scalar windows),
    and a convergence verdict with its deviation-density ladder."""
    eps = default_grid(window) if eps_grid is None else eps_grid
    pts, diag = _cluster(window, model, eps if eps > 0 else 1.0, theta)
    model_h = model.at_horizon(window.horizon)
    liminf = limsup = None
    if window.dim == 1:
        liminf = ideal_liminf(window, model_h)
        limsup = ideal_limsup(window, model_h)
    lim_eps = limit_eps if limit_eps is not None else max(10 * eps, 1e-9)
    converges = None
    ladder: list[dict] = []
    if pts.shape[0] == 1:
        ladder = deviation_densities(
            window, pts[0], model_h, (lim_eps, lim_eps / 2, lim_eps / 4)
        )
        if all(r["small"] for r in ladder):
            converges = pts[0]
    return ClusterReport(
        cluster_points=pts,
        liminf=liminf,
        limsup=limsup,
        converges_to=converges,
        eps_grid=eps,
        theta=theta,
        limit_eps=lim_eps,
        ladder=ladder,
        model=model_h.describe(),
        burn_in=diag["burn_in"],
        degenerate=diag["degenerate"],
    )


# ---------------------------------------------------------------------------
# identity checks


def lipschitz_estimate(
    h: Callable[[np.ndarray], np.ndarray], window: SequenceWindow, pairs: int = 4096
) -> float:
    """Sampled Lipschitz constant of h over the window's range."""
    pts = window.values
    m = min(96, pts.shape[0])
    stride = max(1, pts.shape[0] // m)
    sub = pts[::stride][:m]
    ii, jj = np.triu_indices(sub.shape[0], k=1)
    if ii.size > pairs:
        keep = np.linspace(0, ii.size - 1, pairs).astype(int)
        ii, jj = ii[keep], jj[keep]
    a, b = sub[ii], sub[jj]
    gap = np.sqrt(((a - b) ** 2).sum(axis=1))
    ok = gap > 1e-12
    if not ok.any():
        return 0.0
    ha = np.atleast_2d(np.asarray(h(a[ok]), dtype=float).T).T
    hb = np.atleast_2d(np.asarray(h(b[ok]), dtype=float).T).T
    if ha.ndim == 1:
        ha, hb = ha[:, None], hb[:, None]
    num = np.sqrt(((ha - hb) ** 2).reshape(ha.shape[0], -1).sum(axis=1))
    return float((num / gap[ok]).max())


@dataclass(frozen=True)
class IdentityReport:
    passed: bool
    distance: float
    tolerance: float
    lipschitz: float
    lhs: np.ndarray
    rhs: np.ndarray

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "distance": self.distance,
            "tolerance": self.tolerance,
            "lipschitz": self.lipschitz,
            "lhs": [[float(v) for v in p] for p in np.atleast_2d(self.lhs)],
            "rhs": [[float(v) for v in p] for p in np.atleast_2d(self.rhs)],
        }


def check_image_cluster_identity(
    window: SequenceWindow,
    h: Callable[[np.ndarray], np.ndarray],
    model: IdealModel,
    eps_grid: float | None = None,
    theta: float = DEFAULT_POSITIVITY,
) -> IdentityReport:
    """Compare h(cluster set of x) against the cluster set of h(x).

    Both sides are computed independently on the same grid resolution;
    they must agree within 2 * eps_grid * (1 + Lipschitz estimate of h).
    """
    _require_finite(window)
    eps = default_grid(window) if eps_grid is None else eps_grid
    state_clusters = cluster_points(window, model, eps_grid=eps, theta=theta)
    mapped = np.asarray(h(state_clusters), dtype=float)
    if mapped.ndim == 1:
        mapped = mapped[:, None]
    image_window = window.map(h)
    image_clusters = cluster_points(image_window, model, eps_grid=eps, theta=theta)
    lip = lipschitz_estimate(h, window)
    scale = 1.0 + float(np.abs(image_window.values).max())
    tol = max(2.0 * eps * (1.0 + lip), 4.0 * BISECTION_WIDTH * scale)
    dist = hausdorff_distance(mapped, image_clusters)
    return IdentityReport(
        passed=dist <= tol,
        distance=dist,
        tolerance=tol,
        lipschitz=lip,
        lhs=mapped,
        rhs=image_clusters,
    )


@dataclass(frozen=True)
class RepresentationReport:
    passed: bool
    tolerance: float
    lipschitz: float
    liminf_values: dict
    limsup_values: dict

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "tolerance": self.tolerance,
            "lipschitz": self.lipschitz,
            "liminf_values": self.liminf_values,
            "limsup_values": self.limsup_values,
        }


def check_representation_identity(
    window: SequenceWindow,
    u: Callable[[np.ndarray], np.ndarray],
    model: IdealModel,
    eps_grid: float | None = None,
    theta: float = DEFAULT_POSITIVITY,
) -> RepresentationReport:
    """Three independent routes to the liminf of u along the window:

    1. definitional bisection on the scalar image sequence,
    2. the smallest cluster point of the image sequence,
    3. the minimum of u over the state cluster set,

    plus the mirrored limsup triple. All must pairwise agree within
    eps_grid * (1 + Lipschitz estimate of u).
    """
    _require_finite(window)
    eps = default_grid(window) if eps_grid is None else eps_grid
    image_window = window.map(u)
    if image_window.dim != 1:
        raise ValueError("u must map points to scalars")
    q1_min = ideal_liminf(image_window, model)
    q1_max = ideal_limsup(image_window, model)
    image_clusters = cluster_points(image_window, model, eps_grid=eps, theta=theta)
    q2_min = float(image_clusters.min())
    q2_max = float(image_clusters.max())
    state_clusters = cluster_points(window, model, eps_grid=eps, theta=theta)
    u_on_clusters = np.asarray(u(state_clusters), dtype=float).ravel()
    q3_min = float(u_on_clusters.min())
    q3_max = float(u_on_clusters.max())
    lip = lipschitz_estimate(u, window)
    scale = 1.0 + float(np.abs(image_window.values).max())
    tol = max(eps * (1.0 + lip), 4.0 * BISECTION_WIDTH * scale)
    lim_inf = {"bisection": q1_min, "image_cluster_min": q2_min, "state_cluster_min": q3_min}
    lim_sup = {"bisection": q1_max, "image_cluster_max": q2_max, "state_cluster_max": q3_max}
    spread = max(
        max(lim_inf.values()) - min(lim_inf.values()),
        max(lim_sup.values()) - min(lim_sup.values()),
    )
    return RepresentationReport(
        passed=spread <= tol,
        tolerance=tol,
        lipschitz=lip,
        liminf_values=lim_inf,
        limsup_values=lim_sup,
    )
