"""Stochastic-geometry Monte Carlo on a toroidal window.

RRUs and users are drawn from homogeneous PPPs, every user attaches to the
nearest RRU under the wrapped metric, RRUs are grouped uniformly at random
into clusters of size ``K`` and the blocked-user fraction is averaged over
clusters. Each window draws from its own stream derived from
``(seed, window index)``, so estimates do not depend on the number of
worker processes.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .dist import ModelParams, sample_count

DEFAULT_WINDOW_RRUS = 1000


@dataclass(frozen=True)
class Window:
    width: float
    height: float

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError(f"window sides must be > 0, got {self.width} x {self.height}")

    @property
    def area(self) -> float:
        return self.width * self.height

    @classmethod
    def square(cls, area: float) -> "Window":
        side = math.sqrt(area)
        return cls(side, side)

    @classmethod
    def for_expected_count(cls, count: float, density: float) -> "Window":
        """Square window holding ``count`` points of a PPP with ``density`` on average."""
        return cls.square(count / density)


@dataclass(frozen=True)
class SpatialScenario:
    window: Window
    rru_points: np.ndarray
    user_points: np.ndarray
    assignment: np.ndarray
    clusters: np.ndarray

    def cluster_user_counts(self) -> np.ndarray:
        if len(self.clusters) == 0:
            return np.empty(0, dtype=np.int64)
        per_rru = np.bincount(self.assignment, minlength=len(self.rru_points))
        return per_rru[self.clusters].sum(axis=1)


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    replications: int
    seed: int

    def z_score(self, reference: float) -> float:
        if self.stderr == 0:
            return 0.0 if self.mean == reference else math.copysign(math.inf, self.mean - reference)
        return (self.mean - reference) / self.stderr


@dataclass(frozen=True)
class CellAreaReport:
    n_cells: int
    mean: float
    variance: float
    cv2: float
    ks_distance: float
    expected_mean: float
    expected_cv2: float


def sample_ppp(density: float, window: Window, rng: np.random.Generator) -> np.ndarray:
    """Homogeneous PPP in ``window`` as an ``(n, 2)`` array."""
    if density < 0:
        raise ValueError(f"density must be >= 0, got {density}")
    n = rng.poisson(density * window.area) if density > 0 else 0
    pts = rng.random((n, 2))
    pts[:, 0] *= window.width
    pts[:, 1] *= window.height
    return pts


def torus_dist2(p: np.ndarray, q: np.ndarray, window: Window) -> np.ndarray:
    dx = np.abs(p[..., 0] - q[..., 0])
    dy = np.abs(p[..., 1] - q[..., 1])
    dx = np.minimum(dx, window.width - dx)
    dy = np.minimum(dy, window.height - dy)
    return dx * dx + dy * dy


def _ring(r: int):
    if r == 0:
        return [(0, 0)]
    out = [(dx, dy) for dx in range(-r, r + 1) for dy in (-r, r)]
    out += [(dx, dy) for dx in (-r, r) for dy in range(-r + 1, r)]
    return out


class GridIndex:
    """Uniform-grid bucketing of points on a torus for nearest-neighbour queries.

    Queries scan rings of cells outward; a query is settled once its best
    distance is below the distance to the first unscanned ring.
    """

    def __init__(self, points: np.ndarray, window: Window, occupancy: float = 2.0):
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        if len(points) == 0:
            raise ValueError("cannot index an empty point set")
        self.points = points
        self.window = window
        cell = math.sqrt(occupancy * window.area / len(points))
        self.nx = max(1, int(window.width // cell))
        self.ny = max(1, int(window.height // cell))
        self.hx = window.width / self.nx
        self.hy = window.height / self.ny
        cid = self._cell_ids(points)
        # stable sort keeps ascending point index within a cell
        self.order = np.argsort(cid, kind="stable")
        self.counts = np.bincount(cid, minlength=self.nx * self.ny)
        self.starts = np.cumsum(self.counts) - self.counts

    def _cell_xy(self, pts):
        cx = np.minimum((np.mod(pts[:, 0], self.window.width) / self.hx).astype(np.int64), self.nx - 1)
        cy = np.minimum((np.mod(pts[:, 1], self.window.height) / self.hy).astype(np.int64), self.ny - 1)
        return cx, cy

    def _cell_ids(self, pts):
        cx, cy = self._cell_xy(pts)
        return cx * self.ny + cy

    def nearest(self, queries: np.ndarray) -> np.ndarray:
        """Index of the nearest indexed point for each query; ties go to the lowest index."""
        queries = np.asarray(queries, dtype=float).reshape(-1, 2)
        m = len(queries)
        best_d2 = np.full(m, np.inf)
        best_i = np.full(m, -1, dtype=np.int64)
        qcx, qcy = self._cell_xy(queries)
        active = np.arange(m)
        h = min(self.hx, self.hy)
        r = 0
        while active.size:
            for dx, dy in _ring(r):
                c = ((qcx[active] + dx) % self.nx) * self.ny + (qcy[active] + dy) % self.ny
                cnt = self.counts[c]
                st = self.starts[c]
                for j in range(int(cnt.max(initial=0))):
                    sel = cnt > j
                    a = active[sel]
                    pidx = self.order[st[sel] + j]
                    d2 = torus_dist2(queries[a], self.points[pidx], self.window)
                    cur = best_d2[a]
                    better = (d2 < cur) | ((d2 == cur) & (pidx < best_i[a]))
                    best_d2[a[better]] = d2[better]
                    best_i[a[better]] = pidx[better]
            if 2 * r + 1 >= max(self.nx, self.ny):
                break
            active = active[best_d2[active] >= (r * h) ** 2]
            r += 1
        return best_i


def nearest_rru(users: np.ndarray, rrus: np.ndarray, window: Window) -> np.ndarray:
    if len(rrus) == 0:
        raise ValueError("no RRUs to assign users to")
    if len(users) == 0:
        return np.empty(0, dtype=np.int64)
    return GridIndex(rrus, window).nearest(users)


def assign_nearest(users: np.ndarray, rrus: np.ndarray, window: Window) -> np.ndarray:
    """Per-RRU user counts under nearest-RRU (Voronoi) association."""
    return np.bincount(nearest_rru(users, rrus, window), minlength=len(rrus))


def form_clusters(n_rrus: int, K: int, rng: np.random.Generator) -> np.ndarray:
    """Uniformly random disjoint groups of ``K`` RRU indices, one row per cluster."""
    if K < 1:
        raise ValueError(f"cluster size K must be >= 1, got {K}")
    if n_rrus < K:
        raise ValueError(f"need at least K={K} RRUs to form a cluster, got {n_rrus}")
    n_clusters = n_rrus // K
    return rng.permutation(n_rrus)[: n_clusters * K].reshape(n_clusters, K)


def generate_scenario(K: int, params: ModelParams, window: Window, rng: np.random.Generator) -> SpatialScenario:
    rrus = sample_ppp(params.lambda_r, window, rng)
    users = sample_ppp(params.lambda_u, window, rng)
    if len(rrus) < K:
        return SpatialScenario(
            window, rrus, users, np.full(len(users), -1, dtype=np.int64), np.empty((0, K), dtype=np.int64)
        )
    assignment = nearest_rru(users, rrus, window)
    clusters = form_clusters(len(rrus), K, rng)
    return SpatialScenario(window, rrus, users, assignment, clusters)


def window_stream(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def blocked_fraction(counts: np.ndarray, T: int) -> np.ndarray:
    """Per-cluster blocked share ``max(0, n-T)/n``; empty clusters block nothing."""
    counts = np.asarray(counts, dtype=float)
    out = np.zeros_like(counts)
    over = counts > T
    out[over] = (counts[over] - T) / counts[over]
    return out


def summarize(samples: np.ndarray, seed: int) -> McEstimate:
    n = len(samples)
    if n == 0:
        raise ValueError("no samples to summarize")
    mean = float(np.mean(samples))
    stderr = float(np.std(samples, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return McEstimate(mean=mean, stderr=stderr, replications=n, seed=seed)


def _window_counts(task):
    K, params, window, seed, index = task
    scenario = generate_scenario(K, params, window, window_stream(seed, index))
    return scenario.cluster_user_counts()


def _pool_map(fn, tasks, workers: int):
    if workers <= 1:
        return list(map(fn, tasks))
    with ProcessPoolExecutor(max_workers=workers) as ex:
        # results come back in task order regardless of completion order
        return list(ex.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def windows_for_samples(K: int, samples: int, window_rrus: int = DEFAULT_WINDOW_RRUS) -> int:
    """Number of windows whose cluster count reaches ``samples`` with a wide margin.

    The RRU count per window is Poisson, so the pooled cluster count has a
    relative spread of about 1/sqrt(total RRUs); 1% plus ``K`` clusters of
    slack per window keeps shortfalls out of reach.
    """
    per_window = max(1.0, window_rrus / K - 1.0)
    return max(1, math.ceil(1.01 * samples / per_window))


def cluster_user_counts(
    K: int,
    params: ModelParams,
    replications: int,
    window_rrus: int = DEFAULT_WINDOW_RRUS,
    seed: int = 42,
    workers: int = 1,
) -> np.ndarray:
    """User counts of every cluster over ``replications`` independent windows."""
    if replications < 1:
        raise ValueError(f"replications must be >= 1, got {replications}")
    window = Window.for_expected_count(window_rrus, params.lambda_r)
    tasks = [(K, params, window, seed, i) for i in range(replications)]
    parts = _pool_map(_window_counts, tasks, workers)
    return np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)


def estimate_blocking(
    K: int,
    T: int,
    params: ModelParams,
    replications: int,
    window_rrus: int = DEFAULT_WINDOW_RRUS,
    seed: int = 42,
    workers: int = 1,
) -> McEstimate:
    """Spatial Monte Carlo blocking estimate over ``replications`` windows.

    ``McEstimate.replications`` is the number of cluster samples pooled.
    """
    counts = cluster_user_counts(K, params, replications, window_rrus, seed, workers)
    return summarize(blocked_fraction(counts, T), seed)


def estimate_blocking_model(K: int, T: int, params: ModelParams, samples: int, seed: int = 42) -> McEstimate:
    """Blocking estimate from cluster counts drawn straight from the mixture law."""
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    counts = sample_count(K, params, rng, size=samples)
    return summarize(blocked_fraction(counts, T), seed)


def _window_areas(task):
    lambda_r, window, pixels_per_cell, seed, index = task
    rng = window_stream(seed, index)
    rrus = sample_ppp(lambda_r, window, rng)
    if len(rrus) == 0:
        return np.empty(0)
    step = 1.0 / math.sqrt(lambda_r * pixels_per_cell)
    mx = max(1, math.ceil(window.width / step))
    my = max(1, math.ceil(window.height / step))
    px, py = window.width / mx, window.height / my
    off = rng.random(2)
    gx = (np.arange(mx) + off[0]) * px
    gy = (np.arange(my) + off[1]) * py
    grid = np.stack(np.meshgrid(gx, gy, indexing="ij"), axis=-1).reshape(-1, 2)
    owner = GridIndex(rrus, window).nearest(grid)
    return np.bincount(owner, minlength=len(rrus)) * (px * py)


def cell_area_fit(
    lambda_r: float,
    window: Window,
    replications: int,
    seed: int = 42,
    pixels_per_cell: int = 256,
    a: float = 3.5,
    b: float = 3.5,
    workers: int = 1,
) -> CellAreaReport:
    """Empirical Voronoi cell areas by pixel counting, compared with Gamma(a, 1/(b lambda_r))."""
    if lambda_r * window.area < 100:
        raise ValueError("window must hold at least 100 RRUs on average")
    tasks = [(lambda_r, window, pixels_per_cell, seed, i) for i in range(replications)]
    areas = np.concatenate(_pool_map(_window_areas, tasks, workers))
    mean = float(np.mean(areas))
    var = float(np.var(areas, ddof=1))
    ks = stats.kstest(areas, stats.gamma(a, scale=1.0 / (b * lambda_r)).cdf).statistic
    return CellAreaReport(
        n_cells=len(areas),
        mean=mean,
        variance=var,
        cv2=var / mean**2,
        ks_distance=float(ks),
        expected_mean=1.0 / lambda_r,
        expected_cv2=1.0 / a,
    )
