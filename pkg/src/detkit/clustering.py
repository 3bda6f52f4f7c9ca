"""Benchmark annotation math: initial-point sampling, trajectory clustering, difficulty.

A source video is annotated by sampling query points from its subject mask,
tracking them, clustering the resulting trajectories with k-means while
picking ``k`` by silhouette, and mapping the cluster count to a difficulty
level.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .errors import NumericError, ParameterError, SizeError
from .trajectory_model import ForegroundMask, TrajectorySet

__all__ = [
    "ClusterResult",
    "Difficulty",
    "trajectory_features",
    "kmeans",
    "silhouette_score",
    "select_k",
    "classify_difficulty",
    "isolation_weights",
    "distance_weighted_sample",
    "MAX_ITER",
    "N_RESTARTS",
    "WEAK_SILHOUETTE",
]

MAX_ITER = 300
N_RESTARTS = 3
ISOLATION_NEIGHBORS = 32
# below this the chosen k describes noise rather than structure
WEAK_SILHOUETTE = 0.35


class Difficulty(str, enum.Enum):
    EASY = "easy"
    MEDIUM = "medium"
    HARD = "hard"

    def __str__(self):
        return self.value


@dataclass(frozen=True, eq=False)
class ClusterResult:
    """Outcome of one k-means fit.

    ``inertia_trace`` holds the within-cluster sum of squares after every
    Lloyd update, so ``inertia_trace[-1] == inertia``.
    """

    k: int
    assignments: np.ndarray
    centroids: np.ndarray
    silhouette: float
    inertia: float
    n_iter: int
    inertia_trace: tuple = field(default=(), repr=False)

    @property
    def difficulty(self) -> Difficulty:
        return classify_difficulty(self.k)

    @property
    def weak_structure(self) -> bool:
        return self.silhouette < WEAK_SILHOUETTE

    def same_as(self, other: "ClusterResult") -> bool:
        """Bit-for-bit equality of every field."""
        return (
            self.k == other.k
            and np.array_equal(self.assignments, other.assignments)
            and np.array_equal(self.centroids, other.centroids)
            and self.silhouette == other.silhouette
            and self.inertia == other.inertia
            and self.n_iter == other.n_iter
            and self.inertia_trace == other.inertia_trace
        )


def trajectory_features(traj: TrajectorySet | np.ndarray) -> np.ndarray:
    """Flatten each trajectory to ``[x0, y0, x1, y1, ...]``; shape ``(N, 2T)``."""
    pts = traj.points if isinstance(traj, TrajectorySet) else np.asarray(traj, dtype=np.float64)
    return pts.reshape(pts.shape[0], -1).copy()


def _as_features(X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] < 1:
        raise SizeError(f"features must be an (N, D) array with N >= 1, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise NumericError("features contain non-finite values")
    return X


def _sq_dists(X, C):
    return cdist(X, C, "sqeuclidean")


def _kmeans_pp(X, k, rng):
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    closest = _sq_dists(X, centers[:1])[:, 0]
    for c in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = rng.choice(n, p=closest / total)
        else:
            idx = rng.integers(n)
        centers[c] = X[idx]
        closest = np.minimum(closest, _sq_dists(X, centers[c : c + 1])[:, 0])
    return centers


def _fill_empty(X, labels, centers, k):
    """Give every empty cluster the point farthest from its current centroid."""
    counts = np.bincount(labels, minlength=k)
    for c in np.flatnonzero(counts == 0):
        d = np.sum((X - centers[labels]) ** 2, axis=1)
        donors = counts[labels] > 1
        d[~donors] = -1.0
        idx = int(np.argmax(d))
        counts[labels[idx]] -= 1
        labels[idx] = c
        counts[c] = 1
        centers[c] = X[idx]
    return labels


def _centroids(X, labels, k):
    C = np.zeros((k, X.shape[1]))
    np.add.at(C, labels, X)
    return C / np.bincount(labels, minlength=k)[:, None]


def kmeans(features, k: int, seed: int) -> ClusterResult:
    """k-means++ seeding followed by Lloyd iterations.

    Iterates until the assignment vector reaches a fixed point or
    :data:`MAX_ITER` updates have run. Empty clusters are refilled with the
    point farthest from its centroid, so every label in ``[0, k)`` is used.
    The result is a deterministic function of ``(features, k, seed)``.
    """
    X = _as_features(features)
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ParameterError(f"k must satisfy 1 <= k <= N={n}, got {k}")
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp(X, k, rng)

    labels = None
    trace = []
    n_iter = 0
    for n_iter in range(1, MAX_ITER + 1):
        new = np.argmin(_sq_dists(X, centers), axis=1)
        new = _fill_empty(X, new, centers, k)
        centers = _centroids(X, new, k)
        trace.append(float(np.sum((X - centers[new]) ** 2)))
        if labels is not None and np.array_equal(new, labels):
            labels = new
            break
        labels = new

    if k >= 2:
        sil = silhouette_score(X, labels)
    else:
        sil = 0.0
    return ClusterResult(
        k=k,
        assignments=labels.astype(np.int64),
        centroids=centers,
        silhouette=sil,
        inertia=trace[-1],
        n_iter=n_iter,
        inertia_trace=tuple(trace),
    )


def silhouette_score(features, assignments) -> float:
    """Mean silhouette coefficient ``(b - a) / max(a, b)`` over all points.

    Points in singleton clusters, and points with ``a == b == 0``, score 0.
    """
    X = _as_features(features)
    labels = np.asarray(assignments)
    if labels.shape != (X.shape[0],):
        raise SizeError(f"need one label per row: {labels.shape} vs {X.shape[0]} rows")
    uniq, labels = np.unique(labels, return_inverse=True)
    k = len(uniq)
    if k < 2:
        raise ParameterError(f"silhouette needs at least 2 clusters, got {k}")

    D = cdist(X, X)
    counts = np.bincount(labels, minlength=k)
    # sums[i, c] = total distance from point i to members of cluster c
    sums = np.zeros((X.shape[0], k))
    for c in range(k):
        sums[:, c] = D[:, labels == c].sum(axis=1)

    own = counts[labels]
    idx = np.arange(X.shape[0])
    with np.errstate(divide="ignore", invalid="ignore"):
        a = sums[idx, labels] / (own - 1)
        means = sums / counts[None, :]
    means[idx, labels] = np.inf
    b = means.min(axis=1)

    denom = np.maximum(a, b)
    s = np.zeros(X.shape[0])
    ok = (own > 1) & (denom > 0)
    s[ok] = (b[ok] - a[ok]) / denom[ok]
    return float(np.mean(s))


def _restart_seed(seed: int, k: int, restart: int) -> int:
    # one independent stream per (k, restart); results cannot depend on scan order
    return int(np.random.SeedSequence([seed & 0xFFFFFFFF, k, restart]).generate_state(1)[0])


def select_k(features, k_min: int = 2, k_max: int = 12, seed: int = 0, *, return_scores: bool = False):
    """Scan ``k`` in ``[k_min, k_max]`` and keep the fit with the best silhouette.

    Each ``k`` gets :data:`N_RESTARTS` k-means runs with derived seeds and keeps
    the lowest-inertia one. Silhouette ties go to the smaller ``k``.

    With ``return_scores=True`` also returns ``{k: silhouette}`` for the scan.
    """
    X = _as_features(features)
    n = X.shape[0]
    if not 2 <= k_min <= k_max <= n:
        raise ParameterError(f"need 2 <= k_min <= k_max <= N={n}, got [{k_min}, {k_max}]")
    best = None
    scores = {}
    for k in range(k_min, k_max + 1):
        fit = None
        for r in range(N_RESTARTS):
            cand = kmeans(X, k, _restart_seed(seed, k, r))
            if fit is None or cand.inertia < fit.inertia:
                fit = cand
        scores[k] = fit.silhouette
        if best is None or fit.silhouette > best.silhouette:
            best = fit
    if return_scores:
        return best, scores
    return best


def classify_difficulty(k: int) -> Difficulty:
    """1-3 clusters are easy, 4-6 medium, 7 or more hard."""
    if isinstance(k, bool) or int(k) != k or k < 1:
        raise ParameterError(f"cluster count must be a positive integer, got {k!r}")
    if k <= 3:
        return Difficulty.EASY
    if k <= 6:
        return Difficulty.MEDIUM
    return Difficulty.HARD


def isolation_weights(pixels: np.ndarray, neighbors: int = ISOLATION_NEIGHBORS) -> np.ndarray:
    """Mean Euclidean distance from each pixel to its nearest foreground neighbours.

    Uses up to ``neighbors`` other pixels (fewer if the mask is smaller). A
    lone pixel gets weight 1.
    """
    P = np.asarray(pixels, dtype=np.float64)
    if len(P) == 1:
        return np.ones(1)
    kk = min(neighbors, len(P) - 1)
    d, _ = cKDTree(P).query(P, k=kk + 1)
    return d[:, 1:].mean(axis=1)


def distance_weighted_sample(mask: ForegroundMask, count: int, seed: int) -> np.ndarray:
    """Draw ``count`` distinct foreground pixels, favouring isolated ones.

    The first pixel is drawn with probability proportional to the squared
    isolation weight (see :func:`isolation_weights`); each later pixel with
    probability proportional to squared isolation times the squared distance
    to the nearest pixel already taken. Squaring the isolation weight turns
    it into an area-per-pixel estimate, so a thin limb competes with a large
    blob on coverage rather than on pixel count.

    Returns
    -------
    ndarray of int, shape (count, 2)
        ``(x, y)`` pixel coordinates in draw order. If ``count`` is at least
        the foreground size, all foreground pixels in row-major order.
    """
    if count < 1:
        raise ParameterError(f"count must be >= 1, got {count}")
    pixels = mask.foreground_pixels()
    if len(pixels) == 0:
        raise ParameterError("mask has no foreground pixels")
    if count >= len(pixels):
        return pixels

    rng = np.random.default_rng(seed)
    P = pixels.astype(np.float64)
    w = isolation_weights(P) ** 2
    nearest = np.ones(len(P))
    taken = np.zeros(len(P), dtype=bool)
    order = []
    for _ in range(count):
        p = w * nearest
        p[taken] = 0.0
        total = p.sum()
        if total > 0:
            idx = int(rng.choice(len(P), p=p / total))
        else:
            idx = int(rng.choice(np.flatnonzero(~taken)))
        order.append(idx)
        taken[idx] = True
        d2 = np.sum((P - P[idx]) ** 2, axis=1)
        nearest = d2 if len(order) == 1 else np.minimum(nearest, d2)
    return pixels[order]
