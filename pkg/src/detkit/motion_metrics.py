"""Hybrid motion fidelity, edit fidelity and temporal consistency.

Motion fidelity pairs trajectories index-wise and mixes a global shape term,
``exp(-d_F)`` with ``d_F`` the discrete Frechet distance, with the mean cosine
between per-frame velocities::

    M = 1/N * sum_n [ alpha * exp(-d_F(A_n, B_n)) + (1 - alpha) * cbar_n ]

Edit fidelity and temporal consistency are cosine averages over precomputed
frame embeddings (the embedding models themselves live elsewhere).
"""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ParameterError, ParseError, SizeError
from .trajectory_model import TrajectorySet

__all__ = [
    "MotionFidelityConfig",
    "frechet_distance",
    "frechet_bruteforce",
    "velocity_cosine_mean",
    "motion_fidelity",
    "edit_fidelity",
    "temporal_consistency",
    "read_embeddings",
    "write_embeddings",
]

BRUTEFORCE_MAX_LEN = 8


@dataclass(frozen=True)
class MotionFidelityConfig:
    alpha: float = 0.5
    normalize_by_diagonal: bool = False

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ParameterError(f"alpha must lie in [0, 1], got {self.alpha}")


def _polyline(P, name):
    a = np.asarray(P, dtype=np.float64)
    if a.ndim == 1 and a.size == 0:
        a = a.reshape(0, 2)
    if a.ndim != 2:
        raise SizeError(f"{name} must be an (n, d) array of points, got shape {a.shape}")
    if a.shape[0] == 0:
        raise SizeError(f"{name} is empty")
    if not np.all(np.isfinite(a)):
        raise ParameterError(f"{name} has non-finite coordinates")
    return a


def _ground_distances(P, Q):
    diff = P[:, None, :] - Q[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def frechet_distance(P, Q) -> float:
    """Discrete Frechet distance between two polylines.

    Eiter-Mannila dynamic programme over the ``n x m`` coupling table with
    Euclidean ground distance.

    Parameters
    ----------
    P, Q : array_like, shape (n, d) and (m, d)

    Returns
    -------
    float

    Examples
    --------
    >>> frechet_distance([[0, 0]], [[3, 4]])
    5.0
    """
    P = _polyline(P, "P")
    Q = _polyline(Q, "Q")
    if P.shape[1] != Q.shape[1]:
        raise SizeError(f"dimension mismatch: {P.shape[1]} vs {Q.shape[1]}")
    d = _ground_distances(P, Q).tolist()
    n, m = len(d), len(d[0])
    prev = [0.0] * m
    acc = d[0][0]
    for j in range(m):
        acc = max(acc, d[0][j])
        prev[j] = acc
    for i in range(1, n):
        row = d[i]
        cur = [0.0] * m
        cur[0] = max(prev[0], row[0])
        for j in range(1, m):
            cur[j] = max(min(prev[j], cur[j - 1], prev[j - 1]), row[j])
        prev = cur
    return float(prev[-1])


def frechet_bruteforce(P, Q) -> float:
    """Frechet distance by exhaustive recursion over every monotone coupling.

    Exponential in the input length; only meant as a test oracle for
    :func:`frechet_distance` on polylines of at most 8 points.
    """
    P = _polyline(P, "P")
    Q = _polyline(Q, "Q")
    n, m = len(P), len(Q)
    if n > BRUTEFORCE_MAX_LEN or m > BRUTEFORCE_MAX_LEN:
        raise SizeError(f"brute force limited to {BRUTEFORCE_MAX_LEN} points per polyline, got {n} and {m}")

    def dist(i, j):
        return math.sqrt(sum((a - b) ** 2 for a, b in zip(P[i], Q[j])))

    def walk(i, j, worst):
        worst = max(worst, dist(i, j))
        if i == n - 1 and j == m - 1:
            return worst
        best = math.inf
        if i + 1 < n:
            best = min(best, walk(i + 1, j, worst))
        if j + 1 < m:
            best = min(best, walk(i, j + 1, worst))
        if i + 1 < n and j + 1 < m:
            best = min(best, walk(i + 1, j + 1, worst))
        return best

    return float(walk(0, 0, 0.0))


def _cosines(u, v):
    """Row-wise cosine; rows where either side has zero length give 0."""
    # sqrt(|u|^2 |v|^2) rather than |u| |v|: identical vectors give exactly 1.0
    denom = np.sqrt(np.einsum("...k,...k->...", u, u) * np.einsum("...k,...k->...", v, v))
    dot = np.einsum("...k,...k->...", u, v)
    out = np.zeros_like(dot)
    ok = denom > 0
    out[ok] = dot[ok] / denom[ok]
    return np.clip(out, -1.0, 1.0)


def velocity_cosine_mean(Ti, Tj) -> float:
    """Mean cosine between the per-frame velocities of two equal-length trajectories.

    A frame where either velocity is zero contributes 0.
    """
    a = np.asarray(Ti, dtype=np.float64)
    b = np.asarray(Tj, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise SizeError("trajectories must be (T, d) arrays")
    if a.shape != b.shape:
        raise SizeError(f"trajectory length mismatch: {a.shape[0]} vs {b.shape[0]}")
    if a.shape[0] < 2:
        raise SizeError("need T >= 2 to form velocities")
    c = _cosines(np.diff(a, axis=0), np.diff(b, axis=0))
    return float(math.fsum(c.tolist()) / len(c))


def motion_fidelity(A: TrajectorySet, B: TrajectorySet, cfg: MotionFidelityConfig | None = None) -> float:
    """Hybrid motion fidelity between index-paired trajectory sets.

    Visibility flags are not used. With ``cfg.normalize_by_diagonal`` both sets
    are divided by the diagonal of ``A.frame_size`` before the Frechet term.
    """
    cfg = cfg or MotionFidelityConfig()
    if A.n_tracks != B.n_tracks:
        raise SizeError(f"trajectory count mismatch: {A.n_tracks} vs {B.n_tracks}")
    if A.n_frames != B.n_frames:
        raise SizeError(f"trajectory length mismatch: {A.n_frames} vs {B.n_frames}")

    pa, pb = A.points, B.points
    if cfg.normalize_by_diagonal:
        diag = A.diagonal
        pa, pb = pa / diag, pb / diag

    total = 0.0
    # index-ordered reduction keeps the result independent of how terms are produced
    for n in range(A.n_tracks):
        shape = math.exp(-frechet_distance(pa[n], pb[n]))
        vel = velocity_cosine_mean(pa[n], pb[n])
        total += cfg.alpha * shape + (1.0 - cfg.alpha) * vel
    return total / A.n_tracks


def _check_nonzero(X, name):
    if np.any(np.einsum("...k,...k->...", X, X) == 0):
        raise NumericError(f"{name} contains a zero-norm vector")


def edit_fidelity(frames, prompt) -> float:
    """Mean cosine between each frame embedding and the prompt embedding."""
    F = np.atleast_2d(np.asarray(frames, dtype=np.float64))
    p = np.asarray(prompt, dtype=np.float64).reshape(-1)
    if F.ndim != 2 or F.shape[0] < 1:
        raise SizeError("frames must be an (F, d) array with F >= 1")
    if F.shape[1] != p.shape[0]:
        raise SizeError(f"embedding dimension mismatch: frames d={F.shape[1]}, prompt d={p.shape[0]}")
    _check_nonzero(F, "frames")
    _check_nonzero(p, "prompt")
    return float(np.mean(_cosines(F, np.broadcast_to(p, F.shape))))


def temporal_consistency(frames) -> float:
    """Mean cosine between consecutive frame embeddings."""
    F = np.asarray(frames, dtype=np.float64)
    if F.ndim != 2 or F.shape[0] < 2:
        raise SizeError(f"temporal consistency needs F >= 2 frames, got shape {F.shape}")
    _check_nonzero(F, "frames")
    return float(np.mean(_cosines(F[:-1], F[1:])))


# -- EMB1 embedding files ----------------------------------------------------

_EMB_MAGIC = b"EMB1"


def write_embeddings(path: str | os.PathLike, vectors) -> None:
    """Write an ``(F, d)`` array as EMB1: magic, uint32 F, uint32 d, float32 LE row-major."""
    V = np.atleast_2d(np.asarray(vectors, dtype="<f4"))
    if V.ndim != 2:
        raise SizeError(f"embeddings must be 2-D, got shape {V.shape}")
    with open(path, "wb") as fh:
        fh.write(_EMB_MAGIC)
        fh.write(struct.pack("<II", *V.shape))
        fh.write(np.ascontiguousarray(V).tobytes())


def read_embeddings(path: str | os.PathLike) -> np.ndarray:
    """Read an EMB1 file into a float64 ``(F, d)`` array."""
    with open(path, "rb") as fh:
        data = fh.read()
    where = os.fspath(path)
    if data[:4] != _EMB_MAGIC:
        raise ParseError(f"{where}: bad magic {data[:4]!r}, expected {_EMB_MAGIC!r}")
    if len(data) < 12:
        raise ParseError(f"{where}: truncated header")
    f, d = struct.unpack("<II", data[4:12])
    if f < 1 or d < 1:
        raise ParseError(f"{where}: empty embedding block F={f}, d={d}")
    body = data[12:]
    if len(body) != 4 * f * d:
        raise ParseError(f"{where}: expected {4 * f * d} payload bytes, got {len(body)}")
    return np.frombuffer(body, dtype="<f4").reshape(f, d).astype(np.float64)
