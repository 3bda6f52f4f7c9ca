"""Noise schedule, latent prediction, denoising and dense point-tracking losses.

The latent estimate fed to the tracking loss is::

    x_t   = sqrt(abar) * clean + sqrt(1 - abar) * noise
    v     = predictor(x_t, t)
    E_hat = sqrt(abar) * x_t - sqrt(1 - abar) * v

The tracking loss samples ``E_hat`` bilinearly at consecutive trajectory
points and penalises the squared feature change wherever both endpoints are
visible. Trajectory frame ``i`` reads latent frame ``i``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ParameterError, SizeError
from .trajectory_model import TrajectorySet
from .temporal_kernel import TemporalKernelParams, init_params, kernel_backward, kernel_forward

__all__ = [
    "NoiseSchedule",
    "LossWeights",
    "LossTrace",
    "cosine_alpha_bar",
    "noised_latent",
    "latent_from_prediction",
    "predict_latent",
    "denoising_loss",
    "sample_feature_at",
    "tracking_loss",
    "tracking_loss_grad",
    "combined_loss",
    "train_demo",
    "moving_blob_scene",
]

NoisePredictor = Callable[[np.ndarray, int], np.ndarray]


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    """Cumulative signal coefficients ``alpha_bar[t]``, non-increasing in ``(0, 1]``."""

    alpha_bar: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alpha_bar, dtype=np.float64).reshape(-1)
        if a.size < 1:
            raise ParameterError("schedule needs at least one step")
        if not np.all((a > 0) & (a <= 1)):
            raise ParameterError("alpha_bar entries must lie in (0, 1]")
        if np.any(np.diff(a) > 0):
            raise ParameterError("alpha_bar must be non-increasing")
        a.setflags(write=False)
        object.__setattr__(self, "alpha_bar", a)

    def __len__(self):
        return self.alpha_bar.size

    def __getitem__(self, t) -> float:
        if isinstance(t, bool) or int(t) != t or not 0 <= t < len(self):
            raise ParameterError(f"step {t!r} outside [0, {len(self)})")
        return float(self.alpha_bar[int(t)])


@dataclass(frozen=True)
class LossWeights:
    lambda_dl: float = 1.0
    lambda_tl: float = 0.1

    def __post_init__(self):
        for name in ("lambda_dl", "lambda_tl"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ParameterError(f"{name} must be finite and non-negative, got {v}")


def cosine_alpha_bar(T_steps: int, s: float = 0.008) -> NoiseSchedule:
    """Cosine schedule ``f(t)/f(0)`` with ``f(t) = cos^2((t/T + s)/(1 + s) * pi/2)``, clipped to ``[1e-5, 1]``."""
    if T_steps < 1:
        raise ParameterError(f"T_steps must be >= 1, got {T_steps}")
    t = np.arange(T_steps, dtype=np.float64)
    f = np.cos(((t / T_steps) + s) / (1 + s) * np.pi / 2) ** 2
    return NoiseSchedule(np.clip(f / f[0], 1e-5, 1.0))


def _same_shape(a, b, what):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise SizeError(f"{what}: shape {a.shape} != {b.shape}")
    return a, b


def noised_latent(clean, noise, alpha_bar: float) -> np.ndarray:
    clean, noise = _same_shape(clean, noise, "clean vs noise")
    return math.sqrt(alpha_bar) * clean + math.sqrt(1.0 - alpha_bar) * noise


def latent_from_prediction(noised, v, alpha_bar: float) -> np.ndarray:
    noised, v = _same_shape(noised, v, "noised latent vs prediction")
    return math.sqrt(alpha_bar) * noised - math.sqrt(1.0 - alpha_bar) * v


def predict_latent(clean, noise, sched: NoiseSchedule, t: int, predictor: NoisePredictor) -> np.ndarray:
    """Latent estimate from a noised latent and the predictor output.

    Follows the formula in the module docstring literally. At ``alpha_bar = 1``
    it returns ``clean``; as ``alpha_bar -> 0`` it tends to ``-v``, not to a
    clean-signal estimate.
    """
    ab = sched[t]
    x = noised_latent(clean, noise, ab)
    v = np.asarray(predictor(x, t), dtype=np.float64)
    if v.shape != x.shape:
        raise SizeError(f"predictor returned shape {v.shape}, expected {x.shape}")
    return latent_from_prediction(x, v, ab)


def denoising_loss(noise, predicted) -> float:
    """Mean squared error between the predictor output and the true noise."""
    noise, predicted = _same_shape(noise, predicted, "noise vs prediction")
    return float(np.mean((predicted - noise) ** 2))


# -- bilinear sampling -------------------------------------------------------


def _footprint(x, y, frame_size, h_lat, w_lat):
    """Four ``(row, col, weight)`` taps of a bilinear lookup at pixel ``(x, y)``.

    Latent cell ``j`` is centred at pixel ``(j + 0.5) * w / w_lat``; lookups past
    the outermost centres clamp to the edge cells.
    """
    w_px, h_px = frame_size
    u = min(max(x * w_lat / w_px - 0.5, 0.0), w_lat - 1.0)
    v = min(max(y * h_lat / h_px - 0.5, 0.0), h_lat - 1.0)
    c0 = min(int(math.floor(u)), w_lat - 1)
    r0 = min(int(math.floor(v)), h_lat - 1)
    c1 = min(c0 + 1, w_lat - 1)
    r1 = min(r0 + 1, h_lat - 1)
    fu = u - c0
    fv = v - r0
    return (
        (r0, c0, (1 - fu) * (1 - fv)),
        (r0, c1, fu * (1 - fv)),
        (r1, c0, (1 - fu) * fv),
        (r1, c1, fu * fv),
    )


def _latent(latent):
    a = np.asarray(latent, dtype=np.float64)
    if a.ndim != 4 or min(a.shape) < 1:
        raise SizeError(f"latent must be a non-empty (t, h, w, c) array, got shape {a.shape}")
    return a


def sample_feature_at(latent, point, frame_index: int, frame_size) -> np.ndarray:
    """Bilinearly interpolated feature vector of ``latent[frame_index]`` at pixel ``point``."""
    L = _latent(latent)
    t, h, w, _ = L.shape
    if not 0 <= frame_index < t:
        raise ParameterError(f"frame_index {frame_index} outside [0, {t})")
    x, y = point
    out = np.zeros(L.shape[-1])
    for r, c, wt in _footprint(float(x), float(y), frame_size, h, w):
        out += wt * L[frame_index, r, c]
    return out


def _tracking_terms(L, traj):
    t, h, w, _ = L.shape
    if traj.n_frames != t:
        raise SizeError(f"trajectory has {traj.n_frames} frames but latent has {t}")
    pairs = []
    for n in range(traj.n_tracks):
        vis = traj.visibility[n]
        for i in range(t - 1):
            if min(vis[i + 1], vis[i]) == 0:
                continue
            a = _footprint(*traj.points[n, i + 1], traj.frame_size, h, w)
            b = _footprint(*traj.points[n, i], traj.frame_size, h, w)
            pairs.append((i, a, b))
    return pairs


def _pair_diff(L, i, a, b):
    d = np.zeros(L.shape[-1])
    for r, c, wt in a:
        d += wt * L[i + 1, r, c]
    for r, c, wt in b:
        d -= wt * L[i, r, c]
    return d


def tracking_loss(latent, traj: TrajectorySet) -> float:
    """Mean over visible consecutive pairs of the squared feature change.

    A pair ``(t, t+1)`` counts only when the point is visible in both frames.
    Returns 0 when no pair is visible.
    """
    L = _latent(latent)
    pairs = _tracking_terms(L, traj)
    if not pairs:
        return 0.0
    total = 0.0
    for i, a, b in pairs:
        d = _pair_diff(L, i, a, b)
        total += float(d @ d)
    return total / len(pairs)


def tracking_loss_grad(latent, traj: TrajectorySet) -> np.ndarray:
    """Gradient of :func:`tracking_loss` with respect to every latent entry."""
    L = _latent(latent)
    pairs = _tracking_terms(L, traj)
    G = np.zeros_like(L)
    if not pairs:
        return G
    scale = 2.0 / len(pairs)
    for i, a, b in pairs:
        g = scale * _pair_diff(L, i, a, b)
        for r, c, wt in a:
            G[i + 1, r, c] += wt * g
        for r, c, wt in b:
            G[i, r, c] -= wt * g
    return G


def combined_loss(l_dl: float, l_tl: float, w: LossWeights | None = None) -> float:
    w = w or LossWeights()
    return w.lambda_dl * l_dl + w.lambda_tl * l_tl


# -- end-to-end demo ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LossTrace:
    """Per-step losses, each measured before that step's parameter update."""

    loss_dl: np.ndarray
    loss_tl: np.ndarray
    loss_total: np.ndarray

    def __len__(self):
        return len(self.loss_total)

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["step", "loss_dl", "loss_tl", "loss_total"])
        for s in range(len(self)):
            wr.writerow([s, repr(float(self.loss_dl[s])), repr(float(self.loss_tl[s])), repr(float(self.loss_total[s]))])
        return buf.getvalue()

    def __eq__(self, other):
        if not isinstance(other, LossTrace):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, f), getattr(other, f)) for f in ("loss_dl", "loss_tl", "loss_total")
        )

    __hash__ = None


DEMO_SHAPE = (8, 8, 8, 4)
DEMO_FRAME = (64, 64)
DEMO_STEPS = 1000
DEMO_T = 850
# base starts 5% above the noise-optimal linear gain 1/sqrt(1 - abar)
DEMO_BASE_GAIN = 1.05


def moving_blob_scene(t=8, h=8, w=8, c=4, frame_size=DEMO_FRAME):
    """A Gaussian blob with a fixed feature vector gliding across the latent grid.

    Returns the clean latent and a 5-point trajectory set that follows the
    blob centre and four neighbours, all visible.
    """
    wp, hp = frame_size
    feat = np.linspace(1.0, -0.5, c)
    ts = np.arange(t)
    cx = 1.5 + ts * (w - 3.0) / max(t - 1, 1)
    cy = h / 2 - 0.5 + 1.0 * np.sin(ts * np.pi / max(t - 1, 1))
    rows, cols = np.mgrid[0:h, 0:w]
    clean = np.empty((t, h, w, c))
    for i in ts:
        bump = np.exp(-((cols - cx[i]) ** 2 + (rows - cy[i]) ** 2) / (2 * 1.2**2))
        clean[i] = bump[..., None] * feat
    offsets = [(0.0, 0.0), (0.5, 0.0), (-0.5, 0.0), (0.0, 0.5), (0.0, -0.5)]
    pts = np.empty((len(offsets), t, 2))
    for n, (dx, dy) in enumerate(offsets):
        # latent cell coordinate -> pixel coordinate of that cell centre
        pts[n, :, 0] = (cx + dx + 0.5) * wp / w
        pts[n, :, 1] = (cy + dy + 0.5) * hp / h
    traj = TrajectorySet(pts, np.ones((len(offsets), t), dtype=np.uint8), frame_size)
    return clean, traj


def _demo_bases(c, alpha_bar):
    # fixed linear maps standing in for each block's own (frozen) computation
    b = math.sqrt(DEMO_BASE_GAIN / math.sqrt(1.0 - alpha_bar))
    return [b * np.eye(c), b * np.eye(c)]


def train_demo(
    seed: int = 0,
    steps: int = 200,
    weights: LossWeights | None = None,
    lr: float = 1e-2,
    mid_channels: int = 128,
    kernel_size: int = 3,
) -> LossTrace:
    """Fit a two-layer temporal-kernel noise predictor on a synthetic moving blob.

    The predictor is ``x -> K2(K1(x) + x B1) + (...) B2`` where each ``K`` is
    a kernel branch and each ``B`` a fixed linear base. A single noise draw and
    diffusion step are held fixed, so the problem is deterministic overfitting
    of one source clip, trained by plain gradient descent on the combined loss.
    The bases start close to the best purely linear noise predictor, so
    denoising alone has little reason to make the latent estimate consistent
    along the trajectory; only the tracking term does that.
    """
    if steps < 1:
        raise ParameterError(f"steps must be >= 1, got {steps}")
    weights = weights or LossWeights()
    t, h, w, c = DEMO_SHAPE
    clean, traj = moving_blob_scene(t, h, w, c)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(clean.shape)
    sched = cosine_alpha_bar(DEMO_STEPS)
    ab = sched[DEMO_T]
    x_t = noised_latent(clean, noise, ab)
    bases = _demo_bases(c, ab)
    layers = [init_params(c, mid_channels, kernel_size, int(s)) for s in rng.integers(0, 2**31, size=len(bases))]
    layers = [(p.k_down.copy(), p.k_up.copy()) for p in layers]
    sq = math.sqrt(1.0 - ab)

    dl_trace, tl_trace, tot_trace = [], [], []
    for _ in range(steps):
        acts = [x_t]
        for (kd, ku), B in zip(layers, bases):
            acts.append(kernel_forward(acts[-1], TemporalKernelParams(kd, ku), acts[-1] @ B))
        v = acts[-1]
        e_hat = latent_from_prediction(x_t, v, ab)
        l_dl = denoising_loss(noise, v)
        l_tl = tracking_loss(e_hat, traj)
        dl_trace.append(l_dl)
        tl_trace.append(l_tl)
        tot_trace.append(combined_loss(l_dl, l_tl, weights))

        g = weights.lambda_dl * 2.0 * (v - noise) / v.size
        if weights.lambda_tl:
            g = g - weights.lambda_tl * sq * tracking_loss_grad(e_hat, traj)
        updates = []
        for li in reversed(range(len(layers))):
            kd, ku = layers[li]
            x_in = acts[li]
            B = bases[li]
            gr = kernel_backward(x_in, TemporalKernelParams(kd, ku), x_in @ B, g)
            updates.append((li, gr.k_down, gr.k_up))
            g = gr.grid + gr.base @ B.T
        for li, gkd, gku in updates:
            kd, ku = layers[li]
            layers[li] = (kd - lr * gkd, ku - lr * gku)

    return LossTrace(np.array(dl_trace), np.array(tl_trace), np.array(tot_trace))
