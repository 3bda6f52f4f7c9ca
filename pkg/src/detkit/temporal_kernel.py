"""Shared temporal kernel: a 1-D temporal convolution adapter with shared spatial weights.

Feature grids are ``(t, h, w, c)`` float64 arrays. Every convolution here runs
along the time axis only, with the same weights at every ``(h, w)`` site and
zero padding so the temporal length is preserved. Kernels are indexed by tap
``j`` in ``0..k-1``, which multiplies the input at time offset ``j - (k-1)/2``.
"""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np
from scipy.special import ndtr

from .errors import ParameterError, ParseError, SizeError

__all__ = [
    "TemporalKernelParams",
    "KernelGrads",
    "LayerStackConfig",
    "gelu",
    "gelu_grad",
    "temporal_conv",
    "smooth_eq1",
    "kernel_forward",
    "kernel_backward",
    "init_params",
    "apply_stack",
    "save_params",
    "load_params",
]

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def gelu(x):
    """Exact GELU ``x * Phi(x)``; scalars in, scalars out."""
    y = np.asarray(x, dtype=np.float64)
    out = y * ndtr(y)
    return float(out) if out.ndim == 0 else out


def gelu_grad(x):
    """Derivative ``Phi(x) + x * phi(x)``."""
    y = np.asarray(x, dtype=np.float64)
    out = ndtr(y) + y * _INV_SQRT_2PI * np.exp(-0.5 * y * y)
    return float(out) if out.ndim == 0 else out


def _grid(a, name="grid"):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 4 or min(a.shape) < 1:
        raise SizeError(f"{name} must be a non-empty (t, h, w, c) array, got shape {a.shape}")
    return a


@dataclass(frozen=True, eq=False)
class TemporalKernelParams:
    """Down projection ``(k, c, m)`` and up projection ``(k, m, c)`` weights."""

    k_down: np.ndarray
    k_up: np.ndarray

    def __post_init__(self):
        kd = np.asarray(self.k_down, dtype=np.float64)
        ku = np.asarray(self.k_up, dtype=np.float64)
        if kd.ndim != 3 or ku.ndim != 3:
            raise SizeError("k_down and k_up must be 3-D")
        k, c, m = kd.shape
        if ku.shape != (k, m, c):
            raise SizeError(f"k_up must have shape {(k, m, c)}, got {ku.shape}")
        if k % 2 != 1:
            raise ParameterError(f"kernel size must be odd, got {k}")
        if not (np.all(np.isfinite(kd)) and np.all(np.isfinite(ku))):
            raise ParameterError("kernel weights must be finite")
        object.__setattr__(self, "k_down", kd)
        object.__setattr__(self, "k_up", ku)

    @property
    def kernel_size(self) -> int:
        return self.k_down.shape[0]

    @property
    def in_channels(self) -> int:
        return self.k_down.shape[1]

    @property
    def mid_channels(self) -> int:
        return self.k_down.shape[2]

    def __eq__(self, other):
        if not isinstance(other, TemporalKernelParams):
            return NotImplemented
        return np.array_equal(self.k_down, other.k_down) and np.array_equal(self.k_up, other.k_up)

    __hash__ = None


@dataclass(frozen=True)
class KernelGrads:
    grid: np.ndarray
    k_down: np.ndarray
    k_up: np.ndarray
    base: np.ndarray

    @property
    def params(self) -> TemporalKernelParams:
        return TemporalKernelParams(self.k_down, self.k_up)


def temporal_conv(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Zero-padded "same" convolution along time: ``y[i] = sum_j x[i + j - r] @ kernel[j]``."""
    k, cin, cout = kernel.shape
    if x.shape[-1] != cin:
        raise SizeError(f"channel mismatch: input has {x.shape[-1]}, kernel expects {cin}")
    r = (k - 1) // 2
    t = x.shape[0]
    xp = np.pad(x, [(r, r)] + [(0, 0)] * (x.ndim - 1))
    y = np.zeros(x.shape[:-1] + (cout,))
    for j in range(k):
        y += xp[j : j + t] @ kernel[j]
    return y


def _conv_backward(x, kernel, gy):
    """Gradients of ``temporal_conv(x, kernel)`` given upstream ``gy``."""
    k = kernel.shape[0]
    r = (k - 1) // 2
    t = x.shape[0]
    xp = np.pad(x, [(r, r)] + [(0, 0)] * (x.ndim - 1))
    gxp = np.zeros_like(xp)
    gk = np.empty_like(kernel)
    cin = x.shape[-1]
    cout = gy.shape[-1]
    gflat = gy.reshape(-1, cout)
    for j in range(k):
        gk[j] = xp[j : j + t].reshape(-1, cin).T @ gflat
        gxp[j : j + t] += gy @ kernel[j].T
    return gxp[r : r + t], gk


def smooth_eq1(grid, kernel) -> np.ndarray:
    """Residual temporal smoothing ``grid + temporal_conv(grid, kernel)``.

    ``kernel`` has shape ``(k, c, c)`` with odd ``k``.
    """
    x = _grid(grid)
    K = np.asarray(kernel, dtype=np.float64)
    if K.ndim != 3 or K.shape[1:] != (x.shape[-1], x.shape[-1]):
        raise SizeError(f"kernel must have shape (k, {x.shape[-1]}, {x.shape[-1]}), got {K.shape}")
    if K.shape[0] % 2 != 1:
        raise ParameterError(f"kernel size must be odd, got {K.shape[0]}")
    return x + temporal_conv(x, K)


def _check(grid, params, base):
    x = _grid(grid)
    b = _grid(base, "base")
    if b.shape != x.shape:
        raise SizeError(f"base shape {b.shape} != grid shape {x.shape}")
    if x.shape[-1] != params.in_channels:
        raise SizeError(f"grid has {x.shape[-1]} channels, params expect {params.in_channels}")
    return x, b


def kernel_forward(grid, params: TemporalKernelParams, base) -> np.ndarray:
    """``conv(gelu(conv(grid, k_down)), k_up) + base``.

    ``base`` stands in for the attention output the kernel branch is added to.
    """
    x, b = _check(grid, params, base)
    h = temporal_conv(x, params.k_down)
    return temporal_conv(gelu(h), params.k_up) + b


def kernel_backward(grid, params: TemporalKernelParams, base, upstream_grad) -> KernelGrads:
    """Analytic gradients of :func:`kernel_forward` w.r.t. grid, weights and base."""
    x, b = _check(grid, params, base)
    g = np.asarray(upstream_grad, dtype=np.float64)
    if g.shape != x.shape:
        raise SizeError(f"upstream gradient shape {g.shape} != grid shape {x.shape}")
    h = temporal_conv(x, params.k_down)
    ga, gku = _conv_backward(gelu(h), params.k_up, g)
    gx, gkd = _conv_backward(x, params.k_down, ga * gelu_grad(h))
    return KernelGrads(grid=gx, k_down=gkd, k_up=gku, base=g)


def init_params(c: int, m: int, k: int, seed: int) -> TemporalKernelParams:
    """Uniform ``k_down`` in ``+-1/sqrt(k*c)``; ``k_up`` zero so the branch starts dead."""
    if c < 1 or m < 1 or k < 1:
        raise ParameterError(f"dimensions must be positive, got c={c}, m={m}, k={k}")
    bound = 1.0 / math.sqrt(k * c)
    rng = np.random.default_rng(seed)
    k_down = rng.uniform(-bound, bound, size=(k, c, m))
    return TemporalKernelParams(k_down, np.zeros((k, m, c)))


@dataclass(frozen=True)
class LayerStackConfig:
    """How many blocks carry a kernel and which trailing fraction is skipped at inference."""

    num_layers: int
    drop_fraction: float = 0.0

    def __post_init__(self):
        if self.num_layers < 1:
            raise ParameterError(f"num_layers must be >= 1, got {self.num_layers}")
        if not 0.0 <= self.drop_fraction <= 1.0:
            raise ParameterError(f"drop_fraction must lie in [0, 1], got {self.drop_fraction}")

    @property
    def num_dropped(self) -> int:
        # tolerance so that e.g. 0.29 * 100 counts as 29, not 28.999...
        return int(math.floor(self.drop_fraction * self.num_layers + 1e-9))

    @property
    def dropped(self) -> range:
        return range(self.num_layers - self.num_dropped, self.num_layers)

    def is_dropped(self, layer: int) -> bool:
        return layer in self.dropped


Base = Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]


def apply_stack(
    grid,
    layers: Sequence[TemporalKernelParams],
    bases: Sequence[Base],
    cfg: LayerStackConfig,
    mode: str = "train",
) -> np.ndarray:
    """Run ``x <- kernel_forward(x, layers[l], base_l)`` for every layer in order.

    A base is either a fixed grid or a callable applied to the current
    features (the block's own computation). In ``"inference"`` mode the
    kernel branch of every dropped layer is skipped and only its base remains.
    """
    if mode not in ("train", "inference"):
        raise ParameterError(f"mode must be 'train' or 'inference', got {mode!r}")
    if len(layers) != cfg.num_layers or len(bases) != cfg.num_layers:
        raise SizeError(f"expected {cfg.num_layers} layers and bases, got {len(layers)} and {len(bases)}")
    x = _grid(grid)
    for i, (params, base) in enumerate(zip(layers, bases)):
        b = base(x) if callable(base) else base
        if mode == "inference" and cfg.is_dropped(i):
            x = _grid(b, "base")
            if x.shape[-1] != params.in_channels:
                raise SizeError(f"base of layer {i} has {x.shape[-1]} channels, expected {params.in_channels}")
        else:
            x = kernel_forward(x, params, b)
    return x


# -- DETK checkpoints --------------------------------------------------------

_DETK_MAGIC = b"DETK"


def save_params(params: TemporalKernelParams, path: str | os.PathLike) -> None:
    """Write ``DETK``, uint32 ``(k, c, m)``, then ``k_down`` and ``k_up`` as float64 LE."""
    k, c, m = params.k_down.shape
    with open(path, "wb") as fh:
        fh.write(_DETK_MAGIC)
        fh.write(struct.pack("<III", k, c, m))
        fh.write(np.ascontiguousarray(params.k_down, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(params.k_up, dtype="<f8").tobytes())


def load_params(path: str | os.PathLike) -> TemporalKernelParams:
    with open(path, "rb") as fh:
        data = fh.read()
    where = os.fspath(path)
    if data[:4] != _DETK_MAGIC:
        raise ParseError(f"{where}: bad magic {data[:4]!r}, expected {_DETK_MAGIC!r}")
    if len(data) < 16:
        raise ParseError(f"{where}: truncated header")
    k, c, m = struct.unpack("<III", data[4:16])
    n = k * c * m
    if len(data) != 16 + 16 * n:
        raise ParseError(f"{where}: expected {16 * n} payload bytes, got {len(data) - 16}")
    w = np.frombuffer(data[16:], dtype="<f8").astype(np.float64)
    return TemporalKernelParams(w[:n].reshape(k, c, m), w[n:].reshape(k, m, c))
