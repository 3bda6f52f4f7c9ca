"""
The shared temporal kernel
==========================

A fresh kernel adds nothing to its base, gradients match finite
differences, and trailing layers can be dropped at inference time.
"""

import numpy as np

from detkit import LayerStackConfig, TemporalKernelParams, apply_stack, init_params, kernel_backward, kernel_forward

rng = np.random.default_rng(0)
x = rng.normal(size=(8, 4, 4, 6))
base = rng.normal(size=x.shape)

p = init_params(c=6, m=16, k=3, seed=0)
print("fresh kernel is identity on base:", np.array_equal(kernel_forward(x, p, base), base))

# give the up projection some weight and check one gradient entry by hand
p = TemporalKernelParams(p.k_down, rng.normal(0, 0.1, size=p.k_up.shape))
up = rng.normal(size=x.shape)
g = kernel_backward(x, p, base, up)
eps = 1e-6
kd = p.k_down.copy()
kd[1, 2, 3] += eps
plus = np.sum(up * kernel_forward(x, TemporalKernelParams(kd, p.k_up), base))
kd[1, 2, 3] -= 2 * eps
minus = np.sum(up * kernel_forward(x, TemporalKernelParams(kd, p.k_up), base))
print("analytic dL/dk_down[1,2,3] =", g.k_down[1, 2, 3])
print("numeric  dL/dk_down[1,2,3] =", (plus - minus) / (2 * eps))

# a deep stack where the last 65% of the kernels are skipped at inference
cfg = LayerStackConfig(42, 0.65)
print(f"dropping {cfg.num_dropped} of {cfg.num_layers} layers: {cfg.dropped.start}..{cfg.dropped.stop - 1}")
layers = [TemporalKernelParams(rng.normal(0, 0.05, (3, 6, 4)), rng.normal(0, 0.05, (3, 4, 6))) for _ in range(42)]
bases = [lambda z: 0.9 * z] * 42
train = apply_stack(x, layers, bases, cfg, "train")
infer = apply_stack(x, layers, bases, cfg, "inference")
print("max |train - inference| =", np.abs(train - infer).max())
