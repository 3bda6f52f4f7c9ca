"""
Annotating a source video
=========================

Sample query points from a subject mask, cluster synthetic trajectories,
and map the chosen cluster count to a difficulty level.
"""

import numpy as np

from detkit import classify_difficulty, distance_weighted_sample, select_k
from detkit.trajectory_model import ForegroundMask

# a square torso with a thin arm sticking out far to the right
bits = np.zeros((40, 70), dtype=np.uint8)
bits[10:30, 5:25] = 1
bits[19, 55:58] = 1
mask = ForegroundMask(bits)
print("foreground pixels:", mask.foreground_count)

pts = distance_weighted_sample(mask, 8, seed=0)
print("first 8 query points (x, y):")
print(pts)

# how often does the arm show up in the first two draws?
hits = sum(any(x >= 55 for x, _ in distance_weighted_sample(mask, 2, s)) for s in range(200))
print(f"arm among the first two points in {hits}/200 seeds")

# trajectories that move as k rigid groups
rng = np.random.default_rng(1)
for true_k in (2, 5, 8):
    offsets = rng.uniform(-40, 40, size=(true_k, 1, 2)) * np.arange(6)[None, :, None]
    starts = rng.uniform(0, 200, size=(true_k, 1, 2))
    groups = [starts[g] + offsets[g] + rng.normal(0, 0.5, size=(15, 6, 2)) for g in range(true_k)]
    X = np.concatenate(groups).reshape(15 * true_k, -1)
    fit, scores = select_k(X, 2, 12, seed=0, return_scores=True)
    print(f"true k={true_k}: chose k={fit.k} (silhouette {fit.silhouette:.3f}) -> {classify_difficulty(fit.k)}")
