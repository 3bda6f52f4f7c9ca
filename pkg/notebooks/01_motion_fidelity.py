"""
Motion fidelity on hand-made trajectories
=========================================

Build a few toy track sets and see how the Frechet term and the velocity
cosine term each react to shifts, time reversal and noise.
"""

import numpy as np

from detkit import MotionFidelityConfig, TrajectorySet, frechet_distance, motion_fidelity, velocity_cosine_mean

# a straight line walked left to right, and the same line one pixel lower
line = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
print("frechet(line, line + (0, 1)) =", frechet_distance(line, line + [0, 1]))
print("velocity cosine of the same pair =", velocity_cosine_mean(line, line + [0, 1]))


def as_set(points, frame=(100, 100)):
    points = np.asarray(points, dtype=float)
    return TrajectorySet(points, np.ones(points.shape[:2]), frame)


raw = MotionFidelityConfig(alpha=0.5)
a = as_set([line])
print("shifted:", motion_fidelity(a, as_set([line + [0, 1]]), raw))
print("reversed:", motion_fidelity(a, as_set([line[::-1]]), raw))

# alpha slides between pure shape agreement and pure direction agreement
for alpha in (0.0, 0.25, 0.5, 0.75, 1.0):
    m = motion_fidelity(a, as_set([line[::-1]]), MotionFidelityConfig(alpha=alpha))
    print(f"alpha={alpha:.2f}  M(line, reversed line)={m:+.4f}")

# jitter a random walk and watch the score fall off
rng = np.random.default_rng(0)
walk = np.cumsum(rng.normal(0, 2.0, size=(10, 16, 2)), axis=1) + 50
src = as_set(walk)
norm = MotionFidelityConfig(alpha=0.5, normalize_by_diagonal=True)
for sigma in (0.0, 0.5, 2.0, 8.0):
    gen = as_set(walk + rng.normal(0, sigma, size=walk.shape))
    print(f"noise sigma={sigma:4.1f}  M={motion_fidelity(src, gen, norm):.4f}")
