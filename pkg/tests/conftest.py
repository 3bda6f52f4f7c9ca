import numpy as np
import pytest

from detkit import TrajectorySet


def central_diff(f, x, eps=1e-5):
    """Central finite-difference gradient of scalar ``f`` at array ``x``."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + eps
        hi = f(x)
        x[i] = old - eps
        lo = f(x)
        x[i] = old
        g[i] = (hi - lo) / (2 * eps)
    return g


def rel_err(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    scale = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / scale)


def random_trajectories(rng, n=4, t=6, frame=(64, 48), visible_p=1.0):
    pts = rng.uniform(0, 1, size=(n, t, 2)) * np.array(frame)
    vis = (rng.uniform(size=(n, t)) < visible_p).astype(np.uint8)
    return TrajectorySet(pts, vis, frame)


def blob_trajectories(rng, n_groups, per_group=20, t=4, sigma=0.1, spacing=10.0, frame=(512, 512)):
    """Trajectory set whose flattened features form ``n_groups`` tight Gaussian blobs."""
    pts = []
    for g in range(n_groups):
        start = np.array([spacing * g + 20.0, 20.0 + 3.0 * g])
        path = start + np.arange(t)[:, None] * np.array([1.0, 0.5 * (g % 3)])
        pts.append(path[None] + rng.normal(0, sigma, size=(per_group, t, 2)))
    pts = np.concatenate(pts)
    return TrajectorySet(pts, np.ones(pts.shape[:2], dtype=np.uint8), frame)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS, key=lambda k: int(k.split()[0][2:])):
        ok, detail = RESULTS[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key}: {detail}")
