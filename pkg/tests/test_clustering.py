import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import silhouette_score as sk_silhouette

from detkit import ParameterError
from detkit.clustering import (
    Difficulty,
    classify_difficulty,
    distance_weighted_sample,
    isolation_weights,
    kmeans,
    select_k,
    silhouette_score,
    trajectory_features,
)
from detkit.trajectory_model import ForegroundMask

from conftest import blob_trajectories, random_trajectories


def gaussian_blobs(seed, centers, per=20, sigma=0.1):
    rng = np.random.default_rng(seed)
    return np.concatenate([rng.normal(c, sigma, size=(per, len(c))) for c in centers])


THREE = ([0.0, 0.0], [10.0, 0.0], [5.0, 10.0 * np.sqrt(3) / 2])
TWO = ([0.0, 0.0], [10.0, 0.0])


def limb_mask():
    """20x20 blob plus a 1x3 limb whose nearest pixel is 30 px from the blob edge."""
    bits = np.zeros((40, 70), dtype=np.uint8)
    bits[10:30, 5:25] = 1
    bits[19, 55:58] = 1
    return ForegroundMask(bits)


# -- features ----------------------------------------------------------------


def test_trajectory_features(rng):
    traj = random_trajectories(rng, n=3, t=2)
    X = trajectory_features(traj)
    assert X.shape == (3, 4)
    np.testing.assert_array_equal(X.reshape(3, 2, 2), traj.points)
    np.testing.assert_array_equal(trajectory_features(np.array([[[0, 0], [1, 2]]], float)), [[0, 0, 1, 2]])


# -- k-means -----------------------------------------------------------------


def _best_partition(X, k):
    """Exhaustive search over all labelings for the minimum-inertia one."""
    best = None
    for labels in itertools.product(range(k), repeat=len(X)):
        labels = np.array(labels)
        if len(set(labels)) != k:
            continue
        cost = sum(((X[labels == c] - X[labels == c].mean(0)) ** 2).sum() for c in range(k))
        if best is None or cost < best[0] - 1e-12:
            best = (cost, labels)
    return best


def test_kmeans_1d_matches_exhaustive_optimum():
    X = np.array([0.0, 0.1, 10.0, 10.1])
    cost, labels = _best_partition(X[:, None], 2)
    fit = kmeans(X, 2, seed=0)
    assert fit.inertia == pytest.approx(cost, abs=1e-12)
    assert sorted(fit.centroids[:, 0]) == pytest.approx([0.05, 10.05], abs=1e-12)
    # same partition up to label permutation
    assert len({(a, b) for a, b in zip(fit.assignments, labels)}) == 2


def test_kmeans_k_equals_n():
    X = np.arange(5.0)[:, None]
    fit = kmeans(X, 5, seed=3)
    assert sorted(fit.assignments) == [0, 1, 2, 3, 4]
    assert fit.silhouette == 0.0
    assert fit.inertia == 0.0


def test_kmeans_deterministic():
    X = gaussian_blobs(0, THREE)
    assert kmeans(X, 4, seed=9).same_as(kmeans(X, 4, seed=9))


def test_kmeans_errors():
    with pytest.raises(ParameterError):
        kmeans(np.zeros((3, 2)), 4, 0)
    with pytest.raises(ValueError):
        kmeans(np.array([[0.0], [np.nan]]), 1, 0)


def test_kmeans_identical_points_keep_every_cluster():
    fit = kmeans(np.ones((6, 2)), 3, seed=0)
    assert set(fit.assignments) == {0, 1, 2}


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6), st.integers(6, 30))
def test_kmeans_invariants(seed, k, n):
    X = np.random.default_rng(seed).normal(size=(n, 3))
    fit = kmeans(X, k, seed)
    assert set(fit.assignments.tolist()) == set(range(k))
    for c in range(k):
        np.testing.assert_allclose(fit.centroids[c], X[fit.assignments == c].mean(0), atol=1e-9)
    trace = np.array(fit.inertia_trace)
    assert np.all(np.diff(trace) <= 1e-9 * max(1.0, trace[0]))
    assert fit.n_iter <= 300


# -- silhouette --------------------------------------------------------------


def test_silhouette_two_tight_pairs():
    X = np.array([[0, 0], [0, 0.1], [100, 0], [100, 0.1]])
    labels = [0, 0, 1, 1]
    s = silhouette_score(X, labels)
    assert s > 0.99
    assert s == pytest.approx(sk_silhouette(X, labels), abs=1e-12)


def test_silhouette_all_identical_is_zero():
    assert silhouette_score(np.zeros((4, 2)), [0, 0, 1, 1]) == 0.0


def test_silhouette_needs_two_clusters():
    with pytest.raises(ParameterError):
        silhouette_score(np.zeros((3, 2)), [1, 1, 1])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 5))
def test_silhouette_matches_sklearn(seed, k):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(25, 3))
    labels = np.concatenate([np.arange(k), rng.integers(0, k, size=25 - k)])
    assert silhouette_score(X, labels) == pytest.approx(sk_silhouette(X, labels), abs=1e-10)


def test_silhouette_with_singletons_matches_sklearn():
    X = np.array([[0.0], [0.2], [5.0], [9.0], [9.1]])
    labels = [0, 0, 1, 2, 2]
    assert silhouette_score(X, labels) == pytest.approx(sk_silhouette(X, labels), abs=1e-12)


def test_random_labels_on_one_blob_score_near_zero():
    for seed in range(100):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(60, 2))
        labels = rng.permutation(np.arange(60) % 3)
        assert abs(silhouette_score(X, labels)) < 0.2


# -- k selection -------------------------------------------------------------


def test_select_k_three_blobs():
    best, scores = select_k(gaussian_blobs(0, THREE), 2, 8, seed=0, return_scores=True)
    assert best.k == 3
    assert best.silhouette == max(scores.values())
    assert all(best.silhouette >= s for s in scores.values())


def test_select_k_two_blobs():
    assert select_k(gaussian_blobs(1, TWO), 2, 8, seed=1).k == 2


def test_single_blob_is_weak_structure():
    # flattened 4-frame trajectories, i.e. 8-D features
    for seed in range(20):
        X = np.random.default_rng(seed).normal(0, 0.1, size=(60, 8))
        fit = select_k(X, 2, 4, seed)
        assert 2 <= fit.k <= 4
        assert fit.silhouette < 0.35 and fit.weak_structure


def test_select_k_ties_prefer_smaller_k():
    # four identical points: every k scores silhouette 0
    assert select_k(np.zeros((4, 2)), 2, 4, seed=0).k == 2


def test_select_k_deterministic_and_range_checked():
    X = gaussian_blobs(5, THREE)
    assert select_k(X, 2, 6, 11).same_as(select_k(X, 2, 6, 11))
    with pytest.raises(ParameterError):
        select_k(X, 1, 4, 0)
    with pytest.raises(ParameterError):
        select_k(X[:3], 2, 4, 0)


def test_select_k_on_trajectory_blobs(rng):
    traj = blob_trajectories(rng, 3)
    assert select_k(trajectory_features(traj), 2, 8, seed=0).k == 3


# -- difficulty --------------------------------------------------------------


@pytest.mark.parametrize("k, level", [(1, "easy"), (2, "easy"), (3, "easy"), (4, "medium"), (5, "medium"), (6, "medium"), (7, "hard"), (8, "hard"), (40, "hard")])
def test_classify_difficulty(k, level):
    assert classify_difficulty(k) is Difficulty(level)


def test_classify_difficulty_monotone_and_total():
    order = {Difficulty.EASY: 0, Difficulty.MEDIUM: 1, Difficulty.HARD: 2}
    levels = [order[classify_difficulty(k)] for k in range(1, 100)]
    assert levels == sorted(levels)
    for bad in (0, -3, 2.5, True):
        with pytest.raises(ParameterError):
            classify_difficulty(bad)


# -- distance-weighted sampling ---------------------------------------------


def test_single_pixel_mask():
    bits = np.zeros((5, 5), np.uint8)
    bits[2, 3] = 1
    for seed in range(5):
        np.testing.assert_array_equal(distance_weighted_sample(ForegroundMask(bits), 1, seed), [[3, 2]])


def test_exhaustion_returns_all_pixels_in_row_major_order():
    bits = np.array([[0, 1, 1], [1, 0, 0]], np.uint8)
    out = distance_weighted_sample(ForegroundMask(bits), 10, seed=4)
    np.testing.assert_array_equal(out, [[1, 0], [2, 0], [0, 1]])


def test_empty_mask_rejected():
    with pytest.raises(ParameterError):
        distance_weighted_sample(ForegroundMask(np.zeros((3, 3), np.uint8)), 1, 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 30))
def test_samples_are_distinct_foreground_pixels(seed, count):
    bits = (np.random.default_rng(seed).uniform(size=(12, 15)) < 0.3).astype(np.uint8)
    bits[0, 0] = 1
    mask = ForegroundMask(bits)
    out = distance_weighted_sample(mask, count, seed)
    assert len(out) == min(count, mask.foreground_count)
    assert len({tuple(p) for p in out}) == len(out)
    assert all(bits[y, x] == 1 for x, y in out)
    np.testing.assert_array_equal(out, distance_weighted_sample(mask, count, seed))


def _reference_isolation(P, k=32):
    """Full distance matrix, sorted; no KD-tree."""
    D = np.sqrt(((P[:, None, :] - P[None, :, :]) ** 2).sum(-1))
    D.sort(axis=1)
    return D[:, 1 : k + 1].mean(1)


def test_isolation_weights_match_reference():
    P = limb_mask().foreground_pixels().astype(float)
    np.testing.assert_allclose(isolation_weights(P), _reference_isolation(P), rtol=1e-12)


def _exact_limb_probability(mask):
    """P(limb among the first two draws), by enumerating every first draw."""
    P = mask.foreground_pixels().astype(float)
    limb = P[:, 0] >= 50
    w = _reference_isolation(P) ** 2
    p1 = w / w.sum()
    prob = p1[limb].sum()
    for i in np.flatnonzero(~limb):
        w2 = w * ((P - P[i]) ** 2).sum(1)
        w2[i] = 0.0
        prob += p1[i] * w2[limb].sum() / w2.sum()
    return prob


def test_limb_hit_rate_matches_exact_probability():
    mask = limb_mask()
    exact = _exact_limb_probability(mask)
    hits = sum(any(x >= 50 for x, _ in distance_weighted_sample(mask, 2, seed)) for seed in range(1000))
    # binomial standard error at n=1000 is below 0.01
    assert abs(hits / 1000 - exact) < 0.03
    assert exact >= 0.95
