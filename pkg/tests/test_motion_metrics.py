import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from detkit import NumericError, SizeError, TrajectorySet
from detkit.motion_metrics import (
    MotionFidelityConfig,
    edit_fidelity,
    frechet_bruteforce,
    frechet_distance,
    motion_fidelity,
    read_embeddings,
    temporal_consistency,
    velocity_cosine_mean,
    write_embeddings,
)

from conftest import random_trajectories

# 0.5 * exp(-1) +/- 0.5, evaluated with mpmath at 40 digits
SHIFTED_LINE_MF = 0.68393972058572116
REVERSED_LINE_MF = -0.31606027941427884


def _set(points, frame=(100, 100)):
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 2:
        pts = pts[None]
    return TrajectorySet(pts, np.ones(pts.shape[:2]), frame)


@pytest.mark.parametrize(
    "P, Q, expected",
    [
        ([(0, 0), (1, 0), (2, 0)], [(0, 0), (1, 0), (2, 0)], 0.0),
        ([(0, 0)], [(3, 4)], 5.0),
        ([(0, 0), (1, 0)], [(0, 1), (1, 1)], 1.0),
    ],
)
def test_frechet_examples(P, Q, expected):
    assert frechet_distance(P, Q) == expected
    assert frechet_bruteforce(P, Q) == expected


def test_bruteforce_degenerate_repetition():
    assert frechet_bruteforce([(0, 0), (0, 0)], [(0, 0)]) == 0.0


def test_frechet_known_textbook_case():
    # vertices (0,0),(1,1),(2,0) against (0,1),(2,-4): the last pair is forced at distance 4
    assert frechet_distance([[0, 0], [1, 1], [2, 0]], [[0, 1], [2, -4]]) == 4.0


def test_frechet_size_errors():
    with pytest.raises(SizeError):
        frechet_distance([], [(0, 0)])
    with pytest.raises(SizeError):
        frechet_bruteforce(np.zeros((9, 2)), np.zeros((2, 2)))


polyline = st.integers(1, 6).flatmap(
    lambda n: arrays(np.float64, (n, 2), elements=st.floats(-50, 50, allow_nan=False))
)


@settings(max_examples=200, deadline=None)
@given(polyline, polyline)
def test_frechet_matches_bruteforce(P, Q):
    assert abs(frechet_distance(P, Q) - frechet_bruteforce(P, Q)) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(polyline, polyline)
def test_frechet_symmetry_and_bounds(P, Q):
    d = frechet_distance(P, Q)
    assert d == frechet_distance(Q, P)
    assert frechet_distance(P, P) == 0.0
    assert d >= np.linalg.norm(P[0] - Q[0])
    assert d >= np.linalg.norm(P[-1] - Q[-1])


def test_frechet_random_five_point_pairs(rng):
    for _ in range(50):
        P, Q = rng.normal(size=(5, 2)), rng.normal(size=(5, 2))
        assert frechet_distance(P, Q) == pytest.approx(frechet_bruteforce(P, Q), abs=1e-12)


@pytest.mark.parametrize(
    "Ti, Tj, expected",
    [
        ([(0, 0), (1, 0), (2, 0)], [(0, 0), (1, 0), (2, 0)], 1.0),
        ([(0, 0), (1, 0)], [(1, 0), (0, 0)], -1.0),
        # velocities (1,0),(0,1) vs (1,0),(1,0): cosines 1 and 0
        ([(0, 0), (1, 0), (1, 1)], [(0, 0), (1, 0), (2, 0)], 0.5),
    ],
)
def test_velocity_cosine_examples(Ti, Tj, expected):
    assert velocity_cosine_mean(Ti, Tj) == expected


def test_zero_velocity_contributes_zero():
    assert velocity_cosine_mean([(0, 0), (0, 0), (1, 0)], [(0, 0), (1, 0), (2, 0)]) == 0.5


def test_velocity_cosine_length_mismatch():
    with pytest.raises(SizeError):
        velocity_cosine_mean([(0, 0), (1, 0)], [(0, 0), (1, 0), (2, 0)])


def test_motion_fidelity_examples():
    line = [(0, 0), (1, 0), (2, 0)]
    cfg = MotionFidelityConfig(alpha=0.5)
    assert motion_fidelity(_set(line), _set(line), cfg) == 1.0
    shifted = [(x, y + 1) for x, y in line]
    assert motion_fidelity(_set(line), _set(shifted), cfg) == pytest.approx(SHIFTED_LINE_MF, abs=1e-12)
    assert motion_fidelity(_set([(0, 0), (1, 0)]), _set([(1, 0), (0, 0)]), cfg) == pytest.approx(
        REVERSED_LINE_MF, abs=1e-12
    )


def test_motion_fidelity_mismatch_messages(rng):
    a = random_trajectories(rng, n=3, t=5)
    with pytest.raises(SizeError, match="trajectory count mismatch"):
        motion_fidelity(a, random_trajectories(rng, n=2, t=5))
    with pytest.raises(SizeError, match="trajectory length mismatch"):
        motion_fidelity(a, random_trajectories(rng, n=3, t=4))


def test_alpha_out_of_range():
    with pytest.raises(ValueError):
        MotionFidelityConfig(alpha=1.5)


# pixel coordinates on a 1/256 grid so translations are exact
pixel = st.integers(0, 50 * 256).map(lambda v: v / 256.0)
traj_pair = st.tuples(st.integers(1, 4), st.integers(2, 6)).flatmap(
    lambda nt: st.tuples(arrays(np.float64, (*nt, 2), elements=pixel), arrays(np.float64, (*nt, 2), elements=pixel))
)


@settings(max_examples=100, deadline=None)
@given(traj_pair, st.floats(0, 1))
def test_motion_fidelity_range(pair, alpha):
    a, b = (_set(p) for p in pair)
    m = motion_fidelity(a, b, MotionFidelityConfig(alpha))
    assert -1.0 - 1e-12 <= m <= 1.0 + 1e-12


@settings(max_examples=100, deadline=None)
@given(traj_pair, st.tuples(st.integers(-80, 80), st.integers(-80, 80)).map(lambda o: (o[0] / 4, o[1] / 4)))
def test_translation_only_moves_shape_term(pair, offset):
    a, b = (_set(p) for p in pair)
    moved = _set(b.points + np.array(offset))
    for n in range(a.n_tracks):
        assert velocity_cosine_mean(a.points[n], moved.points[n]) == pytest.approx(
            velocity_cosine_mean(a.points[n], b.points[n]), abs=1e-9
        )


@settings(max_examples=60, deadline=None)
@given(traj_pair, st.sampled_from([2, 3, 10]))
def test_normalized_metric_is_scale_free(pair, s):
    cfg = MotionFidelityConfig(0.5, normalize_by_diagonal=True)
    a, b = (_set(p, frame=(64, 48)) for p in pair)
    a2, b2 = (TrajectorySet(x.points * s, x.visibility, (64 * s, 48 * s)) for x in (a, b))
    assert motion_fidelity(a2, b2, cfg) == pytest.approx(motion_fidelity(a, b, cfg), abs=1e-12)


def test_motion_fidelity_one_iff_identical(rng):
    a = random_trajectories(rng)
    for _ in range(20):
        b = random_trajectories(rng)
        assert motion_fidelity(a, b) < 1.0
    assert motion_fidelity(a, a) == 1.0


def test_edit_fidelity_examples():
    p = np.array([1.0, 2.0, -1.0])
    assert edit_fidelity(np.tile(p, (4, 1)), p) == 1.0
    assert edit_fidelity([[2.0, -1.0, 0.0], [0.0, 1.0, 2.0]], p) == 0.0
    assert edit_fidelity([[1.0, 0.0], [0.0, 1.0]], [1.0, 0.0]) == 0.5


def test_temporal_consistency_examples():
    assert temporal_consistency([[1.0, 2.0]] * 3) == 1.0
    assert temporal_consistency([[1, 0], [0, 1], [1, 0], [0, 1]]) == 0.0
    r = 1 / math.sqrt(2)
    assert temporal_consistency([[1, 0], [r, r]]) == pytest.approx(0.707106781187, abs=1e-12)


def test_embedding_errors():
    with pytest.raises(SizeError):
        temporal_consistency([[1.0, 0.0]])
    with pytest.raises(NumericError):
        temporal_consistency([[1.0, 0.0], [0.0, 0.0]])
    with pytest.raises(NumericError):
        edit_fidelity([[1.0, 0.0]], [0.0, 0.0])
    with pytest.raises(SizeError):
        edit_fidelity([[1.0, 0.0]], [1.0, 0.0, 0.0])


@settings(max_examples=60, deadline=None)
@given(
    arrays(np.float64, (5, 3), elements=st.floats(0.1, 10)),
    arrays(np.float64, (5,), elements=st.floats(0.01, 100)),
)
def test_embedding_scores_scale_invariant(F, scales):
    p = F[0] + 1.0
    assert edit_fidelity(F * scales[:, None], p * scales[0]) == pytest.approx(edit_fidelity(F, p), abs=1e-12)
    assert temporal_consistency(F * scales[:, None]) == pytest.approx(temporal_consistency(F), abs=1e-12)


def test_emb1_round_trip(tmp_path, rng):
    V = rng.normal(size=(7, 5)).astype(np.float32)
    write_embeddings(tmp_path / "e.emb", V)
    raw = (tmp_path / "e.emb").read_bytes()
    assert raw[:4] == b"EMB1" and len(raw) == 12 + 4 * 35
    np.testing.assert_array_equal(read_embeddings(tmp_path / "e.emb"), V.astype(np.float64))


def test_emb1_bad_files(tmp_path):
    from detkit import ParseError

    (tmp_path / "a").write_bytes(b"EMB2" + b"\x00" * 8)
    (tmp_path / "b").write_bytes(b"EMB1" + (2).to_bytes(4, "little") + (2).to_bytes(4, "little") + b"\x00" * 4)
    for name in "ab":
        with pytest.raises(ParseError):
            read_embeddings(tmp_path / name)
