"""Trajectories, visibility flags and foreground masks, plus their file formats.

Trajectory files are JSON::

    {"frame_size": [w, h],
     "trajectories": [{"points": [[x, y], ...], "visibility": [1, 0, ...]}, ...]}

Masks are 8-bit PGM rasters (``P2`` plain or ``P5`` binary).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import ParseError, SizeError, ValidationError

__all__ = [
    "TrajectorySet",
    "ForegroundMask",
    "load_trajectories",
    "save_trajectories",
    "trajectories_from_json",
    "trajectories_to_json",
    "velocities",
    "load_mask",
    "save_mask",
    "parse_pgm",
]


def _frozen(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TrajectorySet:
    """``N`` tracked points over ``T`` frames.

    Parameters
    ----------
    points : array_like, shape (N, T, 2)
        Pixel coordinates, ``x`` to the right and ``y`` down.
    visibility : array_like, shape (N, T)
        1 where the point is observed, 0 where it is occluded.
    frame_size : (int, int)
        ``(width, height)`` of the frame the coordinates refer to.
    """

    points: np.ndarray
    visibility: np.ndarray
    frame_size: tuple[int, int]

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 3 or pts.shape[2] != 2:
            raise ValidationError(f"points must have shape (N, T, 2), got {pts.shape}")
        n, t, _ = pts.shape
        if n < 1:
            raise ValidationError("need at least one trajectory (N >= 1)")
        if t < 2:
            raise ValidationError(f"need at least two frames (T >= 2), got T={t}")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("coordinates must be finite")

        vis = np.asarray(self.visibility)
        if vis.shape != (n, t):
            raise ValidationError(f"visibility must have shape {(n, t)}, got {vis.shape}")
        if not np.all((vis == 0) | (vis == 1)):
            raise ValidationError("visibility not in {0,1}")

        try:
            w, h = (int(v) for v in self.frame_size)
        except (TypeError, ValueError):
            raise ValidationError(f"frame_size must be (width, height), got {self.frame_size!r}") from None
        if w <= 0 or h <= 0 or (w, h) != tuple(self.frame_size):
            raise ValidationError(f"frame_size must be positive integers, got {self.frame_size!r}")

        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "visibility", _frozen(vis.astype(np.uint8)))
        object.__setattr__(self, "frame_size", (w, h))

    @property
    def n_tracks(self) -> int:
        return self.points.shape[0]

    @property
    def n_frames(self) -> int:
        return self.points.shape[1]

    @property
    def diagonal(self) -> float:
        w, h = self.frame_size
        return float(np.hypot(w, h))

    def scaled(self, factor: float) -> "TrajectorySet":
        """Coordinates multiplied by ``factor``; frame size is left unchanged."""
        return TrajectorySet(self.points * factor, self.visibility, self.frame_size)

    def __eq__(self, other):
        if not isinstance(other, TrajectorySet):
            return NotImplemented
        return (
            self.frame_size == other.frame_size
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.visibility, other.visibility)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class ForegroundMask:
    """Binary raster, ``bits[y, x] == 1`` on the foreground."""

    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.ndim != 2 or b.shape[0] < 1 or b.shape[1] < 1:
            raise ValidationError(f"mask must be a non-empty 2-D array, got shape {b.shape}")
        if not np.all((b == 0) | (b == 1)):
            raise ValidationError("mask bits not in {0,1}")
        object.__setattr__(self, "bits", _frozen(b.astype(np.uint8)))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def foreground_count(self) -> int:
        return int(self.bits.sum())

    def foreground_pixels(self) -> np.ndarray:
        """``(P, 2)`` integer ``(x, y)`` coordinates in row-major order."""
        ys, xs = np.nonzero(self.bits)
        return np.stack([xs, ys], axis=1).astype(np.int64)

    def __eq__(self, other):
        if not isinstance(other, ForegroundMask):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    __hash__ = None


# -- trajectory JSON ---------------------------------------------------------


def _number(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"{where}: expected a number, got {v!r}")
    return float(v)


def trajectories_from_json(doc) -> TrajectorySet:
    """Build a validated :class:`TrajectorySet` from a decoded JSON object."""
    if not isinstance(doc, dict):
        raise ParseError("top level: expected an object")
    for key in ("frame_size", "trajectories"):
        if key not in doc:
            raise ParseError(f"top level: missing field {key!r}")

    fs = doc["frame_size"]
    if not isinstance(fs, list) or len(fs) != 2:
        raise ParseError("frame_size: expected [width, height]")
    for i, v in enumerate(fs):
        if isinstance(v, bool) or not isinstance(v, int):
            raise ParseError(f"frame_size[{i}]: expected an integer, got {v!r}")

    tracks = doc["trajectories"]
    if not isinstance(tracks, list) or not tracks:
        raise ParseError("trajectories: expected a non-empty list")

    points, vis = [], []
    for n, tr in enumerate(tracks):
        where = f"trajectories[{n}]"
        if not isinstance(tr, dict):
            raise ParseError(f"{where}: expected an object")
        pts = tr.get("points")
        if not isinstance(pts, list):
            raise ParseError(f"{where}.points: expected a list")
        row = []
        for t, p in enumerate(pts):
            if not isinstance(p, list) or len(p) != 2:
                raise ParseError(f"{where}.points[{t}]: expected [x, y]")
            row.append((_number(p[0], f"{where}.points[{t}][0]"), _number(p[1], f"{where}.points[{t}][1]")))
        v = tr.get("visibility")
        if not isinstance(v, list):
            raise ParseError(f"{where}.visibility: expected a list")
        for t, f in enumerate(v):
            if isinstance(f, bool) or not isinstance(f, int):
                raise ParseError(f"{where}.visibility[{t}]: expected an integer flag, got {f!r}")
        if len(v) != len(row):
            raise ValidationError(f"{where}: visibility length {len(v)} != points length {len(row)}")
        points.append(row)
        vis.append(v)

    lengths = {len(r) for r in points}
    if len(lengths) != 1:
        raise ValidationError(f"unequal T across trajectories: lengths {sorted(lengths)}")
    for n, v in enumerate(vis):
        if any(f not in (0, 1) for f in v):
            raise ValidationError(f"trajectories[{n}]: visibility not in {{0,1}}")

    return TrajectorySet(np.array(points, dtype=np.float64), np.array(vis, dtype=np.uint8), tuple(fs))


def trajectories_to_json(traj: TrajectorySet) -> dict:
    return {
        "frame_size": list(traj.frame_size),
        "trajectories": [
            {"points": traj.points[n].tolist(), "visibility": traj.visibility[n].astype(int).tolist()}
            for n in range(traj.n_tracks)
        ],
    }


def load_trajectories(path: str | os.PathLike) -> TrajectorySet:
    """Read and validate a trajectory JSON file.

    Raises
    ------
    ParseError
        The file is not valid JSON or a field has the wrong type; the message
        carries the line/column or the field path.
    ValidationError
        The content breaks a :class:`TrajectorySet` invariant.
    """
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{os.fspath(path)}:{e.lineno}:{e.colno}: {e.msg}") from None
    try:
        return trajectories_from_json(doc)
    except (ParseError, ValidationError) as e:
        raise type(e)(f"{os.fspath(path)}: {e}") from None


def save_trajectories(traj: TrajectorySet, path: str | os.PathLike) -> None:
    # json writes shortest round-trip float reprs, so load(save(x)) == x exactly
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(trajectories_to_json(traj), fh)
        fh.write("\n")


def velocities(traj: TrajectorySet | np.ndarray) -> np.ndarray:
    """Per-frame displacements ``points[:, t+1] - points[:, t]``, shape ``(N, T-1, 2)``.

    Accepts a :class:`TrajectorySet` or a raw ``(N, T, 2)`` / ``(T, 2)`` array.
    """
    pts = traj.points if isinstance(traj, TrajectorySet) else np.asarray(traj, dtype=np.float64)
    if pts.ndim < 2 or pts.shape[-2] < 2:
        raise SizeError(f"velocities need T >= 2 points, got shape {pts.shape}")
    return pts[..., 1:, :] - pts[..., :-1, :]


# -- PGM masks ---------------------------------------------------------------


def _pgm_header(data: bytes):
    """Return (magic, width, height, maxval, offset of first raster byte)."""
    tokens = []
    i = 0
    n = len(data)
    while len(tokens) < 4:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        if i >= n:
            raise ParseError("truncated PGM header")
        j = i
        while j < n and not data[j : j + 1].isspace() and data[j : j + 1] != b"#":
            j += 1
        tokens.append(data[i:j])
        i = j
    magic = tokens[0]
    if magic not in (b"P2", b"P5"):
        raise ParseError(f"bad PGM magic number {magic!r}")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise ParseError("non-integer PGM header field") from None
    if w <= 0 or h <= 0:
        raise ParseError(f"invalid PGM dimensions {w}x{h}")
    if not 0 < maxval <= 255:
        raise ParseError(f"unsupported PGM maxval {maxval} (expected 1..255)")
    # exactly one whitespace byte separates the header from a binary raster
    return magic, w, h, maxval, i + 1


def parse_pgm(data: bytes) -> np.ndarray:
    """Decode an 8-bit PGM into a ``(height, width)`` uint8 array."""
    magic, w, h, maxval, off = _pgm_header(data)
    if magic == b"P5":
        raster = data[off : off + w * h]
        if len(raster) < w * h:
            raise ParseError(f"truncated PGM raster: expected {w * h} bytes, got {len(raster)}")
        img = np.frombuffer(raster, dtype=np.uint8).reshape(h, w)
    else:
        body = data[off - 1 :]
        body = b"\n".join(line.split(b"#", 1)[0] for line in body.splitlines())
        try:
            vals = [int(tok) for tok in body.split()]
        except ValueError:
            raise ParseError("non-integer sample in P2 raster") from None
        if len(vals) < w * h:
            raise ParseError(f"truncated PGM raster: expected {w * h} samples, got {len(vals)}")
        img = np.array(vals[: w * h], dtype=np.int64).reshape(h, w)
    if img.max(initial=0) > maxval:
        raise ParseError(f"sample exceeds maxval {maxval}")
    return img.astype(np.uint8)


def load_mask(path: str | os.PathLike) -> ForegroundMask:
    """Read a PGM mask; values above 127 are foreground."""
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        img = parse_pgm(data)
    except ParseError as e:
        raise ParseError(f"{os.fspath(path)}: {e}") from None
    return ForegroundMask((img > 127).astype(np.uint8))


def save_mask(mask: ForegroundMask | np.ndarray, path: str | os.PathLike, binary: bool = True) -> None:
    """Write a mask (or any uint8 raster) as PGM, foreground bits as 255."""
    if isinstance(mask, ForegroundMask):
        img = mask.bits.astype(np.uint8) * 255
    else:
        img = np.asarray(mask, dtype=np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        if binary:
            fh.write(b"P5\n%d %d\n255\n" % (w, h))
            fh.write(np.ascontiguousarray(img).tobytes())
        else:
            fh.write(b"P2\n%d %d\n255\n" % (w, h))
            for row in img:
                fh.write(b" ".join(b"%d" % v for v in row) + b"\n")
