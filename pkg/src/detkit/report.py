"""Per-video evaluation records and their per-difficulty aggregation."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

from .clustering import Difficulty
from .errors import ParseError, ValidationError

__all__ = ["VideoEvalRecord", "EvalReport", "aggregate", "load_records", "format_table", "METRICS", "GROUPS"]

METRICS = ("edit_fidelity", "temporal_consistency", "motion_fidelity")
_SHORT = {"edit_fidelity": "EF", "temporal_consistency": "TC", "motion_fidelity": "MF"}
# column-group order of the printed table
GROUPS = ("all", "hard", "medium", "easy")


@dataclass(frozen=True)
class VideoEvalRecord:
    video_id: str
    difficulty: Difficulty
    edit_fidelity: float
    temporal_consistency: float
    motion_fidelity: float

    def __post_init__(self):
        try:
            object.__setattr__(self, "difficulty", Difficulty(self.difficulty))
        except ValueError:
            raise ValidationError(f"{self.video_id}: unknown difficulty {self.difficulty!r}") from None
        for m in METRICS:
            v = getattr(self, m)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ValidationError(f"{self.video_id}: {m} must be a finite number, got {v!r}")
            object.__setattr__(self, m, float(v))

    @classmethod
    def from_dict(cls, d: dict) -> "VideoEvalRecord":
        missing = [k for k in ("video_id", "difficulty", *METRICS) if k not in d]
        if missing:
            raise ParseError(f"record missing fields {missing}")
        return cls(str(d["video_id"]), d["difficulty"], *(d[m] for m in METRICS))

    def to_dict(self) -> dict:
        return {"video_id": self.video_id, "difficulty": self.difficulty.value, **{m: getattr(self, m) for m in METRICS}}


@dataclass(frozen=True)
class EvalReport:
    per_video: tuple
    # group name -> {"count": n, metric: mean, ...}; only non-empty groups present
    groups: dict

    def to_dict(self) -> dict:
        return {
            "per_video": [r.to_dict() for r in self.per_video],
            "overall": self.groups["all"],
            "per_difficulty": {g: self.groups[g] for g in GROUPS[1:] if g in self.groups},
        }


def _means(records):
    out = {"count": len(records)}
    for m in METRICS:
        out[m] = math.fsum(getattr(r, m) for r in records) / len(records)
    return out


def aggregate(records) -> EvalReport:
    """Overall and per-difficulty metric means.

    Records are sorted (by ``video_id``, then the remaining fields) and summed
    with ``math.fsum``, so the report does not depend on input order.
    """
    records = sorted(records, key=lambda r: (r.video_id, r.difficulty.value, *(getattr(r, m) for m in METRICS)))
    if not records:
        raise ValidationError("no evaluation records")
    groups = {"all": _means(records)}
    for d in Difficulty:
        members = [r for r in records if r.difficulty is d]
        if members:
            groups[d.value] = _means(members)
    return EvalReport(tuple(records), groups)


def load_records(path: str | os.PathLike) -> list[VideoEvalRecord]:
    """Read a JSON-lines file of :class:`VideoEvalRecord` objects (blank lines skipped)."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                records.append(VideoEvalRecord.from_dict(json.loads(line)))
            except json.JSONDecodeError as e:
                raise ParseError(f"{os.fspath(path)}:{lineno}: {e.msg}") from None
            except (ParseError, ValidationError) as e:
                raise type(e)(f"{os.fspath(path)}:{lineno}: {e}") from None
            except (TypeError, AttributeError):
                raise ParseError(f"{os.fspath(path)}:{lineno}: expected a JSON object") from None
    return records


def format_table(report: EvalReport, scale: float = 100.0) -> str:
    """Aligned text table: All / Hard / Medium / Easy, each with EF TC MF.

    Scores are multiplied by ``scale`` and printed with one decimal; empty
    groups show ``-``.
    """
    width = 6
    head1 = ["".ljust(8)]
    head2 = ["".ljust(8)]
    row = ["ours".ljust(8)]
    for g in GROUPS:
        head1.append(g.capitalize().center(3 * width + 2))
        head2.append(" ".join(_SHORT[m].rjust(width) for m in METRICS))
        stats = report.groups.get(g)
        cells = []
        for m in METRICS:
            cells.append(f"{stats[m] * scale:.1f}".rjust(width) if stats else "-".rjust(width))
        row.append(" ".join(cells))
    counts = "  ".join(f"{g}={report.groups[g]['count']}" for g in GROUPS if g in report.groups)
    lines = [" | ".join(head1), " | ".join(head2), " | ".join(row), f"videos: {counts}"]
    return "\n".join(s.rstrip() for s in lines) + "\n"
