"""Ground IoU, key-obstacle recall and runtime statistics."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import UsageError
from .labels import TruthClass, is_ground


@dataclass(frozen=True)
class ScanMetrics:
    tp_g: int
    fp_g: int
    fn_g: int
    tp_o: int
    fn_o: int
    iou_g: float | None
    recall_o: float | None
    runtime_ms: float | None = None


def score_scan(pred, truth, runtime_ms: float | None = None) -> ScanMetrics:
    """Compare predicted labels with merged truth classes.

    Any non-ground truth point predicted ground is a ground false positive.
    A metric whose denominator is zero is reported as None.
    """
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise UsageError(f"prediction has {pred.size} points, truth has {truth.size}")
    pg = is_ground(pred)
    tg = truth == TruthClass.GROUND
    key = truth == TruthClass.KEY
    tp_g = int(np.count_nonzero(pg & tg))
    fp_g = int(np.count_nonzero(pg & ~tg))
    fn_g = int(np.count_nonzero(~pg & tg))
    tp_o = int(np.count_nonzero(key & ~pg))
    fn_o = int(np.count_nonzero(key & pg))
    den_g = tp_g + fp_g + fn_g
    den_o = tp_o + fn_o
    return ScanMetrics(
        tp_g, fp_g, fn_g, tp_o, fn_o,
        tp_g / den_g if den_g else None,
        tp_o / den_o if den_o else None,
        runtime_ms,
    )


@dataclass(frozen=True)
class Stat:
    mean: float | None
    min: float | None
    max: float | None
    count: int


@dataclass(frozen=True)
class Summary:
    iou_g: Stat
    recall_o: Stat
    runtime_ms: Stat
    scans: int


def _stat(values: Iterable[float | None]) -> Stat:
    vals = [v for v in values if v is not None]
    if not vals:
        return Stat(None, None, None, 0)
    return Stat(math.fsum(vals) / len(vals), min(vals), max(vals), len(vals))


def aggregate(scans: Sequence[ScanMetrics]) -> Summary:
    """Mean / min / max per metric; undefined values are left out, not imputed."""
    if not scans:
        raise UsageError("cannot aggregate an empty sequence")
    return Summary(
        _stat(s.iou_g for s in scans),
        _stat(s.recall_o for s in scans),
        _stat(s.runtime_ms for s in scans),
        len(scans),
    )


def _fmt(v: float | None, digits: int = 6) -> str:
    return "" if v is None else f"{v:.{digits}f}"


def write_report(
    path: str | os.PathLike,
    rows: Sequence[tuple[str, ScanMetrics]],
    header_comment: str | None = None,
) -> Summary:
    """Write ``scan_id,iou_g,recall_o,runtime_ms`` rows followed by mean/min/max rows."""
    summary = aggregate([m for _, m in rows])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            for line in header_comment.splitlines():
                fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["scan_id", "iou_g", "recall_o", "runtime_ms"])
        for scan_id, m in rows:
            w.writerow([scan_id, _fmt(m.iou_g), _fmt(m.recall_o), _fmt(m.runtime_ms, 3)])
        for name in ("mean", "min", "max"):
            w.writerow([
                name,
                _fmt(getattr(summary.iou_g, name)),
                _fmt(getattr(summary.recall_o, name)),
                _fmt(getattr(summary.runtime_ms, name), 3),
            ])
    return summary
