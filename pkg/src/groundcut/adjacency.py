"""Obstacle marking from the planar spacing of returns of nearby lasers.

On ground with slope at most ``K`` two returns of lasers ``delta1 < delta2``
sit at least ``min_flat_distance`` apart in the bird's-eye view; a closer
pair means the surface between them is steeper than ``K``.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError
from .labels import LabelState
from .pointcloud import RangeImage
from .sensor import SensorModel

DEFAULT_K_DEG = 15.0
DEFAULT_WINDOW = 3
DEFAULT_ROW_STRIDE = 2
DEFAULT_MARK = "both"
MARK_MODES = ("far", "both")
_TAN_EPS = 1e-12


def height_diff(dd: float, h: float, delta1: float, delta2: float) -> float:
    """Height step between the returns of two lasers that are ``dd`` apart."""
    if not delta2 > delta1:
        raise DomainError(f"need delta2 > delta1, got {delta1} and {delta2}")
    t2 = math.tan(delta2)
    if abs(t2) < _TAN_EPS or delta2 >= math.pi / 2:
        raise DomainError(f"laser angle {delta2} never reaches the ground plane")
    return (h * (t2 - math.tan(delta1)) - dd) / t2


def elevation_angle(dh: float, dd: float) -> float:
    if not dd > 0:
        raise DomainError(f"planar distance must be positive, got {dd}")
    return math.atan(dh / dd)


def min_flat_distance(h: float, delta1: float, delta2: float, k: float) -> float:
    """Smallest planar spacing two returns can have on a slope no steeper than ``k``."""
    if delta1 == delta2:
        return 0.0
    if not delta2 > delta1:
        raise DomainError(f"need delta2 > delta1, got {delta1} and {delta2}")
    t1, t2 = math.tan(delta1), math.tan(delta2)
    denom = math.tan(k) * t2 + 1.0
    if not denom > 0:
        raise DomainError(f"non-positive denominator {denom} for k={k}, delta2={delta2}")
    return h * (t2 - t1) / denom


def pair_thresholds(model: SensorModel, k: float, row_stride: int = DEFAULT_ROW_STRIDE) -> np.ndarray:
    """Per-row spacing bound for the pair ``(l, l + row_stride)``.

    When the farther laser is at or above the horizon the bound takes its
    limit ``h / tan(k)`` as ``delta2`` approaches pi/2.
    """
    angles = model.vertical_angles
    h = model.mount_height
    out = np.empty(max(model.laser_count - row_stride, 0))
    horizon = h / math.tan(k) if k > 0 else math.inf
    for l in range(out.size):
        d1, d2 = angles[l], angles[l + row_stride]
        if d2 >= math.pi / 2 - 1e-9:
            out[l] = horizon
        else:
            out[l] = min_flat_distance(h, d1, d2, k)
    return out


def mark_obstacles(
    image: RangeImage,
    xy: np.ndarray,
    thresholds: np.ndarray,
    labels: np.ndarray,
    window: int = DEFAULT_WINDOW,
    row_stride: int = DEFAULT_ROW_STRIDE,
    mark: str = DEFAULT_MARK,
) -> np.ndarray:
    """Mark the points of every too-close laser pair as obstacles.

    For each occupied cell ``(l, p)`` and each occupied ``(l + row_stride, sp)``
    with ``|sp - p| <= window`` (columns wrap around), the ``sp`` point becomes
    an obstacle when its planar distance to the ``p`` point is below
    ``thresholds[l]``. With ``mark="both"`` (the default) the ``p`` point is
    marked too, which catches the lowest ring of a face whose partner two rows
    further out already lies on the face; ``mark="far"`` marks only ``sp``.
    Existing obstacle labels are never cleared.
    """
    if mark not in MARK_MODES:
        raise ValueError(f"mark must be 'far' or 'both', got {mark!r}")
    out = np.array(labels, copy=True)
    rows, cols = image.index.shape
    if rows <= row_stride or len(xy) == 0:
        return out
    occupied = image.index >= 0
    safe = np.where(occupied, image.index, 0)
    gx = np.where(occupied, xy[safe, 0], np.nan)
    gy = np.where(occupied, xy[safe, 1], np.nan)
    near = image.index[: rows - row_stride]
    far_all = image.index[row_stride:]
    thr2 = np.square(np.asarray(thresholds)[: rows - row_stride, None])
    nx, ny = gx[: rows - row_stride], gy[: rows - row_stride]
    fx_all, fy_all = gx[row_stride:], gy[row_stride:]
    hit = np.zeros(far_all.shape, dtype=bool)
    src_hit = np.zeros(near.shape, dtype=bool)
    for off in range(-window, window + 1):
        # far[l, p] = index[l + stride, p + off]; empty cells are NaN and never close
        dx = np.roll(fx_all, -off, axis=1) - nx
        dy = np.roll(fy_all, -off, axis=1) - ny
        close = dx * dx + dy * dy < thr2
        if close.any():
            hit |= np.roll(close, off, axis=1)
            src_hit |= close
    out[far_all[hit]] = LabelState.OBSTACLE
    if mark == "both":
        out[near[src_hit]] = LabelState.OBSTACLE
    return out
