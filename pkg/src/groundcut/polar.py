"""Ring-based polar elevation map and coarse height-threshold labeling.

Radial band edges sit halfway between consecutive calibrated ring radii, so
on flat ground each band holds exactly one ring and every cell sees about
the same number of returns regardless of range.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np

from .labels import LABEL_DTYPE, LabelState
from .pointcloud import PointCloud, normalize_azimuth
from .sensor import SensorModel

DEFAULT_SECTORS = 360
DEFAULT_H_THRESH = 0.3


def ring_boundaries(model: SensorModel) -> np.ndarray:
    """Band edges ``[0, mid_0, ..., mid_{n-2}, outer]`` over the ground-reaching rings.

    The outer edge mirrors the last half-spacing past the outermost ring;
    anything farther falls in the overflow band.
    """
    radii = model.ring_radii[np.isfinite(model.ring_radii)]
    if radii.size == 0:
        return np.array([0.0, math.inf])
    if radii.size == 1:
        return np.array([0.0, 2 * radii[0]])
    mids = 0.5 * (radii[1:] + radii[:-1])
    outer = radii[-1] + (radii[-1] - mids[-1])
    return np.concatenate([[0.0], mids, [outer]])


@dataclass(frozen=True, eq=False)
class PolarGrid:
    """Band x sector elevation map.

    Band ``len(boundaries) - 1`` is the overflow band past the outer edge.
    Empty cells hold ``min_z = +inf`` and ``max_z = -inf``.
    """

    boundaries: np.ndarray
    sectors: int
    cell: np.ndarray  # flat cell id per point
    count: np.ndarray
    min_z: np.ndarray
    max_z: np.ndarray

    @property
    def bands(self) -> int:
        return int(self.boundaries.size)  # regular bands + overflow

    def cell_id(self, band: int, sector: int) -> int:
        return band * self.sectors + sector

    def point_indices(self, band: int, sector: int) -> np.ndarray:
        return np.flatnonzero(self.cell == self.cell_id(band, sector))

    def nonempty(self) -> np.ndarray:
        return np.flatnonzero(self.count > 0)

    def write_csv(self, path: str | os.PathLike) -> None:
        """Per-cell diagnostic dump of the non-empty cells."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["ring_band", "sector", "count", "min_z", "max_z"])
            for c in self.nonempty():
                b, s = divmod(int(c), self.sectors)
                w.writerow([b, s, int(self.count[c]), f"{self.min_z[c]:.4f}", f"{self.max_z[c]:.4f}"])


def bin_points(cloud: PointCloud, model: SensorModel, sectors: int = DEFAULT_SECTORS) -> PolarGrid:
    """Place every point in its (radial band, azimuth sector) cell."""
    bounds = ring_boundaries(model)
    planar = np.hypot(cloud.x, cloud.y)
    # searchsorted(side=right) - 1 gives the band whose [lo, hi) contains r
    band = np.searchsorted(bounds, planar, side="right") - 1
    band = np.clip(band, 0, bounds.size - 1)
    az = cloud.azimuth
    if np.isnan(az).any():
        az = normalize_azimuth(np.arctan2(cloud.y, cloud.x))
    sector = np.clip(np.floor(az * (sectors / (2 * math.pi))).astype(np.int64), 0, sectors - 1)
    cell = band * sectors + sector
    n_cells = bounds.size * sectors
    count = np.bincount(cell, minlength=n_cells)
    min_z = np.full(n_cells, np.inf)
    max_z = np.full(n_cells, -np.inf)
    np.minimum.at(min_z, cell, cloud.z)
    np.maximum.at(max_z, cell, cloud.z)
    return PolarGrid(bounds, sectors, cell, count, min_z, max_z)


def coarse_segment(grid: PolarGrid, cloud: PointCloud, h_thresh: float = DEFAULT_H_THRESH) -> np.ndarray:
    """Points more than ``h_thresh`` above their cell's lowest point are obstacles."""
    above = cloud.z - grid.min_z[grid.cell] > h_thresh
    return np.where(above, LabelState.OBSTACLE, LabelState.GROUND).astype(LABEL_DTYPE)


# -- diagnostics ---------------------------------------------------------------


def expected_points(
    x1: float,
    x2: float,
    y1: float,
    y2: float,
    model: SensorModel | np.ndarray,
    points_per_ring: float,
) -> float:
    """Expected return count of a fixed x/y grid cell on flat ground.

    A ring contributes when both of its crossings of the vertical cell edges
    (upper half-plane branch) lie strictly between ``y2`` and ``y1``; the
    contribution is the subtended arc's share of one revolution.
    """
    if not (x1 < x2 and y2 < y1 and points_per_ring > 0):
        raise ValueError("need x1 < x2, y2 < y1 and a positive per-ring count")
    radii = model.ring_radii if isinstance(model, SensorModel) else np.asarray(model, dtype=float)
    total = 0.0
    for r in radii[np.isfinite(radii)]:
        if abs(x1) > r or abs(x2) > r:
            continue
        c1 = math.sqrt(r * r - x1 * x1)
        c2 = math.sqrt(r * r - x2 * x2)
        if not (y2 < c1 < y1 and y2 < c2 < y1):
            continue
        a1 = math.atan2(x1, c1)
        a2 = math.atan2(x2, c2)
        total += points_per_ring * abs(a1 - a2) / (2 * math.pi)
    return total


def cartesian_cell_counts(cloud: PointCloud, cell_size: float = 1.0) -> np.ndarray:
    """Point counts of the non-empty cells of a fixed x/y grid."""
    ix = np.floor(cloud.x / cell_size).astype(np.int64)
    iy = np.floor(cloud.y / cell_size).astype(np.int64)
    _, counts = np.unique(np.stack([ix, iy], axis=1), axis=0, return_counts=True)
    return counts


def coefficient_of_variation(counts: np.ndarray) -> float:
    counts = np.asarray(counts, dtype=float)
    return float(counts.std() / counts.mean())
