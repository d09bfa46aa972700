"""Scan/label parsing, ring backtracking and range-image construction.

Scan files hold little-endian float32 records ``(x, y, z, intensity)``;
label files hold one little-endian uint32 per record whose low 16 bits are
the semantic class id.
"""

from __future__ import annotations

import configparser
import logging
import math
import os
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, ParseError
from .labels import TruthClass
from .sensor import SensorModel

log = logging.getLogger(__name__)

SCAN_DTYPE = np.dtype("<f4")
LABEL_FILE_DTYPE = np.dtype("<u4")
RECORD_BYTES = 16
NO_RING = -1
EMPTY = -1


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Parallel per-point arrays for one scan.

    ``source_index`` maps each kept point back to its record in the file so
    that labels stay aligned after invalid records are dropped.
    """

    xyz: np.ndarray
    intensity: np.ndarray
    ring: np.ndarray
    azimuth: np.ndarray
    source_index: np.ndarray
    record_count: int
    class_label: np.ndarray | None = None
    dropped: int = 0
    clamped: int = 0

    def __len__(self) -> int:
        return int(self.xyz.shape[0])

    @property
    def x(self) -> np.ndarray:
        return self.xyz[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.xyz[:, 1]

    @property
    def z(self) -> np.ndarray:
        return self.xyz[:, 2]

    @property
    def has_rings(self) -> bool:
        return len(self) == 0 or bool(self.ring.min() >= 0)

    @classmethod
    def from_xyz(cls, xyz, intensity=None, class_label=None) -> "PointCloud":
        """Wrap in-memory coordinates; rings and azimuths start unassigned."""
        xyz = np.asarray(xyz, dtype=float).reshape(-1, 3)
        n = xyz.shape[0]
        if intensity is None:
            intensity = np.zeros(n)
        return cls(
            xyz=xyz,
            intensity=np.asarray(intensity, dtype=float),
            ring=np.full(n, NO_RING, dtype=np.int32),
            azimuth=np.full(n, np.nan),
            source_index=np.arange(n),
            record_count=n,
            class_label=None if class_label is None else np.asarray(class_label, dtype=np.int8),
        )

    def with_labels(self, class_label: np.ndarray) -> "PointCloud":
        return replace(self, class_label=np.asarray(class_label, dtype=np.int8))


# -- scans -------------------------------------------------------------------


def load_scan(path: str | os.PathLike, format: str = "kitti") -> PointCloud:
    """Read a ``.bin`` scan.

    Records with non-finite coordinates or zero range are dropped and counted
    in ``PointCloud.dropped``.
    """
    if format != "kitti":
        raise ParseError(f"unsupported scan format {format!r}")
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ParseError(f"cannot read scan {path}: {exc}") from exc
    if len(raw) % RECORD_BYTES:
        raise ParseError(f"{path}: {len(raw)} bytes is not a multiple of {RECORD_BYTES}")
    rec = np.frombuffer(raw, dtype=SCAN_DTYPE).reshape(-1, 4).astype(float)
    xyz = rec[:, :3]
    finite = np.isfinite(xyz).all(axis=1)
    valid = finite.copy()
    valid[finite] = np.einsum("ij,ij->i", xyz[finite], xyz[finite]) > 0
    keep = np.flatnonzero(valid)
    n = keep.size
    return PointCloud(
        xyz=xyz[keep],
        intensity=rec[keep, 3],
        ring=np.full(n, NO_RING, dtype=np.int32),
        azimuth=np.full(n, np.nan),
        source_index=keep,
        record_count=rec.shape[0],
        dropped=int(rec.shape[0] - n),
    )


def write_scan(path: str | os.PathLike, cloud: PointCloud) -> None:
    rec = np.empty((len(cloud), 4), dtype=SCAN_DTYPE)
    rec[:, :3] = cloud.xyz
    rec[:, 3] = cloud.intensity
    Path(path).write_bytes(rec.tobytes())


# -- labels ------------------------------------------------------------------


class LabelRemap:
    """Map raw semantic ids onto the merged ground / ordinary / key classes."""

    _NAMES = {"ground": TruthClass.GROUND, "ordinary": TruthClass.ORDINARY, "key": TruthClass.KEY}

    def __init__(self, table: dict[int, TruthClass]):
        self.table = {int(k): TruthClass(v) for k, v in table.items()}
        size = max(self.table, default=0) + 1
        self._lut = np.full(size, -1, dtype=np.int8)
        for k, v in self.table.items():
            self._lut[k] = v

    def __call__(self, raw_ids: np.ndarray) -> tuple[np.ndarray, int]:
        """Return merged classes and the number of unmapped ids (sent to ORDINARY)."""
        raw_ids = np.asarray(raw_ids, dtype=np.int64)
        out = np.full(raw_ids.shape, -1, dtype=np.int8)
        inside = raw_ids < self._lut.size
        out[inside] = self._lut[raw_ids[inside]]
        unmapped = out < 0
        out[unmapped] = TruthClass.ORDINARY
        return out, int(unmapped.sum())

    @classmethod
    def semantic_kitti(cls) -> "LabelRemap":
        ground = [40, 44, 48, 49, 60, 72]  # road parking sidewalk other-ground lane-marking terrain
        key = [10, 11, 13, 15, 16, 18, 20, 30, 31, 32] + list(range(252, 260))
        ordinary = [0, 1, 50, 51, 52, 70, 71, 80, 81, 99]
        table = {i: TruthClass.GROUND for i in ground}
        table.update({i: TruthClass.KEY for i in key})
        table.update({i: TruthClass.ORDINARY for i in ordinary})
        return cls(table)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "LabelRemap":
        """Read ``raw_id = ground|ordinary|key`` lines from a ``[remap]`` section."""
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
            items = parser["remap"].items()
            table = {int(k): cls._NAMES[v.strip().lower()] for k, v in items}
        except (OSError, configparser.Error, KeyError, ValueError) as exc:
            raise ConfigError(f"bad label remap {path}: {exc}") from exc
        return cls(table)


def resolve_remap(spec: str | os.PathLike | None) -> LabelRemap:
    if spec is None or str(spec) == "semantickitti":
        return LabelRemap.semantic_kitti()
    return LabelRemap.load(spec)


def read_label_ids(path: str | os.PathLike) -> np.ndarray:
    """Raw class ids (low 16 bits) for every record of a label file."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ParseError(f"cannot read labels {path}: {exc}") from exc
    if len(raw) % LABEL_FILE_DTYPE.itemsize:
        raise ParseError(f"{path}: truncated label file")
    return (np.frombuffer(raw, dtype=LABEL_FILE_DTYPE) & 0xFFFF).astype(np.int64)


def load_labels(
    path: str | os.PathLike,
    remap: LabelRemap,
    expected_count: int | None = None,
) -> tuple[np.ndarray, int]:
    """Load one label file and merge its classes.

    Returns ``(classes, unmapped_count)``; ``classes`` has one entry per file
    record. ``expected_count`` is the scan's record count.
    """
    ids = read_label_ids(path)
    if expected_count is not None and ids.size != expected_count:
        raise ParseError(f"{path}: {ids.size} labels for {expected_count} scan records")
    classes, unmapped = remap(ids)
    if unmapped:
        log.warning("%s: %d labels with unmapped ids treated as ordinary obstacles", path, unmapped)
    return classes, unmapped


def write_label_ids(path: str | os.PathLike, ids: np.ndarray) -> None:
    Path(path).write_bytes(np.asarray(ids, dtype=LABEL_FILE_DTYPE).tobytes())


# -- rings and azimuth ---------------------------------------------------------


def normalize_azimuth(angle: np.ndarray) -> np.ndarray:
    az = np.mod(angle, 2 * math.pi)
    # mod can round up to exactly 2*pi for tiny negative inputs
    az[az >= 2 * math.pi] = 0.0
    return az


def assign_rings(cloud: PointCloud, model: SensorModel) -> PointCloud:
    """Backtrack each point's laser by the nearest vertical angle.

    Points whose angle lies outside the model's span are clamped to the end
    ring and counted in ``clamped``.
    """
    x, y, z = cloud.x, cloud.y, cloud.z
    planar = np.hypot(x, y)
    # angle from the downward normal = pi/2 + elevation
    delta = math.pi / 2 + np.arctan2(z, planar)
    angles = model.vertical_angles
    hi = np.searchsorted(angles, delta).clip(1, angles.size - 1)
    lo = hi - 1
    ring = np.where(delta - angles[lo] <= angles[hi] - delta, lo, hi).astype(np.int32)
    clamped = int(np.count_nonzero((delta < angles[0]) | (delta > angles[-1])))
    return replace(cloud, ring=ring, azimuth=normalize_azimuth(np.arctan2(y, x)), clamped=clamped)


# -- range image -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RangeImage:
    """Laser-row by azimuth-column grid of point indices (``EMPTY`` = -1)."""

    index: np.ndarray
    range: np.ndarray
    evictions: int = 0

    @property
    def rows(self) -> int:
        return int(self.index.shape[0])

    @property
    def cols(self) -> int:
        return int(self.index.shape[1])

    @property
    def occupied(self) -> np.ndarray:
        return self.index >= 0

    def cell_of_points(self, n_points: int) -> np.ndarray:
        """Flat cell id per point, -1 for points not present in the image."""
        cell = np.full(n_points, -1, dtype=np.int64)
        flat = self.index.ravel()
        occ = np.flatnonzero(flat >= 0)
        cell[flat[occ]] = occ
        return cell


def azimuth_columns(azimuth: np.ndarray, bins: int) -> np.ndarray:
    col = np.floor(azimuth * (bins / (2 * math.pi))).astype(np.int64)
    return np.clip(col, 0, bins - 1)


def build_range_image(cloud: PointCloud, model: SensorModel) -> RangeImage:
    """Project points to (ring, azimuth bin); the nearer point wins a collision.

    Ties in range go to the lower point index, so the result does not depend
    on point order beyond that rule.
    """
    rows, cols = model.laser_count, model.azimuth_bins
    index = np.full(rows * cols, EMPTY, dtype=np.int64)
    rng_img = np.full(rows * cols, np.inf)
    n = len(cloud)
    if n == 0:
        return RangeImage(index.reshape(rows, cols), rng_img.reshape(rows, cols), 0)
    if not cloud.has_rings:
        raise ParseError("build_range_image needs ring assignment first")
    cell = cloud.ring.astype(np.int64) * cols + azimuth_columns(cloud.azimuth, cols)
    rng = np.sqrt(np.einsum("ij,ij->i", cloud.xyz, cloud.xyz))
    np.minimum.at(rng_img, cell, rng)
    winners = np.flatnonzero(rng == rng_img[cell])
    best = np.full(rows * cols, n, dtype=np.int64)
    np.minimum.at(best, cell[winners], winners)
    occ = best < n
    index[occ] = best[occ]
    evictions = n - int(occ.sum())
    return RangeImage(index.reshape(rows, cols), rng_img.reshape(rows, cols), evictions)
