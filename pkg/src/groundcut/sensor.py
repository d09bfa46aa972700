"""Spinning LiDAR geometry: per-laser angles, mount height, azimuth resolution.

Angles are stored as the angle between each laser and the downward ground
normal, so a laser pointing straight down has angle 0 and a horizontal laser
has angle pi/2. Ring 0 is the steepest (closest) laser.
"""

from __future__ import annotations

import configparser
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

DEFAULT_AZIMUTH_BINS = 1800


def flat_ground_radii(vertical_angles: np.ndarray, mount_height: float) -> np.ndarray:
    """Planar radius at which each laser meets flat ground, ``h * tan(delta)``.

    Lasers at or above the horizon never reach the ground and get ``inf``.
    """
    angles = np.asarray(vertical_angles, dtype=float)
    radii = np.full(angles.shape, np.inf)
    below = angles < math.pi / 2 - 1e-9
    radii[below] = mount_height * np.tan(angles[below])
    return radii


@dataclass(frozen=True, eq=False)
class SensorModel:
    vertical_angles: np.ndarray
    mount_height: float
    azimuth_bins: int = DEFAULT_AZIMUTH_BINS
    ring_radii: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        angles = np.asarray(self.vertical_angles, dtype=float)
        if angles.ndim != 1 or angles.size < 2:
            raise ConfigError("sensor needs at least two lasers")
        if not np.all(np.diff(angles) > 0):
            raise ConfigError("vertical angles must be strictly increasing (ring 0 = steepest laser)")
        if not self.mount_height > 0:
            raise ConfigError(f"mount height must be positive, got {self.mount_height}")
        if int(self.azimuth_bins) < 1:
            raise ConfigError("azimuth_bins must be >= 1")
        if self.ring_radii is None:
            radii = flat_ground_radii(angles, self.mount_height)
        else:
            radii = np.asarray(self.ring_radii, dtype=float)
            if radii.shape != angles.shape:
                raise ConfigError("ring_radii must have one entry per laser")
            finite = radii[np.isfinite(radii)]
            if np.any(np.diff(radii[np.isfinite(radii)]) <= 0) or np.any(finite <= 0):
                raise ConfigError("finite ring radii must be positive and strictly increasing")
        angles.setflags(write=False)
        radii.setflags(write=False)
        object.__setattr__(self, "vertical_angles", angles)
        object.__setattr__(self, "ring_radii", radii)
        object.__setattr__(self, "azimuth_bins", int(self.azimuth_bins))
        object.__setattr__(self, "mount_height", float(self.mount_height))

    @property
    def laser_count(self) -> int:
        return int(self.vertical_angles.size)

    @property
    def ground_rings(self) -> np.ndarray:
        """Indices of lasers that reach flat ground (finite ring radius)."""
        return np.flatnonzero(np.isfinite(self.ring_radii))

    @classmethod
    def from_elevations(
        cls,
        elevations_deg,
        mount_height: float,
        azimuth_bins: int = DEFAULT_AZIMUTH_BINS,
    ) -> "SensorModel":
        """Build a model from elevation angles in degrees (negative = below horizon)."""
        delta = np.radians(90.0 + np.asarray(elevations_deg, dtype=float))
        return cls(np.sort(delta), mount_height, azimuth_bins)

    @classmethod
    def hdl64e(cls, mount_height: float = 1.73, azimuth_bins: int = DEFAULT_AZIMUTH_BINS) -> "SensorModel":
        """Nominal Velodyne HDL-64E layout: two blocks of 32 lasers.

        Upper block spans +2.0 deg to -8.33 deg in 1/3 deg steps, lower block
        -8.83 deg to -24.33 deg in 1/2 deg steps.
        """
        upper = 2.0 - np.arange(32) / 3.0
        lower = -8.83 - 0.5 * np.arange(32)
        return cls.from_elevations(np.concatenate([upper, lower]), mount_height, azimuth_bins)

    @classmethod
    def uniform(
        cls,
        laser_count: int,
        min_elevation_deg: float,
        max_elevation_deg: float,
        mount_height: float = 1.73,
        azimuth_bins: int = DEFAULT_AZIMUTH_BINS,
    ) -> "SensorModel":
        elev = np.linspace(min_elevation_deg, max_elevation_deg, laser_count)
        return cls.from_elevations(elev, mount_height, azimuth_bins)

    # -- config file round trip ------------------------------------------

    @classmethod
    def load(cls, path: str | os.PathLike) -> "SensorModel":
        """Read a sensor config.

        Format::

            [sensor]
            laser_count = 64
            mount_height = 1.73
            azimuth_bins = 1800

            [lasers]
            # index = angle_from_ground_normal_deg flat_ground_radius_m
            0 = 65.67 3.8234
        """
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read sensor config {path}: {exc}") from exc
        if not parser.has_section("sensor") or not parser.has_section("lasers"):
            raise ConfigError(f"{path}: needs [sensor] and [lasers] sections")
        sec = parser["sensor"]
        try:
            count = sec.getint("laser_count")
            height = sec.getfloat("mount_height")
            bins = sec.getint("azimuth_bins", fallback=DEFAULT_AZIMUTH_BINS)
            rows = sorted(((int(k), v.split()) for k, v in parser["lasers"].items()), key=lambda kv: kv[0])
            angles = np.radians([float(v[0]) for _, v in rows])
            radii = np.array([float(v[1]) if len(v) > 1 else math.nan for _, v in rows])
        except (TypeError, ValueError, IndexError) as exc:
            raise ConfigError(f"{path}: malformed value ({exc})") from exc
        if [k for k, _ in rows] != list(range(len(rows))):
            raise ConfigError(f"{path}: laser indices must be 0..L-1 without gaps")
        if count is not None and count != len(rows):
            raise ConfigError(f"{path}: laser_count={count} but {len(rows)} lasers listed")
        if np.isnan(radii).any():
            radii = np.where(np.isnan(radii), flat_ground_radii(angles, height), radii)
        return cls(angles, height, bins, radii)

    def dump(self, path: str | os.PathLike) -> None:
        lines = [
            "[sensor]",
            f"laser_count = {self.laser_count}",
            f"mount_height = {self.mount_height!r}",
            f"azimuth_bins = {self.azimuth_bins}",
            "",
            "[lasers]",
            "# index = angle_from_ground_normal_deg flat_ground_radius_m",
        ]
        for i, (a, r) in enumerate(zip(self.vertical_angles, self.ring_radii)):
            lines.append(f"{i} = {math.degrees(float(a))!r} {float(r)!r}")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")


def resolve_sensor(spec: str | os.PathLike | None) -> SensorModel:
    """Accept a preset name (``hdl64e``) or a path to a sensor config."""
    if spec is None or str(spec) == "hdl64e":
        return SensorModel.hdl64e()
    return SensorModel.load(spec)
