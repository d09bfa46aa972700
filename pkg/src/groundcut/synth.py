"""Ray-cast synthetic scans with exact per-point ground truth.

Every (laser, azimuth bin) ray is intersected with the ground surface, curb
steps and axis-aligned boxes; the nearest hit wins and carries the class of
the surface it hit. Range noise is applied along the ray.
"""

from __future__ import annotations

import configparser
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .labels import TruthClass
from .pointcloud import PointCloud
from .sensor import SensorModel

DEFAULT_NOISE_SIGMA = 0.01
DEFAULT_MAX_RANGE = 120.0


@dataclass(frozen=True)
class Box:
    """Axis-aligned box resting ``elevation`` meters above the ground at its center."""

    center: tuple[float, float]
    size: tuple[float, float, float]
    elevation: float = 0.0
    label: TruthClass = TruthClass.KEY


@dataclass(frozen=True)
class Curb:
    """Step of ``height`` raising the half-plane ``normal . (p - point) > 0``.

    Raised regions of different curbs must not overlap.
    """

    point: tuple[float, float]
    normal: tuple[float, float]
    height: float = 0.15


@dataclass(frozen=True)
class SceneSpec:
    ground_offset: float = 0.0
    grade: float = 0.0
    grade_azimuth: float = 0.0
    boxes: tuple[Box, ...] = ()
    curbs: tuple[Curb, ...] = ()
    noise_sigma: float = DEFAULT_NOISE_SIGMA
    rng_seed: int = 0
    max_range: float = DEFAULT_MAX_RANGE

    def __post_init__(self) -> None:
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        for b in self.boxes:
            if min(b.size) <= 0 or b.elevation < 0:
                raise ConfigError(f"box {b} needs positive size and non-negative elevation")

    def ground_z(self, x, y, mount_height: float) -> np.ndarray:
        """Height of the base ground plane (without curbs) in the sensor frame."""
        ux, uy = math.cos(self.grade_azimuth), math.sin(self.grade_azimuth)
        return -mount_height + self.ground_offset + self.grade * (ux * np.asarray(x) + uy * np.asarray(y))

    def surface_z(self, x, y, mount_height: float) -> np.ndarray:
        z = self.ground_z(x, y, mount_height)
        for c in self.curbs:
            raised = c.normal[0] * (np.asarray(x) - c.point[0]) + c.normal[1] * (np.asarray(y) - c.point[1]) > 0
            z = z + np.where(raised, c.height, 0.0)
        return z

    # -- config ----------------------------------------------------------------

    @classmethod
    def load(cls, path: str | os.PathLike) -> "SceneSpec":
        """Read a scene file.

        Format::

            [scene]
            noise_sigma = 0.01
            seed = 0
            grade = 0.0
            grade_azimuth_deg = 0

            [box car]
            center = 10 0
            size = 4 2 1.5
            class = key

            [curb left]
            point = 0 4
            normal = 0 1
            height = 0.15
        """
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read scene {path}: {exc}") from exc
        names = {"ground": TruthClass.GROUND, "ordinary": TruthClass.ORDINARY, "key": TruthClass.KEY}

        def floats(text: str, n: int) -> tuple[float, ...]:
            vals = tuple(float(t) for t in text.split())
            if len(vals) != n:
                raise ValueError(f"expected {n} numbers in {text!r}")
            return vals

        try:
            sec = parser["scene"] if parser.has_section("scene") else {}
            kwargs = dict(
                ground_offset=float(sec.get("ground_offset", 0.0)),
                grade=float(sec.get("grade", 0.0)),
                grade_azimuth=math.radians(float(sec.get("grade_azimuth_deg", 0.0))),
                noise_sigma=float(sec.get("noise_sigma", DEFAULT_NOISE_SIGMA)),
                rng_seed=int(sec.get("seed", 0)),
                max_range=float(sec.get("max_range", DEFAULT_MAX_RANGE)),
            )
            boxes, curbs = [], []
            for name in parser.sections():
                s = parser[name]
                if name.split()[0] == "box":
                    boxes.append(
                        Box(
                            floats(s["center"], 2),
                            floats(s["size"], 3),
                            float(s.get("elevation", 0.0)),
                            names[s.get("class", "key").strip().lower()],
                        )
                    )
                elif name.split()[0] == "curb":
                    curbs.append(Curb(floats(s["point"], 2), floats(s["normal"], 2), float(s.get("height", 0.15))))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return cls(boxes=tuple(boxes), curbs=tuple(curbs), **kwargs)


# -- ray casting ---------------------------------------------------------------


def ray_directions(model: SensorModel) -> tuple[np.ndarray, np.ndarray]:
    """Unit ray directions ``(L, W, 3)`` and the azimuth of every column."""
    w = model.azimuth_bins
    az = (np.arange(w) + 0.5) * (2 * math.pi / w)
    delta = model.vertical_angles[:, None]
    d = np.empty((model.laser_count, w, 3))
    d[..., 0] = np.sin(delta) * np.cos(az)
    d[..., 1] = np.sin(delta) * np.sin(az)
    d[..., 2] = -np.cos(delta) * np.ones_like(az)
    return d, az


def _plane_hits(d: np.ndarray, z0: float, grade: float, ux: float, uy: float) -> np.ndarray:
    """Ray parameter of the plane ``z = z0 + grade * (ux x + uy y)``; inf where missed."""
    denom = d[..., 2] - grade * (ux * d[..., 0] + uy * d[..., 1])
    with np.errstate(divide="ignore", invalid="ignore"):
        t = z0 / denom
    return np.where((t > 0) & np.isfinite(t), t, np.inf)


def box_hits(d: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Slab-method entry distance into an axis-aligned box from the origin; inf if missed."""
    t_near = np.full(d.shape[:-1], -np.inf)
    t_far = np.full(d.shape[:-1], np.inf)
    for axis in range(3):
        da = d[..., axis]
        parallel = da == 0
        # near-parallel rays overflow to +-inf, which is the right limit
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            t1 = lo[axis] / da
            t2 = hi[axis] / da
        ta = np.minimum(t1, t2)
        tb = np.maximum(t1, t2)
        inside = lo[axis] < 0 < hi[axis]
        ta = np.where(parallel, -np.inf if inside else np.inf, ta)
        tb = np.where(parallel, np.inf if inside else -np.inf, tb)
        t_near = np.maximum(t_near, ta)
        t_far = np.minimum(t_far, tb)
    ok = (t_near <= t_far) & (t_near > 0)
    return np.where(ok, t_near, np.inf)


def box_bounds(box: Box, spec: SceneSpec, mount_height: float) -> tuple[np.ndarray, np.ndarray]:
    cx, cy = box.center
    sx, sy, sz = box.size
    base = float(spec.surface_z(cx, cy, mount_height)) + box.elevation
    lo = np.array([cx - sx / 2, cy - sy / 2, base])
    hi = np.array([cx + sx / 2, cy + sy / 2, base + sz])
    return lo, hi


@dataclass(frozen=True, eq=False)
class SynthScan:
    cloud: PointCloud
    column: np.ndarray
    surface: np.ndarray  # index of the hit surface: -1 ground, -2 curb face, >= 0 box
    spec: SceneSpec = field(repr=False)


SURFACE_GROUND = -1
SURFACE_CURB_FACE = -2


def generate(spec: SceneSpec, model: SensorModel) -> SynthScan:
    """Ray-cast one revolution of ``model`` through the scene."""
    h = model.mount_height
    d, az = ray_directions(model)
    ux, uy = math.cos(spec.grade_azimuth), math.sin(spec.grade_azimuth)
    z0 = -h + spec.ground_offset
    shape = d.shape[:-1]

    best = np.full(shape, np.inf)
    surface = np.full(shape, SURFACE_GROUND, dtype=np.int64)
    label = np.full(shape, TruthClass.GROUND, dtype=np.int8)

    def in_raised(c: Curb, t: np.ndarray) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            px = t * d[..., 0]
            py = t * d[..., 1]
            return c.normal[0] * (px - c.point[0]) + c.normal[1] * (py - c.point[1]) > 0

    def take(t: np.ndarray, surf: int, cls: TruthClass) -> None:
        closer = t < best
        best[closer] = t[closer]
        surface[closer] = surf
        label[closer] = cls

    t_base = _plane_hits(d, z0, spec.grade, ux, uy)
    lowered = np.zeros(shape, dtype=bool)
    for c in spec.curbs:
        lowered |= np.isfinite(t_base) & in_raised(c, t_base)
    take(np.where(lowered, np.inf, t_base), SURFACE_GROUND, TruthClass.GROUND)

    for c in spec.curbs:
        t_top = _plane_hits(d, z0 + c.height, spec.grade, ux, uy)
        t_top = np.where(np.isfinite(t_top) & in_raised(c, t_top), t_top, np.inf)
        take(t_top, SURFACE_GROUND, TruthClass.GROUND)
        nx, ny = c.normal
        denom = nx * d[..., 0] + ny * d[..., 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            t_face = (nx * c.point[0] + ny * c.point[1]) / denom
        ok = np.isfinite(t_face) & (t_face > 0)
        tf = np.where(ok, t_face, 0.0)
        zb = spec.ground_z(tf * d[..., 0], tf * d[..., 1], h)
        zf = tf * d[..., 2]
        ok &= (zf >= zb) & (zf <= zb + c.height)
        take(np.where(ok, t_face, np.inf), SURFACE_CURB_FACE, TruthClass.ORDINARY)

    for k, box in enumerate(spec.boxes):
        lo, hi = box_bounds(box, spec, h)
        take(box_hits(d, lo, hi), k, box.label)

    rng = np.random.default_rng(spec.rng_seed)
    noise = rng.normal(0.0, 1.0, size=shape) * spec.noise_sigma
    t = best + noise
    hit = np.isfinite(best) & (best <= spec.max_range) & (t > 0)

    rows, cols = np.nonzero(hit)
    tt = t[rows, cols]
    xyz = d[rows, cols] * tt[:, None]
    cloud = PointCloud(
        xyz=xyz,
        intensity=np.zeros(rows.size),
        ring=rows.astype(np.int32),
        azimuth=az[cols],
        source_index=np.arange(rows.size),
        record_count=int(rows.size),
        class_label=label[rows, cols],
    )
    return SynthScan(cloud, cols, surface[rows, cols], spec)


# -- scene presets ---------------------------------------------------------------


def flat_scene(noise_sigma: float = 0.0, seed: int = 0) -> SceneSpec:
    return SceneSpec(noise_sigma=noise_sigma, rng_seed=seed)


def obstacle_scene(noise_sigma: float = DEFAULT_NOISE_SIGMA, seed: int = 0) -> SceneSpec:
    """A car-sized 1.5 m box at 10 m ahead and a 4 m wall at 20 m to the left-front."""
    return SceneSpec(
        boxes=(
            Box((11.0, 0.0), (2.0, 4.0, 1.5)),
            Box((20.5, 8.0), (1.0, 12.0, 4.0)),
        ),
        noise_sigma=noise_sigma,
        rng_seed=seed,
    )


def curb_scene(height: float = 0.15, offset: float = 4.0, noise_sigma: float = DEFAULT_NOISE_SIGMA, seed: int = 0) -> SceneSpec:
    """Straight road along x with a curb ``offset`` meters to the left."""
    return SceneSpec(
        curbs=(Curb((0.0, offset), (0.0, 1.0), height),),
        noise_sigma=noise_sigma,
        rng_seed=seed,
    )


def random_scene(seed: int, noise_sigma: float = DEFAULT_NOISE_SIGMA) -> SceneSpec:
    """Randomized street scene: mild grade, curbs, cars, pedestrians and walls."""
    rng = np.random.default_rng(seed)
    boxes: list[Box] = []

    def place(dist_lo: float, dist_hi: float) -> tuple[float, float]:
        r = rng.uniform(dist_lo, dist_hi)
        a = rng.uniform(0, 2 * math.pi)
        return (r * math.cos(a), r * math.sin(a))

    for _ in range(rng.integers(2, 7)):
        w, l = rng.uniform(1.6, 2.0), rng.uniform(3.8, 4.8)
        size = (l, w) if rng.random() < 0.5 else (w, l)
        boxes.append(Box(place(6.0, 35.0), (size[0], size[1], rng.uniform(1.4, 1.9))))
    for _ in range(rng.integers(1, 5)):
        boxes.append(Box(place(4.0, 25.0), (0.5, 0.5, rng.uniform(1.5, 1.9))))
    for _ in range(rng.integers(0, 3)):
        long_side = rng.uniform(5.0, 15.0)
        size = (0.4, long_side) if rng.random() < 0.5 else (long_side, 0.4)
        boxes.append(Box(place(15.0, 40.0), (size[0], size[1], rng.uniform(2.0, 4.0))))
    curbs: list[Curb] = []
    if rng.random() < 0.7:
        half_width = rng.uniform(4.0, 8.0)
        height = rng.uniform(0.1, 0.2)
        curbs = [Curb((0.0, half_width), (0.0, 1.0), height), Curb((0.0, -half_width), (0.0, -1.0), height)]
    return SceneSpec(
        grade=float(rng.uniform(-0.03, 0.03)),
        grade_azimuth=float(rng.uniform(0, 2 * math.pi)),
        boxes=tuple(boxes),
        curbs=tuple(curbs),
        noise_sigma=noise_sigma,
        rng_seed=seed,
    )
