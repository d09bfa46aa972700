"""Coarse-to-fine ground segmentation of one scan."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from . import adjacency, mrf, polar
from .config import PipelineConfig
from .errors import SeedingError
from .labels import LABEL_DTYPE, LabelState
from .pointcloud import PointCloud, RangeImage, assign_rings, build_range_image
from .sensor import SensorModel

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SegmentResult:
    """Final Ground / Obstacle labels plus the intermediate stages."""

    labels: np.ndarray
    coarse: np.ndarray
    adjacency: np.ndarray | None
    seeded: np.ndarray | None
    image: RangeImage
    cloud: PointCloud
    runtime_ms: float
    fallback: bool = False
    free_nodes: int = 0


def segment(cloud: PointCloud, model: SensorModel, cfg: PipelineConfig | None = None) -> SegmentResult:
    """Run the stages enabled by ``cfg.stage`` and time them (I/O excluded)."""
    cfg = cfg or PipelineConfig()
    cfg.check_rows(model.laser_count)
    t0 = time.perf_counter()
    if not cloud.has_rings or np.isnan(cloud.azimuth).any():
        cloud = assign_rings(cloud, model)
    image = build_range_image(cloud, model)
    grid = polar.bin_points(cloud, model, cfg.sectors)
    coarse = polar.coarse_segment(grid, cloud, cfg.h_thresh)
    labels = coarse
    adj = seeded = None
    fallback = False
    free_nodes = 0
    if cfg.stage in ("adjacency", "full"):
        thr = adjacency.pair_thresholds(model, cfg.k_rad, cfg.row_stride)
        adj = adjacency.mark_obstacles(image, cloud.xyz[:, :2], thr, coarse, cfg.window, cfg.row_stride, cfg.mark)
        labels = adj
    if cfg.stage == "full":
        try:
            fine = mrf.fine_segment(image, cloud.xyz, labels, cfg.mrf, row_range=cfg.rows)
        except SeedingError as exc:
            log.info("MRF skipped, keeping earlier labels: %s", exc)
            fallback = True
        else:
            labels = fine.labels
            seeded = fine.seeded
            free_nodes = fine.free_nodes
    runtime_ms = (time.perf_counter() - t0) * 1e3
    final = np.where(labels == LabelState.OBSTACLE, LabelState.OBSTACLE, LabelState.GROUND).astype(LABEL_DTYPE)
    return SegmentResult(final, coarse, adj, seeded, image, cloud, runtime_ms, fallback, free_nodes)
