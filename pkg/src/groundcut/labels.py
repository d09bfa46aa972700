"""Per-point label enumerations shared by every pipeline stage."""

from __future__ import annotations

from enum import IntEnum

import numpy as np


class LabelState(IntEnum):
    """Working label of a point as it moves from coarse to fine segmentation."""

    UNKNOWN = 0
    GROUND = 1
    OBSTACLE = 2
    HC_GROUND = 3
    HC_OBSTACLE = 4


class TruthClass(IntEnum):
    """Merged ground-truth class used for evaluation."""

    GROUND = 0
    ORDINARY = 1
    KEY = 2


LABEL_DTYPE = np.int8


def is_ground(labels: np.ndarray) -> np.ndarray:
    """Mask of points predicted ground (plain or high-confidence)."""
    labels = np.asarray(labels)
    return (labels == LabelState.GROUND) | (labels == LabelState.HC_GROUND)


def is_obstacle(labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels)
    return (labels == LabelState.OBSTACLE) | (labels == LabelState.HC_OBSTACLE)


def collapse(labels: np.ndarray) -> np.ndarray:
    """Fold high-confidence states back to plain Ground / Obstacle.

    Unknown points are reported as Ground, which is what they were before
    seeding demoted them.
    """
    out = np.full(len(labels), LabelState.GROUND, dtype=LABEL_DTYPE)
    out[is_obstacle(labels)] = LabelState.OBSTACLE
    return out
