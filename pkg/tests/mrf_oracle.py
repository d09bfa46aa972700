"""Loop-based reference for the segmentation energy, independent of groundcut.mrf."""

import itertools
import math
from collections import Counter

import numpy as np

from groundcut.labels import LabelState
from groundcut.pointcloud import RangeImage


def height_bins(z, h_l, k):
    return [math.floor((zi + h_l) * k + 0.5) for zi in z]


def histogram(z, h_l, k):
    counts = Counter(height_bins(z, h_l, k))
    total = sum(counts.values())
    return {g: c / total for g, c in counts.items()}


def neighbor_pairs(index):
    """Unordered 8-neighbor pairs of occupied cells; columns wrap, rows do not."""
    rows, cols = index.shape
    pairs = set()
    for r, c in itertools.product(range(rows), range(cols)):
        if index[r, c] < 0:
            continue
        for dr, dc in itertools.product((-1, 0, 1), repeat=2):
            r2, c2 = r + dr, (c + dc) % cols
            if (dr, dc) == (0, 0) or not 0 <= r2 < rows or (r2, c2) == (r, c) or index[r2, c2] < 0:
                continue
            a, b = int(index[r, c]), int(index[r2, c2])
            pairs.add((min(a, b), max(a, b)))
    return sorted(pairs)


class BruteEnergy:
    """Full energy over point labels; regional terms only for Unknown points."""

    def __init__(self, index, xyz, seeded, lam, sigma, k, eps, d_min):
        self.index = index
        self.points = [int(i) for i in index.ravel() if i >= 0]
        z = xyz[:, 2]
        h_l = float(z.min())
        obj = [z[i] for i in range(len(z)) if seeded[i] == LabelState.HC_OBSTACLE]
        bkg = [z[i] for i in range(len(z)) if seeded[i] == LabelState.HC_GROUND]
        d_obj, d_bkg = histogram(obj, h_l, k), histogram(bkg, h_l, k)
        self.free = [i for i in self.points if seeded[i] == LabelState.UNKNOWN]
        self.fixed_obstacle = {i for i in self.points if seeded[i] == LabelState.HC_OBSTACLE}
        self.cost = {}
        for i in self.free:
            g = height_bins([z[i]], h_l, k)[0]
            self.cost[i] = (
                -lam * math.log(d_obj.get(g, eps)),
                -lam * math.log(d_bkg.get(g, eps)),
            )
        self.pairs = []
        for a, b in neighbor_pairs(index):
            d = max(math.hypot(xyz[a, 0] - xyz[b, 0], xyz[a, 1] - xyz[b, 1]), d_min)
            self.pairs.append((a, b, math.exp(-sigma * (xyz[a, 2] - xyz[b, 2]) ** 2 / d)))

    def energy(self, obstacle_points):
        """``obstacle_points``: set of point ids labeled obstacle."""
        e = sum(self.cost[i][0] if i in obstacle_points else self.cost[i][1] for i in self.free)
        e += sum(w for a, b, w in self.pairs if (a in obstacle_points) != (b in obstacle_points))
        return e

    def minimum(self):
        """Exhaustive minimum over all seed-consistent labelings."""
        n = len(self.free)
        bits = ((np.arange(2**n)[:, None] >> np.arange(n)) & 1).astype(bool)
        col = {p: j for j, p in enumerate(self.free)}
        total = np.zeros(2**n)
        for j, p in enumerate(self.free):
            co, cb = self.cost[p]
            total += np.where(bits[:, j], co, cb)

        def side(p):
            if p in col:
                return bits[:, col[p]]
            return np.full(2**n, p in self.fixed_obstacle)

        for a, b, w in self.pairs:
            total += w * (side(a) != side(b))
        return float(total.min())


def grid_image(rows, cols, occupied=None):
    idx = np.arange(rows * cols).reshape(rows, cols)
    if occupied is not None:
        idx = np.where(occupied, idx, -1)
    return RangeImage(idx, np.ones((rows, cols)))


def random_instance(rng, rows=4, cols=4, max_free=12):
    n = rows * cols
    occupied = rng.random((rows, cols)) < 0.9
    image = grid_image(rows, cols, occupied)
    r, c = np.divmod(np.arange(n), cols)
    az = 2 * math.pi * (c + 0.5) / cols
    rad = 5.0 + r
    xyz = np.stack([rad * np.cos(az), rad * np.sin(az), rng.normal(0, 0.3, n)], axis=1)
    xyz[:, 2] = np.round(xyz[:, 2], 2)  # keep a few shared height bins
    seeded = rng.choice([LabelState.HC_GROUND, LabelState.HC_OBSTACLE, LabelState.UNKNOWN], size=n, p=[0.3, 0.3, 0.4]).astype(np.int8)
    occ_pts = image.index[image.occupied]
    free = occ_pts[seeded[occ_pts] == LabelState.UNKNOWN]
    if free.size > max_free:
        seeded[free[max_free:]] = LabelState.HC_GROUND
    seeded[occ_pts[0]] = LabelState.HC_OBSTACLE
    seeded[occ_pts[-1]] = LabelState.HC_GROUND
    return image, xyz, seeded
