"""Binary MRF over range-image cells, solved exactly with a min-cut.

Nodes are occupied range-image cells joined 8-connected (columns wrap).
Obstacle is the source side of the cut, ground the sink side. Seeded
points are hard constraints; every other point pays ``lam`` times the
negative log-likelihood of its height under the obstacle or ground height
histogram, plus ``exp(-sigma * dz^2 / d)`` for each neighbor on the other
side of the cut.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SeedingError
from .labels import LABEL_DTYPE, LabelState
from .maxflow import FlowNetwork
from .pointcloud import RangeImage

D_MIN = 0.01

# (row offset, column offset) of the forward half of the 8-neighborhood
_FORWARD_NEIGHBORS = ((0, 1), (1, -1), (1, 0), (1, 1))


@dataclass(frozen=True)
class MrfParams:
    lam: float = 1.0
    sigma: float = 1.0
    seed_window: int = 5
    seed_ratio: float = 0.5
    scale_k: float = 100.0
    epsilon_prob: float = 1e-6
    d_min: float = D_MIN

    def __post_init__(self) -> None:
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if not self.sigma > 0:
            raise ValueError("sigma must be > 0")
        if self.seed_window < 1 or self.seed_window % 2 == 0:
            raise ValueError("seed_window must be a positive odd number")
        if not 0 < self.seed_ratio <= 1:
            raise ValueError("seed_ratio must be in (0, 1]")
        if not 0 < self.epsilon_prob < 1:
            raise ValueError("epsilon_prob must be in (0, 1)")
        if not self.scale_k > 0:
            raise ValueError("scale_k must be > 0")


# -- seeding -----------------------------------------------------------------


def _window_sums(mask: np.ndarray, half: int) -> np.ndarray:
    """Integer box sums over a (2*half+1)^2 window; rows clip, columns wrap."""
    rows, cols = mask.shape
    m = mask.astype(np.int64)
    if half == 0:
        return m
    if cols > 0:
        reps = -(-half // cols)
        m = np.concatenate([m] * (2 * reps + 1), axis=1)[:, reps * cols - half : (reps + 1) * cols + half]
    m = np.pad(m, ((half, half), (0, 0)))
    c = np.zeros((m.shape[0] + 1, m.shape[1] + 1), dtype=np.int64)
    np.cumsum(np.cumsum(m, axis=0), axis=1, out=c[1:, 1:])
    w = 2 * half + 1
    return c[w:, w:] - c[:-w, w:] - c[w:, :-w] + c[:-w, :-w]


def seed_high_confidence(labels: np.ndarray, image: RangeImage, params: MrfParams) -> np.ndarray:
    """Promote coarse labels to hard seeds.

    Obstacles become high-confidence obstacles. A ground point becomes
    high-confidence ground when more than ``seed_ratio`` of the occupied
    cells in its window are ground; otherwise it becomes Unknown. Points
    absent from the range image keep their label.
    """
    out = np.array(labels, dtype=LABEL_DTYPE, copy=True)
    idx = image.index
    occ = idx >= 0
    lab_img = np.full(idx.shape, LabelState.UNKNOWN, dtype=LABEL_DTYPE)
    lab_img[occ] = out[idx[occ]]
    ground_img = occ & (lab_img == LabelState.GROUND)
    half = params.seed_window // 2
    n_occ = _window_sums(occ, half)
    n_ground = _window_sums(ground_img, half)
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = n_ground / n_occ
    hc = ground_img & (frac > params.seed_ratio)
    obstacle = out == LabelState.OBSTACLE
    in_image = np.zeros(out.size, dtype=bool)
    in_image[idx[occ]] = True
    out[obstacle] = LabelState.HC_OBSTACLE
    out[in_image & (out == LabelState.GROUND)] = LabelState.UNKNOWN
    out[idx[hc]] = LabelState.HC_GROUND
    return out


# -- histograms --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class HeightHistogram:
    """Normalized histogram of quantized heights ``g = round((z + h_l) * k)``."""

    scale_k: float
    h_l: float
    keys: np.ndarray
    probs: np.ndarray
    total: int
    epsilon_prob: float = 1e-6

    @property
    def bins(self) -> dict[int, float]:
        return dict(zip(self.keys.tolist(), self.probs.tolist()))

    def bin_of(self, z) -> np.ndarray:
        return np.floor((np.asarray(z, dtype=float) + self.h_l) * self.scale_k + 0.5).astype(np.int64)

    def prob(self, z) -> np.ndarray:
        """Probability of each height's bin; unseen bins get ``epsilon_prob``."""
        g = self.bin_of(z)
        pos = np.searchsorted(self.keys, g).clip(0, max(self.keys.size - 1, 0))
        if self.keys.size == 0:
            return np.full(g.shape, self.epsilon_prob)
        hit = self.keys[pos] == g
        return np.where(hit, self.probs[pos], self.epsilon_prob)


def _histogram(z: np.ndarray, scale_k: float, h_l: float, epsilon_prob: float) -> HeightHistogram:
    g = np.floor((z + h_l) * scale_k + 0.5).astype(np.int64)
    keys, counts = np.unique(g, return_counts=True)
    return HeightHistogram(scale_k, h_l, keys, counts / counts.sum(), int(g.size), epsilon_prob)


def build_histograms(
    z: np.ndarray,
    labels: np.ndarray,
    scale_k: float = 100.0,
    epsilon_prob: float = 1e-6,
    h_l: float | None = None,
) -> tuple[HeightHistogram, HeightHistogram]:
    """Height histograms of the obstacle seeds and the ground seeds.

    ``h_l`` defaults to the lowest height in ``z``.
    """
    z = np.asarray(z, dtype=float)
    obj = labels == LabelState.HC_OBSTACLE
    bkg = labels == LabelState.HC_GROUND
    if not obj.any() or not bkg.any():
        raise SeedingError(
            f"need both seed classes, got {int(obj.sum())} obstacle and {int(bkg.sum())} ground seeds"
        )
    if h_l is None:
        h_l = float(z.min())
    return (
        _histogram(z[obj], scale_k, h_l, epsilon_prob),
        _histogram(z[bkg], scale_k, h_l, epsilon_prob),
    )


def regional_costs(z, d_obj: HeightHistogram, d_bkg: HeightHistogram) -> tuple[np.ndarray, np.ndarray]:
    """``(obstacle_cost, ground_cost)``: negative log-likelihood of each label.

    The obstacle cost is the capacity of the link to the ground terminal (it
    is paid when the node ends on the obstacle side) and vice versa.
    """
    return -np.log(d_obj.prob(z)), -np.log(d_bkg.prob(z))


def boundary_weight(p, q, sigma: float = 1.0, d_min: float = D_MIN) -> np.ndarray:
    """Discontinuity penalty between neighbors, in (0, 1].

    ``p`` and ``q`` are ``(..., 3)`` coordinates; height is ``z`` and the
    distance is planar, floored at ``d_min``.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    d = np.hypot(p[..., 0] - q[..., 0], p[..., 1] - q[..., 1])
    d = np.maximum(d, d_min)
    dz = p[..., 2] - q[..., 2]
    return np.exp(-sigma * dz * dz / d)


# -- energy ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EnergyModel:
    """Terminal costs, seeds and pairwise weights of one scan's MRF.

    ``cost_obj[i]`` / ``cost_bkg[i]`` are the lambda-scaled costs of labeling
    node ``i`` obstacle / ground (zero for seeds). ``seed`` is +1 for obstacle
    seeds, -1 for ground seeds, 0 for free nodes. Each undirected edge appears
    once in ``edges`` with weight ``weights``.
    """

    node_point: np.ndarray
    node_cell: np.ndarray
    cost_obj: np.ndarray
    cost_bkg: np.ndarray
    seed: np.ndarray
    edges: np.ndarray
    weights: np.ndarray
    shape: tuple[int, int] = field(default=(0, 0))

    @property
    def node_count(self) -> int:
        return int(self.node_point.size)

    @property
    def hard_cap(self) -> float:
        """Stands in for infinity: larger than any cut made of finite links."""
        return 1.0 + float(self.cost_obj.sum() + self.cost_bkg.sum() + self.weights.sum())

    def energy(self, obstacle) -> float:
        """Energy of a node labeling (True = obstacle); ``inf`` if a seed is violated."""
        obstacle = np.asarray(obstacle, dtype=bool)
        if np.any(obstacle[self.seed < 0]) or not np.all(obstacle[self.seed > 0]):
            return float("inf")
        region = np.where(obstacle, self.cost_obj, self.cost_bkg).sum()
        if self.edges.size:
            cut = obstacle[self.edges[:, 0]] != obstacle[self.edges[:, 1]]
            region += self.weights[cut].sum()
        return float(region)

    def to_network(self, contract_seeds: bool = True) -> tuple[FlowNetwork, np.ndarray]:
        """Encode as a flow network; returns the network and its node -> model node map.

        With ``contract_seeds`` seeded nodes are merged into their terminal:
        an edge from a free node to a seed becomes a terminal link of the free
        node and seed-seed edges (a constant) vanish. Otherwise seeds are
        attached to their terminal with ``hard_cap``.
        """
        free = self.seed == 0
        if contract_seeds:
            nodes = np.flatnonzero(free)
        else:
            nodes = np.arange(self.node_count)
        remap = np.full(self.node_count, -1, dtype=np.int64)
        remap[nodes] = np.arange(nodes.size)
        # source link is cut when the node lands on the ground side
        cap_s = self.cost_bkg[nodes].copy()
        cap_t = self.cost_obj[nodes].copy()
        net = FlowNetwork(nodes.size)
        if self.edges.size:
            a, b = self.edges[:, 0], self.edges[:, 1]
            w = self.weights
            if contract_seeds:
                both = free[a] & free[b]
                net.add_edges(remap[a[both]], remap[b[both]], w[both], w[both])
                for x, y in ((a, b), (b, a)):
                    sel = free[x] & ~free[y]
                    tgt = remap[x[sel]]
                    to_obj = self.seed[y[sel]] > 0
                    np.add.at(cap_s, tgt[to_obj], w[sel][to_obj])
                    np.add.at(cap_t, tgt[~to_obj], w[sel][~to_obj])
            else:
                net.add_edges(a, b, w, w)
        if not contract_seeds:
            hard = self.hard_cap
            cap_s[self.seed > 0] = hard
            cap_t[self.seed < 0] = hard
        net.set_terminals(np.arange(nodes.size), cap_s, cap_t)
        return net, nodes


def _neighbor_pairs(index: np.ndarray, touching: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Point-index pairs of all occupied 8-neighbors, each pair once.

    With a boolean cell mask ``touching``, only pairs with at least one
    endpoint inside the mask are returned.
    """
    n_rows, n_cols = index.shape
    ps, qs = [], []
    seen = set()
    for dr, dc in _FORWARD_NEIGHBORS:
        # on very narrow images wrapped offsets coincide; keep each once
        key = (dr, dc % n_cols)
        if dr >= n_rows or (dr == 0 and n_cols < 2) or key in seen:
            continue
        seen.add(key)
        src = index[: n_rows - dr]
        dst = np.roll(index[dr:], -dc, axis=1)
        ok = (src >= 0) & (dst >= 0)
        if touching is not None:
            ok &= touching[: n_rows - dr] | np.roll(touching[dr:], -dc, axis=1)
        if dr == 0 and n_cols == 2 and dc == 1:
            # two columns: the wrap-around neighbor is the same pair again
            ok[:, 1] = False
        ps.append(src[ok])
        qs.append(dst[ok])
    if not ps:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.concatenate(ps), np.concatenate(qs)


def build_energy(
    image: RangeImage,
    xyz: np.ndarray,
    labels: np.ndarray,
    histograms: tuple[HeightHistogram, HeightHistogram],
    params: MrfParams,
    include_seed_edges: bool = True,
    row_range: tuple[int, int] | None = None,
) -> EnergyModel:
    """One node per occupied cell, 8-connected edges weighted by :func:`boundary_weight`.

    ``include_seed_edges=False`` omits edges joining two seeds; they add the
    same constant to every seed-consistent labeling. ``row_range`` limits the
    graph to laser rows ``[lo, hi)``.
    """
    index = image.index
    if row_range is not None:
        lo, hi = row_range
        index = index.copy()
        index[:lo] = -1
        index[hi:] = -1
    flat = index.ravel()
    node_cell = np.flatnonzero(flat >= 0)
    node_point = flat[node_cell]
    node_of_point = np.full(xyz.shape[0], -1, dtype=np.int64)
    node_of_point[node_point] = np.arange(node_point.size)

    node_labels = np.asarray(labels)[node_point]
    seed = np.zeros(node_point.size, dtype=np.int8)
    seed[node_labels == LabelState.HC_OBSTACLE] = 1
    seed[node_labels == LabelState.HC_GROUND] = -1
    seed[node_labels == LabelState.OBSTACLE] = 1
    seed[node_labels == LabelState.GROUND] = -1

    cost_obj = np.zeros(node_point.size)
    cost_bkg = np.zeros(node_point.size)
    free = np.flatnonzero(seed == 0)
    if free.size:
        d_obj, d_bkg = histograms
        co, cb = regional_costs(xyz[node_point[free], 2], d_obj, d_bkg)
        cost_obj[free] = params.lam * co
        cost_bkg[free] = params.lam * cb

    touching = None
    if not include_seed_edges:
        touching = np.zeros(flat.size, dtype=bool)
        touching[node_cell[seed == 0]] = True
        touching = touching.reshape(index.shape)
    p, q = _neighbor_pairs(index, touching)
    weights = boundary_weight(xyz[p], xyz[q], params.sigma, params.d_min)
    edges = np.stack([node_of_point[p], node_of_point[q]], axis=1) if p.size else np.zeros((0, 2), dtype=np.int64)
    return EnergyModel(node_point, node_cell, cost_obj, cost_bkg, seed, edges, weights, index.shape)


@dataclass(frozen=True, eq=False)
class FineResult:
    labels: np.ndarray
    seeded: np.ndarray
    model: EnergyModel
    flow: float
    free_nodes: int


def fine_segment(
    image: RangeImage,
    xyz: np.ndarray,
    labels: np.ndarray,
    params: MrfParams,
    row_range: tuple[int, int] | None = None,
    seeded: np.ndarray | None = None,
) -> FineResult:
    """Seed, build the MRF, cut it and map the cut back to Ground / Obstacle.

    ``labels`` are the coarse (Ground / Obstacle) labels. Raises
    :class:`SeedingError` when either seed class is empty.
    """
    if seeded is None:
        seeded = seed_high_confidence(labels, image, params)
    hist = build_histograms(xyz[:, 2], seeded, params.scale_k, params.epsilon_prob)
    model = build_energy(image, xyz, seeded, hist, params, include_seed_edges=False, row_range=row_range)
    out = np.where(
        (seeded == LabelState.HC_OBSTACLE) | (seeded == LabelState.OBSTACLE),
        LabelState.OBSTACLE,
        LabelState.GROUND,
    ).astype(LABEL_DTYPE)
    free = np.flatnonzero(model.seed == 0)
    flow = 0.0
    if free.size:
        net, nodes = model.to_network(contract_seeds=True)
        cut = net.solve()
        flow = cut.flow
        pts = model.node_point[nodes]
        out[pts] = np.where(cut.source_side, LabelState.OBSTACLE, LabelState.GROUND)
    return FineResult(out, seeded, model, flow, int(free.size))


def labeling_energy(model: EnergyModel, point_labels: np.ndarray) -> float:
    """Energy of a per-point Ground / Obstacle labeling under ``model``."""
    lab = np.asarray(point_labels)[model.node_point]
    obstacle = (lab == LabelState.OBSTACLE) | (lab == LabelState.HC_OBSTACLE)
    return model.energy(obstacle)
