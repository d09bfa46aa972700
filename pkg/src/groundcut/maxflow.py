"""Exact s-t min-cut by augmenting paths over two reusable search trees.

The solver grows a tree from the source and one from the sink over residual
arcs; when they touch, the path is augmented, saturated tree arcs turn their
children into orphans, and orphans are re-adopted inside their own tree when
possible. Trees survive across augmentations, which is what makes the method
fast on grid graphs where most nodes are attached to a terminal.

Arc ``a`` and its reverse are stored as ``a`` and ``a ^ 1``.
"""

from __future__ import annotations

import io
import os
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import UsageError

EPS = 1e-12

_FREE = -1
_TERMINAL = -2
_ORPHAN = -3
_INF_DIST = 1 << 60


@dataclass(frozen=True, eq=False)
class CutResult:
    """Max-flow value and the min-cut side of every node.

    ``source_side[i]`` is True for nodes left connected to the source. Nodes
    reachable from neither terminal are put on the sink side.
    """

    flow: float
    source_side: np.ndarray
    residual: np.ndarray
    terminal_residual: np.ndarray

    def edge_flow(self, network: "FlowNetwork") -> np.ndarray:
        """Net flow along each edge in its ``u -> v`` direction."""
        _, _, cap_uv, _ = network.edge_arrays()
        return cap_uv - self.residual[0::2]


class FlowNetwork:
    """Capacitated graph with implicit source and sink terminals."""

    def __init__(self, n_nodes: int = 0):
        self.reset()
        if n_nodes:
            self.add_node(n_nodes)

    def reset(self) -> None:
        """Drop all nodes and edges."""
        self._n = 0
        self._cap_s: list[float] = []
        self._cap_t: list[float] = []
        self._chunks: list[tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]] = []
        self._pending: list[tuple[int, int, float, float]] = []

    @property
    def node_count(self) -> int:
        return self._n

    @property
    def edge_count(self) -> int:
        self._flush()
        return sum(c[0].size for c in self._chunks)

    def add_node(self, n: int = 1) -> range:
        if n < 0:
            raise UsageError("cannot add a negative number of nodes")
        first = self._n
        self._n += n
        self._cap_s.extend([0.0] * n)
        self._cap_t.extend([0.0] * n)
        return range(first, self._n)

    def _check_node(self, u: int) -> None:
        if not 0 <= u < self._n:
            raise UsageError(f"node id {u} out of range [0, {self._n})")

    def add_edge(self, u: int, v: int, cap_uv: float, cap_vu: float = 0.0) -> None:
        """Add an arc pair; parallel edges add up."""
        self._check_node(u)
        self._check_node(v)
        if u == v:
            raise UsageError("self loops are not allowed")
        if cap_uv < 0 or cap_vu < 0:
            raise UsageError("capacities must be non-negative")
        self._pending.append((u, v, float(cap_uv), float(cap_vu)))

    def add_edges(self, u, v, cap_uv, cap_vu=None) -> None:
        """Vectorized :meth:`add_edge`."""
        u = np.asarray(u, dtype=np.int64).ravel()
        v = np.asarray(v, dtype=np.int64).ravel()
        cap_uv = np.broadcast_to(np.asarray(cap_uv, dtype=float), u.shape).copy()
        cap_vu = np.zeros(u.shape) if cap_vu is None else np.broadcast_to(np.asarray(cap_vu, dtype=float), u.shape).copy()
        if u.shape != v.shape:
            raise UsageError("u and v must have the same length")
        if u.size:
            if min(u.min(), v.min()) < 0 or max(u.max(), v.max()) >= self._n:
                raise UsageError("edge endpoint out of range")
            if np.any(u == v):
                raise UsageError("self loops are not allowed")
            if np.any(cap_uv < 0) or np.any(cap_vu < 0):
                raise UsageError("capacities must be non-negative")
        self._flush()
        self._chunks.append((u, v, cap_uv, cap_vu))

    def set_terminal(self, u: int, cap_source: float, cap_sink: float) -> None:
        """Replace the terminal capacities of node ``u``."""
        self._check_node(u)
        if cap_source < 0 or cap_sink < 0:
            raise UsageError("capacities must be non-negative")
        self._cap_s[u] = float(cap_source)
        self._cap_t[u] = float(cap_sink)

    def set_terminals(self, nodes, cap_source, cap_sink) -> None:
        nodes = np.asarray(nodes, dtype=np.int64).ravel()
        cs = np.broadcast_to(np.asarray(cap_source, dtype=float), nodes.shape)
        ct = np.broadcast_to(np.asarray(cap_sink, dtype=float), nodes.shape)
        if nodes.size and (nodes.min() < 0 or nodes.max() >= self._n):
            raise UsageError("node id out of range")
        if np.any(cs < 0) or np.any(ct < 0):
            raise UsageError("capacities must be non-negative")
        cap_s = np.asarray(self._cap_s)
        cap_t = np.asarray(self._cap_t)
        cap_s[nodes] = cs
        cap_t[nodes] = ct
        self._cap_s = cap_s.tolist()
        self._cap_t = cap_t.tolist()

    def terminal_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self._cap_s, dtype=float), np.asarray(self._cap_t, dtype=float)

    def _flush(self) -> None:
        if self._pending:
            u, v, a, b = zip(*self._pending)
            self._chunks.append(
                (np.array(u, dtype=np.int64), np.array(v, dtype=np.int64), np.array(a), np.array(b))
            )
            self._pending = []

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        self._flush()
        if not self._chunks:
            e = np.zeros(0, dtype=np.int64)
            return e, e.copy(), np.zeros(0), np.zeros(0)
        if len(self._chunks) > 1:
            self._chunks = [tuple(np.concatenate(parts) for parts in zip(*self._chunks))]
        return self._chunks[0]

    def cut_capacity(self, source_side) -> float:
        """Capacity of the cut induced by a side assignment."""
        s = np.asarray(source_side, dtype=bool)
        cap_s, cap_t = self.terminal_arrays()
        u, v, cuv, cvu = self.edge_arrays()
        total = cap_s[~s].sum() + cap_t[s].sum()
        total += cuv[s[u] & ~s[v]].sum() + cvu[s[v] & ~s[u]].sum()
        return float(total)

    def write_dimacs(self, target: str | os.PathLike | io.TextIOBase) -> None:
        """Dump as a DIMACS max-flow problem; source is node n+1, sink n+2."""
        u, v, cuv, cvu = self.edge_arrays()
        cap_s, cap_t = self.terminal_arrays()
        n = self._n
        src, snk = n + 1, n + 2
        lines = []
        for i in range(n):
            if cap_s[i] > 0:
                lines.append(f"a {src} {i + 1} {cap_s[i]:.17g}")
            if cap_t[i] > 0:
                lines.append(f"a {i + 1} {snk} {cap_t[i]:.17g}")
        for a, b, c, d in zip(u.tolist(), v.tolist(), cuv.tolist(), cvu.tolist()):
            if c > 0:
                lines.append(f"a {a + 1} {b + 1} {c:.17g}")
            if d > 0:
                lines.append(f"a {b + 1} {a + 1} {d:.17g}")
        header = [f"p max {n + 2} {len(lines)}", f"n {src} s", f"n {snk} t"]
        text = "\n".join(header + lines) + "\n"
        if isinstance(target, io.TextIOBase):
            target.write(text)
        else:
            with open(target, "w", encoding="ascii") as fh:
                fh.write(text)

    def solve(self) -> CutResult:
        """Compute the maximum flow and a minimum cut. Capacities are not modified."""
        return _solve(self)


def _solve(net: FlowNetwork) -> CutResult:
    n = net.node_count
    u, v, cuv, cvu = net.edge_arrays()
    m = u.size
    # arc 2e: u->v, arc 2e+1: v->u
    head_arr = np.empty(2 * m, dtype=np.int64)
    head_arr[0::2] = v
    head_arr[1::2] = u
    rcap_arr = np.empty(2 * m)
    rcap_arr[0::2] = cuv
    rcap_arr[1::2] = cvu
    tails = np.empty(2 * m, dtype=np.int64)
    tails[0::2] = u
    tails[1::2] = v
    order = np.argsort(tails, kind="stable").tolist()
    bounds = np.concatenate([[0], np.cumsum(np.bincount(tails, minlength=n))]).tolist()
    out = [order[bounds[i] : bounds[i + 1]] for i in range(n)]
    head = head_arr.tolist()
    rcap = rcap_arr.tolist()

    cap_s = net._cap_s
    cap_t = net._cap_t
    flow = 0.0
    tr = [0.0] * n
    parent = [_FREE] * n
    sink = [False] * n
    ts = [0] * n
    dist = [0] * n
    active = deque()
    in_active = [False] * n
    for i in range(n):
        cs, ct = cap_s[i], cap_t[i]
        flow += cs if cs < ct else ct
        d = cs - ct
        tr[i] = d
        if d > EPS:
            parent[i] = _TERMINAL
            dist[i] = 1
            active.append(i)
            in_active[i] = True
        elif d < -EPS:
            parent[i] = _TERMINAL
            sink[i] = True
            dist[i] = 1
            active.append(i)
            in_active[i] = True

    time = 0
    orphans: deque[int] = deque()

    while active:
        i = active[0]
        if parent[i] == _FREE:
            active.popleft()
            in_active[i] = False
            continue

        # grow the tree of i by one layer
        found = -1
        if not sink[i]:
            di = dist[i] + 1
            ti = ts[i]
            for a in out[i]:
                if rcap[a] > EPS:
                    j = head[a]
                    pj = parent[j]
                    if pj == _FREE:
                        sink[j] = False
                        parent[j] = a ^ 1
                        ts[j] = ti
                        dist[j] = di
                        if not in_active[j]:
                            active.append(j)
                            in_active[j] = True
                    elif sink[j]:
                        found = a
                        break
                    elif ts[j] <= ti and dist[j] > di:
                        parent[j] = a ^ 1
                        ts[j] = ti
                        dist[j] = di
        else:
            di = dist[i] + 1
            ti = ts[i]
            for a in out[i]:
                if rcap[a ^ 1] > EPS:
                    j = head[a]
                    pj = parent[j]
                    if pj == _FREE:
                        sink[j] = True
                        parent[j] = a ^ 1
                        ts[j] = ti
                        dist[j] = di
                        if not in_active[j]:
                            active.append(j)
                            in_active[j] = True
                    elif not sink[j]:
                        found = a ^ 1
                        break
                    elif ts[j] <= ti and dist[j] > di:
                        parent[j] = a ^ 1
                        ts[j] = ti
                        dist[j] = di

        time += 1
        if found < 0:
            active.popleft()
            in_active[i] = False
            continue

        # augment along source-root ... found ... sink-root
        a = found
        bottleneck = rcap[a]
        k = head[a ^ 1]
        while True:
            pa = parent[k]
            if pa == _TERMINAL:
                break
            c = rcap[pa ^ 1]
            if c < bottleneck:
                bottleneck = c
            k = head[pa]
        if tr[k] < bottleneck:
            bottleneck = tr[k]
        k = head[a]
        while True:
            pa = parent[k]
            if pa == _TERMINAL:
                break
            c = rcap[pa]
            if c < bottleneck:
                bottleneck = c
            k = head[pa]
        if -tr[k] < bottleneck:
            bottleneck = -tr[k]

        rcap[a ^ 1] += bottleneck
        rcap[a] -= bottleneck
        k = head[a ^ 1]
        while True:
            pa = parent[k]
            if pa == _TERMINAL:
                break
            rcap[pa] += bottleneck
            rcap[pa ^ 1] -= bottleneck
            if rcap[pa ^ 1] <= EPS:
                parent[k] = _ORPHAN
                orphans.append(k)
            k = head[pa]
        tr[k] -= bottleneck
        if tr[k] <= EPS:
            parent[k] = _ORPHAN
            orphans.append(k)
        k = head[a]
        while True:
            pa = parent[k]
            if pa == _TERMINAL:
                break
            rcap[pa ^ 1] += bottleneck
            rcap[pa] -= bottleneck
            if rcap[pa] <= EPS:
                parent[k] = _ORPHAN
                orphans.append(k)
            k = head[pa]
        tr[k] += bottleneck
        if tr[k] >= -EPS:
            parent[k] = _ORPHAN
            orphans.append(k)
        flow += bottleneck

        # adopt orphans
        while orphans:
            o = orphans.popleft()
            o_sink = sink[o]
            best_arc = -1
            best_d = _INF_DIST
            for a0 in out[o]:
                # residual into o for the source tree, out of o for the sink tree
                if (rcap[a0] if o_sink else rcap[a0 ^ 1]) <= EPS:
                    continue
                j = head[a0]
                if sink[j] != o_sink or parent[j] == _FREE:
                    continue
                d = 0
                k = j
                while True:
                    if ts[k] == time:
                        d += dist[k]
                        break
                    pk = parent[k]
                    d += 1
                    if pk == _TERMINAL:
                        ts[k] = time
                        dist[k] = 1
                        break
                    if pk == _ORPHAN:
                        d = _INF_DIST
                        break
                    k = head[pk]
                if d < _INF_DIST:
                    if d < best_d:
                        best_arc = a0
                        best_d = d
                    k = j
                    while ts[k] != time:
                        ts[k] = time
                        dist[k] = d
                        d -= 1
                        k = head[parent[k]]
            if best_arc >= 0:
                parent[o] = best_arc
                ts[o] = time
                dist[o] = best_d + 1
                continue
            # no valid parent: free o and orphan its children
            for a0 in out[o]:
                j = head[a0]
                if sink[j] != o_sink:
                    continue
                pj = parent[j]
                if pj == _FREE:
                    continue
                if (rcap[a0] if o_sink else rcap[a0 ^ 1]) > EPS and not in_active[j]:
                    active.append(j)
                    in_active[j] = True
                if pj >= 0 and head[pj] == o:
                    parent[j] = _ORPHAN
                    orphans.append(j)
            parent[o] = _FREE

    source_side = np.fromiter(
        (parent[i] != _FREE and not sink[i] for i in range(n)), dtype=bool, count=n
    )
    residual = np.empty(2 * m)
    if m:
        residual[:] = rcap
    return CutResult(float(flow), source_side, residual, np.asarray(tr, dtype=float))
