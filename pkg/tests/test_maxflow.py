import io
from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groundcut.errors import UsageError
from groundcut.maxflow import EPS, FlowNetwork
from flow_oracle import brute_min_cut, random_network


def residual_reach(net, res):
    """Nodes reachable from the source in the residual graph."""
    u, v, _, _ = net.edge_arrays()
    n = net.node_count
    adj = [[] for _ in range(n)]
    for e, (a, b) in enumerate(zip(u.tolist(), v.tolist())):
        adj[a].append((b, 2 * e))
        adj[b].append((a, 2 * e + 1))
    seen = [res.terminal_residual[i] > EPS for i in range(n)]
    queue = deque(i for i in range(n) if seen[i])
    while queue:
        a = queue.popleft()
        for b, arc in adj[a]:
            if not seen[b] and res.residual[arc] > EPS:
                seen[b] = True
                queue.append(b)
    return np.array(seen, dtype=bool)


def test_add_node_ids():
    net = FlowNetwork()
    assert list(net.add_node(0)) == []
    assert list(net.add_node(3)) == [0, 1, 2]
    assert list(net.add_node(2)) == [3, 4]


def test_invalid_input():
    net = FlowNetwork(2)
    with pytest.raises(UsageError):
        net.add_edge(0, 2, 1.0)
    with pytest.raises(UsageError):
        net.add_edge(0, 0, 1.0)
    with pytest.raises(UsageError):
        net.add_edge(0, 1, -1.0)
    with pytest.raises(UsageError):
        net.set_terminal(5, 1.0, 1.0)
    with pytest.raises(UsageError):
        net.set_terminal(0, -1.0, 1.0)
    with pytest.raises(UsageError):
        net.add_edges([0], [3], [1.0])


def test_empty_network():
    res = FlowNetwork().solve()
    assert res.flow == 0.0
    assert res.source_side.size == 0


def test_single_node_goes_to_stronger_terminal():
    net = FlowNetwork(1)
    net.set_terminal(0, 5.0, 3.0)
    res = net.solve()
    assert res.flow == 3.0
    assert res.source_side.tolist() == [True]


def test_isolated_node_defaults_to_sink():
    net = FlowNetwork(2)
    net.set_terminal(0, 2.0, 2.0)
    res = net.solve()
    assert res.flow == 2.0
    assert res.source_side.tolist() == [False, False]


def test_two_node_path():
    net = FlowNetwork(2)
    net.set_terminal(0, 4.0, 0.0)
    net.set_terminal(1, 0.0, 4.0)
    net.add_edge(0, 1, 2.0)
    res = net.solve()
    assert res.flow == 2.0
    assert res.source_side.tolist() == [True, False]


def test_zero_capacity_edge_never_carries_flow():
    net = FlowNetwork(2)
    net.set_terminal(0, 4.0, 0.0)
    net.set_terminal(1, 0.0, 4.0)
    net.add_edge(0, 1, 0.0, 0.0)
    assert net.solve().flow == 0.0


def test_set_terminal_replaces():
    net = FlowNetwork(1)
    net.set_terminal(0, 5.0, 5.0)
    net.set_terminal(0, 1.0, 2.0)
    assert net.solve().flow == 1.0


def test_duplicate_edges_add_up(rng):
    for _ in range(100):
        net, n, cap_s, cap_t, edges = random_network(rng, 8)
        split = FlowNetwork(n)
        for i in range(n):
            split.set_terminal(i, cap_s[i], cap_t[i])
        for u, v, a, b in edges:
            split.add_edge(u, v, a / 2, b / 4)
            split.add_edge(u, v, a / 2, 3 * b / 4)
        assert split.solve().flow == pytest.approx(net.solve().flow, abs=1e-9)


def test_terminal_cancellation_keeps_cut(rng):
    for _ in range(100):
        net, n, cap_s, cap_t, edges = random_network(rng, 8)
        shifted = FlowNetwork(n)
        extra = rng.integers(0, 5, n)
        for i in range(n):
            shifted.set_terminal(i, cap_s[i] + extra[i], cap_t[i] + extra[i])
        for e in edges:
            shifted.add_edge(*e)
        a, b = net.solve(), shifted.solve()
        assert b.flow == pytest.approx(a.flow + extra.sum())
        assert shifted.cut_capacity(a.source_side) == pytest.approx(b.flow)


def test_flow_matches_exhaustive_cut(rng):
    for _ in range(300):
        net, n, cap_s, cap_t, edges = random_network(rng)
        res = net.solve()
        assert res.flow == brute_min_cut(n, cap_s, cap_t, edges)
        assert net.cut_capacity(res.source_side) == res.flow


def test_conservation_and_residual_optimality(rng):
    for _ in range(200):
        net, n, cap_s, cap_t, edges = random_network(rng)
        res = net.solve()
        u, v, cuv, cvu = net.edge_arrays()
        assert np.all(res.residual >= -1e-12)
        f = res.edge_flow(net)
        # net flow on an edge cannot exceed either direction's capacity
        assert np.all(f <= cuv + 1e-12) and np.all(-f <= cvu + 1e-12)
        inflow = np.zeros(n)
        np.add.at(inflow, v, f)
        np.add.at(inflow, u, -f)
        source_in = np.asarray(cap_s, float) - np.asarray(cap_t, float) - res.terminal_residual
        np.testing.assert_allclose(source_in + inflow, 0.0, atol=1e-9)
        reach = residual_reach(net, res)
        assert not np.any(reach & (res.terminal_residual < -EPS))
        np.testing.assert_array_equal(reach, res.source_side)


def test_float_capacities(rng):
    for _ in range(150):
        n = int(rng.integers(1, 10))
        net = FlowNetwork(n)
        cs, ct = rng.random(n) * 3, rng.random(n) * 3
        net.set_terminals(np.arange(n), cs, ct)
        edges = []
        for _ in range(2 * n):
            if n < 2:
                break
            a, b = rng.choice(n, 2, replace=False)
            e = (int(a), int(b), float(rng.random()), float(rng.random()))
            edges.append(e)
            net.add_edge(*e)
        assert net.solve().flow == pytest.approx(brute_min_cut(n, cs, ct, edges), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 5))
def test_raising_a_capacity_never_lowers_flow(seed, bump):
    rng = np.random.default_rng(seed)
    net, n, cap_s, cap_t, edges = random_network(rng, 8)
    base = net.solve().flow
    which = int(rng.integers(0, n))
    net.set_terminal(which, cap_s[which] + bump, cap_t[which])
    assert net.solve().flow >= base
    if edges:
        net.add_edge(edges[0][0], edges[0][1], bump)
        assert net.solve().flow >= base


def test_grid_network_against_exhaustive_cut(rng):
    # 3x4 grid with 8-neighbors, the shape the segmentation graph has
    rows, cols = 3, 4
    n = rows * cols
    for _ in range(20):
        net = FlowNetwork(n)
        cs, ct = rng.random(n) * 4, rng.random(n) * 4
        net.set_terminals(np.arange(n), cs, ct)
        edges = []
        for r in range(rows):
            for c in range(cols):
                for dr, dc in ((0, 1), (1, -1), (1, 0), (1, 1)):
                    r2, c2 = r + dr, (c + dc) % cols
                    if r2 < rows:
                        w = float(rng.random())
                        edges.append((r * cols + c, r2 * cols + c2, w, w))
        u, v, a, b = map(np.array, zip(*edges))
        net.add_edges(u, v, a, b)
        assert net.solve().flow == pytest.approx(brute_min_cut(n, cs, ct, edges), abs=1e-9)


def test_solve_is_deterministic_and_repeatable(rng):
    net, *_ = random_network(rng)
    a, b = net.solve(), net.solve()
    assert a.flow == b.flow
    np.testing.assert_array_equal(a.source_side, b.source_side)


def test_reset_reuses_instance():
    net = FlowNetwork(3)
    net.add_edge(0, 1, 1.0)
    net.reset()
    assert net.node_count == 0 and net.edge_count == 0
    net.add_node(1)
    net.set_terminal(0, 1.0, 1.0)
    assert net.solve().flow == 1.0


def test_dimacs_dump():
    net = FlowNetwork(2)
    net.set_terminal(0, 3.0, 0.0)
    net.set_terminal(1, 0.0, 2.5)
    net.add_edge(0, 1, 1.0, 0.5)
    buf = io.StringIO()
    net.write_dimacs(buf)
    lines = buf.getvalue().splitlines()
    assert lines[:3] == ["p max 4 4", "n 3 s", "n 4 t"]
    assert sorted(lines[3:]) == sorted(["a 3 1 3", "a 2 4 2.5", "a 1 2 1", "a 2 1 0.5"])
