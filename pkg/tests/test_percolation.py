from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from percap import _kernels as K
from percap.lattice import Edge, GraphSpec, Region, box_points, linf, neighbors
from percap.percolation import (
    Cluster,
    Configuration,
    annulus_count,
    connects,
    edge_state,
    explore,
    pioneers,
    run_explore_batch,
)


def bfs(cfg, x, region, limit=10**5):
    """Plain breadth-first search over edge_state, the reference for explore."""
    seen = {x}
    queue = deque([x])
    while queue:
        v = queue.popleft()
        for y in neighbors(v, cfg.spec):
            if y not in seen and region.contains(y) and edge_state(cfg, (v, y)):
                seen.add(y)
                queue.append(y)
                if len(seen) > limit:
                    raise RuntimeError("reference BFS too large")
    return seen


def test_edge_state_is_symmetric_and_deterministic():
    cfg = Configuration(GraphSpec(3, 0.5), 42, 7)
    for a in [(0, 0, 0), (5, -3, 2)]:
        for b in neighbors(a, cfg.spec):
            s = edge_state(cfg, (a, b))
            assert s == edge_state(cfg, (b, a)) == edge_state(Configuration(cfg.spec, 42, 7), Edge.canonical(a, b))


def test_edge_state_rejects_non_edges():
    cfg = Configuration(GraphSpec(2, 0.5), 1)
    with pytest.raises(ValueError):
        edge_state(cfg, ((0, 0), (1, 1)))


@pytest.mark.parametrize("p", [0.0, 1.0])
def test_extreme_p(p):
    cfg = Configuration(GraphSpec(2, p), 3)
    states = {edge_state(cfg, ((i, j), (i + 1, j))) for i in range(-5, 5) for j in range(-5, 5)}
    assert states == {bool(p)}


@pytest.mark.parametrize("d,p", [(2, 0.3), (3, 0.2), (11, 0.05)])
def test_open_fraction_is_binomial(d, p):
    spec = GraphSpec(d, p)
    n_open = n = 0
    for rep in range(20):
        cfg = Configuration(spec, 99, rep)
        for x in [tuple(int(c) for c in row) for row in np.random.default_rng(rep).integers(-50, 50, (100, d))]:
            for y in neighbors(x, spec)[:2]:
                n_open += edge_state(cfg, (x, y))
                n += 1
    se = np.sqrt(p * (1 - p) / n)
    assert abs(n_open / n - p) < 4 * se


def test_replicas_and_seeds_differ():
    spec = GraphSpec(2, 0.5)
    edges = [((i, 0), (i + 1, 0)) for i in range(64)]
    a = [edge_state(Configuration(spec, 1, 0), e) for e in edges]
    b = [edge_state(Configuration(spec, 1, 1), e) for e in edges]
    c = [edge_state(Configuration(spec, 2, 0), e) for e in edges]
    assert a != b and a != c


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**40), st.integers(0, 1000), st.sampled_from([(2, 0.45), (3, 0.22), (2, 0.6)]))
def test_explore_matches_reference_bfs(seed, rep, dp):
    d, p = dp
    spec = GraphSpec(d, p)
    cfg = Configuration(spec, seed, rep)
    box = Region.box((0,) * d, 5)
    cl = explore(cfg, (0,) * d, box)
    assert cl.vertices == bfs(cfg, (0,) * d, box)
    assert not cl.truncated
    ref_edges = {Edge.canonical(v, y) for v in cl.vertices for y in neighbors(v, spec)
                 if y in cl.vertices and edge_state(cfg, (v, y))}
    assert cl.open_edges == ref_edges


def test_explore_p_one_fills_box():
    spec = GraphSpec(3, 1.0)
    cfg = Configuration(spec, 0)
    cl = explore(cfg, (0, 0, 0), Region.box((0, 0, 0), 2))
    assert len(cl) == 125
    assert len(cl.open_edges) == 3 * 25 * 4
    assert pioneers(cl, spec) == {tuple(int(c) for c in p) for p in box_points((0, 0, 0), 2) if linf(p) == 2}


def test_truncation_iff_over_budget():
    spec = GraphSpec(2, 1.0)
    cfg = Configuration(spec, 0)
    box = Region.box((0, 0), 3)  # 49 vertices
    assert not explore(cfg, (0, 0), box, budget=49).truncated
    cl = explore(cfg, (0, 0), box, budget=48)
    assert cl.truncated and len(cl) <= 49


def test_explore_respects_half_space():
    spec = GraphSpec(2, 1.0)
    cfg = Configuration(spec, 0)
    region = Region.box((0, 0), 2).intersect(Region.half_space(1, 0))
    cl = explore(cfg, (0, 0), region)
    assert len(cl) == 15 and all(v[1] >= 0 for v in cl.vertices)


def test_cluster_text_round_trip():
    cfg = Configuration(GraphSpec(2, 0.5), 5)
    cl = explore(cfg, (0, 0), Region.box((0, 0), 4))
    assert Cluster.vertices_from_text(cl.to_text()) == cl.vertices


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32), st.integers(-3, 3), st.integers(-3, 3))
def test_connects_agrees_with_explore(seed, a, b):
    spec = GraphSpec(2, 0.5)
    cfg = Configuration(spec, seed)
    box = Region.box((0, 0), 4)
    cl = explore(cfg, (0, 0), box)
    v = connects(cfg, (0, 0), [(a, b)], box)
    assert v.connected == ((a, b) in cl.vertices)
    if v.connected:
        assert v.witness == (a, b)
    assert connects(cfg, (0, 0), [], box).status == K.DISCONNECTED


def test_connects_reports_truncation():
    cfg = Configuration(GraphSpec(2, 1.0), 0)
    v = connects(cfg, (0, 0), [(50, 50)], budget=100)
    assert v.truncated and not v.connected


def test_annulus_count_matches_explore():
    spec = GraphSpec(2, 0.55)
    for rep in range(20):
        cfg = Configuration(spec, 8, rep)
        cl = explore(cfg, (1, 0), Region.full(), budget=10**5)
        if cl.truncated:
            continue
        got = annulus_count(cfg, (1, 0), (0, 0), 6, 2)
        assert got.count == sum(1 for v in cl.vertices if 4 < linf(v) <= 6)
        out = annulus_count(cfg, (1, 0), (0, 0), 6, 2, outward=True)
        assert out.count == sum(1 for v in cl.vertices if 6 < linf(v) <= 8)


def test_batch_matches_single_queries():
    spec = GraphSpec(3, 0.25)
    z = (3, 0, 0)
    status, size, hit, _ = run_explore_batch(
        spec, 11, 0, 200, np.zeros((1, 3), dtype=np.int64), Region.full(),
        target_pts=np.array([z]), stop_on_hit=True, budget=10**5,
    )
    for i in range(200):
        v = connects(Configuration(spec, 11, i), (0, 0, 0), [z], budget=10**5)
        assert v.status == status[i]


def test_reverse_fallback_keeps_verdicts_exact():
    """A truncated forward search retried from the target side never changes
    a verdict that a large budget settles."""
    spec = GraphSpec(3, 0.24)
    z = (4, 0, 0)
    seeds = np.zeros((1, 3), dtype=np.int64)
    tp = np.array([z])
    big, *_ = run_explore_batch(spec, 5, 0, 400, seeds, Region.full(), tp, None, True, 10**6)
    small, *_ = run_explore_batch(spec, 5, 0, 400, seeds, Region.full(), tp, None, True, 30, reverse=True)
    settled = small != K.TRUNCATED
    assert (small[settled] == big[settled]).all()
    plain, *_ = run_explore_batch(spec, 5, 0, 400, seeds, Region.full(), tp, None, True, 30)
    assert (small == K.TRUNCATED).sum() <= (plain == K.TRUNCATED).sum()
