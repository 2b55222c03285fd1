import numpy as np
import pytest

from percap.lattice import GraphSpec, Region
from percap.montecarlo import Estimate
from percap.oracle import MAX_EDGES, TinyGraph, enumerate_box, enumerate_event

# exact values in d=2, B(0,1), source 0, target (1,0), frozen from the enumeration
FROZEN = {
    0.3: (
        0.3397365765929997,
        3.090367813107998,
        (0.2401, 0.201684, 0.18454086, 0.1582556724, 0.103044007521, 0.063829997784,
         0.03063575844, 0.013583124576, 0.004326579279),
    ),
    0.5: (
        0.632080078125,
        5.4853515625,
        (0.0625, 0.0625, 0.0859375, 0.12890625, 0.136962890625, 0.158203125, 0.134765625,
         0.125, 0.105224609375),
    ),
}


@pytest.mark.parametrize("p", [0.3, 0.5])
def test_frozen_box_values(p):
    res = enumerate_box(GraphSpec(2, p), 1, (0, 0), (1, 0))
    prob, size, dist = FROZEN[p]
    assert res.n_edges == 12
    assert res.connect_prob == pytest.approx(prob, abs=1e-14)
    assert res.mean_size == pytest.approx(size, abs=1e-13)
    assert res.boundary_distribution == pytest.approx(dist, abs=1e-14)
    assert sum(res.boundary_distribution) == pytest.approx(1.0, abs=1e-14)


def test_half_probability_is_dyadic():
    # every configuration weighs 2^-12 at p=1/2, so values are multiples of 2^-12
    res = enumerate_box(GraphSpec(2, 0.5), 1, (0, 0), (1, 0))
    assert (res.connect_prob * 4096) == int(res.connect_prob * 4096)


def test_path_graph_by_hand():
    g = TinyGraph(((0,), (1,), (2,)), ((0, 1), (1, 2)))
    p = 0.37
    assert enumerate_event(g, p, lambda m, lab: lab[:, 0] == lab[:, 2]) == pytest.approx(p * p)
    assert enumerate_event(g, p, lambda m, lab: lab[:, 0] == lab[:, 1]) == pytest.approx(p)


def test_cycle_by_hand():
    # 4-cycle: 0 and 2 joined unless both arcs are broken
    g = TinyGraph(((0,), (1,), (2,), (3,)), ((0, 1), (1, 2), (2, 3), (0, 3)))
    p = 0.6
    expect = 1 - (1 - p * p) ** 2
    assert enumerate_event(g, p, lambda m, lab: lab[:, 0] == lab[:, 2]) == pytest.approx(expect)


def test_restricted_graph_counts():
    g = TinyGraph.restricted(GraphSpec(2, 0.5), Region.box((0, 0), 1))
    assert len(g.vertices) == 9 and len(g.edges) == 12


def test_edge_limit():
    g = TinyGraph.restricted(GraphSpec(3, 0.5), Region.box((0, 0, 0), 1))
    assert len(g.edges) > MAX_EDGES
    with pytest.raises(ValueError):
        enumerate_event(g, 0.5, lambda m, lab: lab[:, 0] == 0)


def test_monte_carlo_agrees_with_enumeration_small():
    from percap.percolation import Configuration, explore

    spec = GraphSpec(2, 0.5)
    box = Region.box((0, 0), 1)
    n = 4000
    hits = sum((1, 0) in explore(Configuration(spec, 21, i), (0, 0), box) for i in range(n))
    est = Estimate.from_counts(hits, 0, n)
    assert abs(est.value - FROZEN[0.5][0]) < 3.5 * est.std_error
