import itertools

import numpy as np
import pytest

from percap import _kernels as K
from percap.lattice import GraphSpec, Region
from percap.montecarlo import Underpowered, estimate_hit
from percap.percolation import Configuration, explore, kernel_model, seed64
from percap.walker import (
    ClusterGraph,
    CounterStream,
    estimate_equilibrium,
    estimate_iic_hit,
    exact_hit_distribution,
    iic_attempts,
    iic_sample,
    ordering_equilibrium,
    solve_hitting,
    srw_hit,
)


def V(*ids):
    return [(i,) for i in ids]


def graph(n, edges):
    return ClusterGraph.from_edges(V(*range(n)), [((a,), (b,)) for a, b in edges])


def path_graph(n):
    return graph(n, [(i, i + 1) for i in range(n - 1)])


def test_gamblers_ruin():
    # walk on 0..4 from 1, absorbed at {0, 4}: P(hit 4) = 1/4
    mu = exact_hit_distribution(path_graph(5), (1,), V(0, 4))
    w = dict(zip(mu.support, mu.weights))
    assert w[(4,)] == pytest.approx(0.25, abs=1e-12) and w[(0,)] == pytest.approx(0.75, abs=1e-12)


def test_star_is_uniform():
    g = graph(6, [(0, i) for i in range(1, 6)])
    mu = exact_hit_distribution(g, (0,), V(1, 2, 3, 4, 5))
    assert np.allclose(mu.weights, 0.2)


def test_asymmetric_adjacency_rejected():
    with pytest.raises(ValueError):
        ClusterGraph(V(0, 1), {(0,): [(1,)], (1,): []})


def test_start_in_target():
    assert srw_hit(path_graph(3), (1,), V(1)).steps == 0


def test_counter_stream_is_uniform():
    s = CounterStream(3, 0)
    draws = np.array([s.below(6) for _ in range(12000)])
    counts = np.bincount(draws, minlength=6)
    assert counts.min() > 1800 and counts.max() < 2200


def test_walk_timeout():
    g = graph(3, [(0, 1)])
    rec = srw_hit(path_graph(1000), (0,), V(999), max_steps=10)
    assert rec.timeout and rec.steps == 10
    assert srw_hit(g, (0,), V(2, 1)).hit_point == (1,)


def test_exact_solver_residual_on_clusters():
    spec = GraphSpec(2, 0.6)
    for rep in range(10):
        cl = explore(Configuration(spec, 4, rep), (0, 0), Region.box((0, 0), 5))
        if len(cl) < 5:
            continue
        g = ClusterGraph.from_cluster(cl, spec)
        A = sorted(cl.vertices)[-3:]
        sol = solve_hitting(g, A)
        assert sol.residual <= 1e-10
        assert np.allclose(sol.matrix.sum(axis=1), 1.0)


def test_compiled_walk_matches_python_walk():
    """The in-kernel walk and srw_hit on the explored cluster make the same moves."""
    spec = GraphSpec(3, 0.3)
    m = kernel_model(spec)
    checked = 0
    for rep in range(600):
        cfg = Configuration(spec, 77, rep)
        cl = explore(cfg, (0, 0, 0), budget=5000)
        if cl.truncated or len(cl) < 4:
            continue
        g = ClusterGraph.from_cluster(cl, spec)
        A = sorted(cl.vertices)[:2]
        if (0, 0, 0) in A:
            continue
        apts = np.array(A, dtype=np.int64)
        tt, tl = K.build_set(apts, m.mult)
        wk1, wk2 = (np.uint64(k) for k in K.stream_key(seed64(77), rep, K.TAG_WALK))
        k1, k2 = cfg.keys
        rk, rc, ra, rb = Region.full().encode(3)
        status, idx, steps = K.walk_core(
            np.zeros(3, dtype=np.int64), wk1, wk2, k1, k2, *m.args(), rk, rc, ra, rb,
            apts, tl, tt, 10**6,
        )
        rec = srw_hit(g, (0, 0, 0), A, rng_stream=CounterStream(77, rep))
        assert status == K.CONNECTED
        assert A[idx] == rec.hit_point and steps == rec.steps
        checked += 1
    assert checked >= 30


def _fixtures():
    yield path_graph(6), (2,), V(0, 5)
    yield graph(6, [(i, (i + 1) % 6) for i in range(6)]), (0,), V(2, 3, 4)
    grid = [(i, j) for i in range(3) for j in range(3)]
    edges = [(a, b) for a, b in itertools.combinations(grid, 2)
             if abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1]
    yield ClusterGraph.from_edges(grid, edges), (1, 1), [(0, 0), (2, 2), (0, 2)]
    yield graph(5, list(itertools.combinations(range(5), 2))), (0,), V(3, 4)
    yield graph(7, [(0, 1), (0, 2), (1, 3), (1, 4), (2, 5), (2, 6)]), (0,), V(3, 4, 5, 6)
    spec = GraphSpec(2, 0.65)
    found = 0
    for rep in range(100):
        cl = explore(Configuration(spec, 31, rep), (0, 0), Region.box((0, 0), 4))
        if len(cl) >= 12:
            g = ClusterGraph.from_cluster(cl, spec)
            A = sorted(cl.vertices)[-2:] + sorted(cl.vertices)[:1]
            if (0, 0) not in A:
                yield g, (0, 0), A
                found += 1
        if found == 5:
            return


def test_walk_oracle_total_variation():
    fixtures = list(_fixtures())
    assert len(fixtures) == 10
    n = 3000
    for k, (g, start, A) in enumerate(fixtures):
        exact = exact_hit_distribution(g, start, A)
        p = dict(zip(exact.support, exact.weights))
        counts = {}
        for rep in range(n):
            rec = srw_hit(g, start, A, rng_stream=CounterStream(1000 + k, rep))
            counts[rec.hit_point] = counts.get(rec.hit_point, 0) + 1
        tv = 0.5 * sum(abs(counts.get(a, 0) / n - p.get(a, 0.0)) for a in set(p) | set(counts))
        assert tv <= 4 * np.sqrt(len(A) / n)


def test_equilibrium_total_counts_every_connection():
    spec = GraphSpec(2, 0.45)
    A = [(0, 0), (1, 0), (0, 1)]
    z = (4, 0)
    res = estimate_equilibrium(A, z, spec, 4000, seed=3)
    hit = estimate_hit(A, z, spec, 4000, seed=3)
    assert res.n_timeout == 0
    assert res.total.numerator.hits == hit.hits
    assert sum(e.numerator.hits for e in res.estimates) == hit.hits
    assert sum(e.ratio for e in res.estimates) == pytest.approx(res.total.ratio)


@pytest.mark.parametrize("order", [[(0, 0), (1, 0), (0, 1)], [(0, 1), (0, 0), (1, 0)]])
def test_ordering_total_counts_every_connection(order):
    spec = GraphSpec(2, 0.45)
    res = ordering_equilibrium(order, (4, 0), spec, 4000, seed=3)
    hit = estimate_hit(order, (4, 0), spec, 4000, seed=3)
    assert res.total.numerator.hits == hit.hits
    # the first point of the order gets every configuration where it is connected
    first = estimate_hit([order[0]], (4, 0), spec, 4000, seed=3)
    assert res.estimates[0].numerator.hits == first.hits


def test_iic_at_p_one_always_accepts_and_hits():
    spec = GraphSpec(3, 1.0)
    codes = iic_attempts((3, 0, 0), (3, 0, 2), [(0, 0, 0)], spec, 50, budget=10**4)
    assert set(codes.tolist()) == {2}
    est = estimate_iic_hit([(0, 0, 0)], (3, 0, 0), 2, spec, 100, budget=10**4, max_attempts=300)
    assert est.hits == est.accepted == 100
    assert est.scaled == pytest.approx(3.0 ** (3 - 4))


def test_iic_sample_conditions_on_connection():
    spec = GraphSpec(2, 0.5)
    s = iic_sample((0, 0), (3, 0), spec, budget=10**5, seed=2)
    assert (3, 0) in s.cluster.vertices


def test_iic_underpowered():
    spec = GraphSpec(3, 0.1)
    with pytest.raises(Underpowered):
        estimate_iic_hit([(0, 0, 0)], (4, 0, 0), 6, spec, 100, max_attempts=1000)
