import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from percap.lattice import GraphSpec, Region, linf
from percap.montecarlo import Estimate
from percap.percolation import Cluster, Configuration, explore, pioneers
from percap.regularity import (
    Infeasible,
    RegularityReport,
    classify_regular,
    density_check,
    greedy_separated,
    line_good,
    local_density_check,
    max_disjoint_paths,
    regular_fraction_experiment,
    regularity_counts,
    segment,
    surface_threshold,
    volume_threshold,
)

D = 11
R = 10
X = (R,) + (0,) * (D - 1)


def fixture_cluster(points, r=R, d=D):
    return Cluster(points[0], Region.box((0,) * d, r), set(points), set(), False, len(points))


def interior_points(count):
    """Points of B(X, 3) strictly inside B(0, R)."""
    out = []
    for a in range(1, 4):
        for rest in itertools.product(range(-3, 4), range(-3, 4), (0, 1)):
            out.append((R - a,) + rest + (0,) * (D - 4))
    return out[:count]


def boundary_points(count):
    """Points of B(X, 3) on the face x_1 = R, X first."""
    pts = [X]
    for b, c in itertools.product(range(-3, 4), range(-3, 4)):
        if (b, c) != (0, 0):
            pts.append((R, b, c) + (0,) * (D - 3))
    return pts[:count]


def test_threshold_values():
    assert volume_threshold(3) == pytest.approx(156.6, abs=0.2)
    assert surface_threshold(3) == pytest.approx(17.4, abs=0.05)
    assert surface_threshold(3, cubed=True) == pytest.approx(3 * 17.4, abs=0.2)


def test_singleton_passes_every_scale():
    cl = fixture_cluster([X])
    for s in range(3, 25):
        res = density_check(cl, X, s)
        assert res.passed and res.volume == res.surface == 1


def test_small_scales_rejected():
    with pytest.raises(ValueError):
        density_check(fixture_cluster([X]), X, 2)


def test_non_pioneer_rejected():
    with pytest.raises(ValueError):
        density_check(fixture_cluster([X, (0,) * D]), (0,) * D, 3)


def test_volume_fixture_fails():
    cl = fixture_cluster([X] + interior_points(199))
    res = density_check(cl, X, 3)
    assert res.volume == 200 and res.surface == 1
    assert not res.volume_ok and res.surface_ok and not res.passed


@pytest.mark.parametrize("count,ok", [(15, True), (18, False)])
def test_surface_fixture(count, ok):
    cl = fixture_cluster(boundary_points(count))
    res = density_check(cl, X, 3)
    assert res.surface == count
    assert res.volume_ok and res.surface_ok == ok and res.passed == ok


def test_cubed_variant_relaxes_surface():
    cl = fixture_cluster(boundary_points(18))
    assert density_check(cl, X, 3, cubed=True).passed


def test_classify_singleton_and_empty():
    rep = classify_regular(fixture_cluster([X]), 3)
    assert rep.pioneers == rep.regular == rep.separated_regular == [X]
    rep = classify_regular(fixture_cluster([(0,) * D]), 3)
    assert rep.pioneers == rep.regular == rep.separated_regular == []


def test_classify_volume_fixture_records_failure():
    rep = classify_regular(fixture_cluster([X] + interior_points(199)), 3)
    assert X in rep.pioneers and X not in rep.regular
    (fail,) = [f for f in rep.failures if f.point == X]
    assert fail.s == 3 and fail.condition == "volume"


def test_classify_matches_density_check_loop():
    spec = GraphSpec(3, 0.3)
    for rep_i in range(30):
        cl = explore(Configuration(spec, 9, rep_i), (0, 0, 0), Region.box((0, 0, 0), 4))
        rep = classify_regular(cl, 3, spec)
        assert rep.pioneers == sorted(pioneers(cl, spec))
        for x in rep.pioneers:
            ok = all(density_check(cl, x, s, spec).passed for s in range(3, 9))
            assert (x in rep.regular) == ok


def test_report_json_round_trip():
    cl = fixture_cluster([X] + interior_points(199) + boundary_points(5)[1:])
    rep = classify_regular(cl, 3)
    again = RegularityReport.from_dict(json.loads(rep.to_json()))
    assert again == rep


clusters = st.tuples(st.integers(0, 10**6), st.sampled_from([(2, 0.5), (3, 0.3), (2, 0.6)]))


@settings(max_examples=40, deadline=None)
@given(clusters, st.integers(3, 6), st.integers(0, 3))
def test_regularity_invariants(cl_args, K, dK):
    seed, (d, p) = cl_args
    spec = GraphSpec(d, p)
    cl = explore(Configuration(spec, seed), (0,) * d, Region.box((0,) * d, 6))
    small = classify_regular(cl, K, spec)
    large = classify_regular(cl, K + dK, spec)
    assert set(small.regular) <= set(large.regular) <= set(large.pioneers)
    sep = small.separated_regular
    assert set(sep) <= set(small.regular)
    assert all(linf(a, b) >= 2 * K for a, b in itertools.combinations(sep, 2))
    # maximal: every dropped regular point is too close to a chosen one
    for x in set(small.regular) - set(sep):
        assert any(linf(x, y) < 2 * K for y in sep)


def test_greedy_is_lexicographic():
    pts = [(0, 5), (0, 0), (0, 3), (0, 9)]
    assert greedy_separated(pts, 4) == [(0, 0), (0, 5), (0, 9)]


# -- disjoint paths -------------------------------------------------------------------


def brute_force_paths(n, edges, sources, sinks):
    adj = {v: set() for v in range(n)}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    sinks = set(sinks)

    def paths_from(s):
        out = []

        def walk(v, seen):
            if v in sinks:
                out.append(frozenset(seen))
            for u in adj[v]:
                if u not in seen:
                    walk(u, seen | {u})

        walk(s, {s})
        return out

    all_paths = {s: paths_from(s) for s in sorted(set(sources))}
    order = sorted(all_paths)

    def best(i, used):
        if i == len(order):
            return 0
        top = best(i + 1, used)
        for path in all_paths[order[i]]:
            if not path & used:
                top = max(top, 1 + best(i + 1, used | path))
        return top

    return best(0, frozenset())


graphs = st.integers(2, 12).flatmap(
    lambda n: st.tuples(
        st.just(n),
        st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1))
                 .filter(lambda e: e[0] != e[1]).map(lambda e: (min(e), max(e))),
                 max_size=16, unique=True),
        st.lists(st.integers(0, n - 1), min_size=1, max_size=3, unique=True),
        st.lists(st.integers(0, n - 1), min_size=1, max_size=3, unique=True),
    )
)


@settings(max_examples=300, deadline=None)
@given(graphs)
def test_disjoint_paths_match_brute_force(g):
    n, edges, S, T = g
    assert max_disjoint_paths(n, edges, S, T) == brute_force_paths(n, edges, S, T)


def test_disjoint_path_fixtures():
    # one path
    assert max_disjoint_paths(4, [(0, 1), (1, 2), (2, 3)], [0], [3]) == 1
    # three internally disjoint routes from {0,1,2} to {9,10,11}
    edges = [(0, 3), (3, 6), (6, 9), (1, 4), (4, 7), (7, 10), (2, 5), (5, 8), (8, 11), (3, 4)]
    assert max_disjoint_paths(12, edges, [0, 1, 2], [9, 10, 11]) == 3
    assert brute_force_paths(12, edges, [0, 1, 2], [9, 10, 11]) == 3
    # a shared cut vertex allows one vertex-disjoint path but two edge-disjoint ones
    bowtie = [(0, 2), (1, 2), (2, 3), (2, 4)]
    assert max_disjoint_paths(5, bowtie, [0, 1], [3, 4]) == 1
    assert max_disjoint_paths(5, bowtie, [0, 1], [3, 4], vertex_disjoint=False) == 2
    double = [(0, 1), (1, 2), (0, 3), (3, 2)]
    assert max_disjoint_paths(4, double, [0], [2], vertex_disjoint=False) == 2
    assert max_disjoint_paths(4, double, [0], [2]) == 1


# -- local density ------------------------------------------------------------------


def test_local_check_at_p_zero():
    spec = GraphSpec(2, 0.0)
    res = local_density_check(Configuration(spec, 1), (6, 0), 3, 6)
    assert res.passed and res.paths == 0 and res.max_volume == 1


def test_local_check_guard():
    with pytest.raises(Infeasible):
        local_density_check(Configuration(GraphSpec(5, 0.1), 0), (9, 0, 0, 0, 0), 3, 9)


@pytest.mark.parametrize("d,p,r", [(2, 0.4, 4), (2, 0.5, 6), (2, 0.6, 8), (3, 0.2, 5), (3, 0.3, 5)])
def test_local_implies_global(d, p, r):
    spec = GraphSpec(d, p)
    passes = 0
    for rep_i in range(15):
        cfg = Configuration(spec, 40, rep_i)
        cl = explore(cfg, (0,) * d, Region.box((0,) * d, r))
        for x in sorted(pioneers(cl, spec))[:4]:
            for s in (3, 4) if d == 2 else (3,):
                local = local_density_check(cfg, x, s, r)
                if local.passed:
                    passes += 1
                    assert density_check(cl, x, s, spec).passed
    assert passes > 0


def test_local_paths_count_on_open_lattice():
    # with every edge open the minimal cut is one full column of the 13 x 13 box
    spec = GraphSpec(2, 1.0)
    res = local_density_check(Configuration(spec, 0), (6, 0), 3, 6)
    assert res.paths == 13 and not res.passed


# -- line-good -------------------------------------------------------------------------


def test_segment_direction():
    assert segment((4, -4), 4, 2) == [(4, -4), (5, -4), (6, -4)]
    assert segment((1, -4), 4, 2) == [(1, -4), (1, -5), (1, -6)]


@pytest.mark.parametrize("p,expect_all", [(1.0, True), (0.0, False)])
def test_line_good_extremes(p, expect_all):
    spec = GraphSpec(2, p)
    rep = RegularityReport(6, 3, [(6, 0), (6, 6)], [(6, 0), (6, 6)], [(6, 0), (6, 6)])
    line_good(Configuration(spec, 0), rep)
    assert rep.line_good == (rep.separated_regular if expect_all else [])
    assert len(rep.projected_line_good) == len(rep.line_good)
    if expect_all:
        assert rep.projected_line_good == [(9, 0), (9, 6)]


def test_line_good_fraction_is_p_to_the_k():
    p, K, r = 0.6, 3, 20
    spec = GraphSpec(2, p)
    face = [(r, y) for y in range(-18, 19, 6)]
    good = total = 0
    for rep_i in range(800):
        rep = RegularityReport(r, K, face, face, face)
        line_good(Configuration(spec, 5, rep_i), rep)
        good += len(rep.line_good)
        total += len(face)
    est = Estimate.from_counts(good, 0, total)
    assert abs(est.value - p**K) < 3 * math.sqrt(p**K * (1 - p**K) / total)


def test_line_good_needs_nearest_neighbour():
    rep = RegularityReport(3, 3, [], [], [])
    with pytest.raises(ValueError):
        line_good(Configuration(GraphSpec.spread_out(2, 2, 0.1), 0), rep)


# -- replica experiment ----------------------------------------------------------------


def test_regular_fraction_at_p_zero():
    tab = regular_fraction_experiment(4, 3, 1, GraphSpec(3, 0.0), 200)
    assert tab.events[1].hits == 0 and tab.mean_pioneers == 0


def test_regular_fraction_nested_in_m():
    tab = regular_fraction_experiment(5, 3, [1, 2, 4, 8, 16], GraphSpec(3, 0.25), 2000, seed=3)
    vals = [tab.events[m].value for m in (1, 2, 4, 8, 16)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_regularity_counts_match_single_reports():
    spec = GraphSpec(3, 0.3)
    counts = regularity_counts(4, 3, spec, 40, seed=6)
    for i in range(40):
        cfg = Configuration(spec, 6, i)
        cl = explore(cfg, (0, 0, 0), Region.box((0, 0, 0), 4))
        rep = line_good(cfg, classify_regular(cl, 3, spec))
        assert counts[i, :3].tolist() == [len(rep.pioneers), len(rep.regular), len(rep.line_good)]
