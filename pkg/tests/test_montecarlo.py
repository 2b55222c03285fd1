import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from percap import _kernels as K
from percap.lattice import GraphSpec, Region
from percap.montecarlo import (
    BracketError,
    Estimate,
    RatioEstimate,
    calibrate_pc,
    default_z,
    derive_seed,
    estimate_hit,
    estimate_one_arm,
    estimate_one_arm_set,
    estimate_pcap,
    estimate_tau,
    estimate_two_sets,
    explore_replicas,
    pioneer_tail,
    replica_map,
    split_range,
    wilson,
)


def within(est, exact, k=4.0):
    return abs(est.value - exact) <= k * max(est.std_error, 1e-12)


def test_wilson_reference_values():
    lo, hi = wilson(0, 10)
    assert lo == 0.0 and hi == pytest.approx(0.27753, abs=1e-5)
    lo, hi = wilson(5, 10)
    assert (lo, hi) == pytest.approx((0.23659, 0.76341), abs=1e-5)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 10**6), st.data())
def test_estimate_interval_bounds(n, data):
    hits = data.draw(st.integers(0, n))
    trunc = data.draw(st.integers(0, n - hits))
    e = Estimate.from_counts(hits, trunc, n)
    assert e.lower == e.value <= e.upper
    assert e.wilson_lo <= e.value <= e.wilson_hi
    assert 0 <= e.wilson_lo and e.wilson_hi <= 1


def test_ratio_delta_method():
    num = Estimate.from_counts(50, 0, 1000)
    den = Estimate.from_counts(100, 0, 1000)
    r = RatioEstimate.build(num, den)
    assert r.ratio == pytest.approx(0.5)
    rel = math.sqrt((num.std_error / num.value) ** 2 + (den.std_error / den.value) ** 2)
    assert r.std_error == pytest.approx(0.5 * rel)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 5000), st.integers(1, 64))
def test_split_range_covers(n, parts):
    blocks = split_range(n, parts)
    assert sum(c for _, c in blocks) == n
    pos = 0
    for s, c in blocks:
        assert s == pos
        pos += c


def test_replica_map_independent_of_workers():
    spec = GraphSpec(3, 0.25)
    a = explore_replicas(spec, 4, 3000, [(0, 0, 0)], Region.box((0, 0, 0), 4), workers=1,
                         stop_on_hit=False)
    b = explore_replicas(spec, 4, 3000, [(0, 0, 0)], Region.box((0, 0, 0), 4), workers=3,
                         stop_on_hit=False)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)


def test_replica_map_offsets():
    got = replica_map(lambda s, c: np.arange(s, s + c), 10, 1, replica0=5)
    assert got.tolist() == list(range(5, 15))


def test_tau_at_origin_is_one():
    e = estimate_tau((0, 0, 0), GraphSpec(3, 0.2), 500)
    assert e.value == 1.0 and e.std_error == 0.0


@pytest.mark.parametrize("p,k", [(0.5, 3), (0.8, 5), (0.3, 1)])
def test_tau_on_the_line(p, k):
    # in d=1 the only path is the segment, so tau(k) = p^k
    e = estimate_tau((k,), GraphSpec(1, p), 20000, seed=3)
    assert within(e, p**k)


@pytest.mark.parametrize("p,r", [(0.7, 3), (0.5, 2)])
def test_one_arm_on_the_line(p, r):
    e = estimate_one_arm(r, GraphSpec(1, p), 20000, seed=9)
    assert within(e, 1 - (1 - p**r) ** 2)


def test_one_arm_extremes():
    spec = GraphSpec(4, 0.0)
    assert estimate_one_arm(3, spec, 100).value == 0.0
    assert estimate_one_arm(3, spec.with_p(1.0), 100).value == 1.0


def test_one_arm_monotone_in_p():
    vals = [estimate_one_arm(4, GraphSpec(3, p), 4000, seed=1) for p in (0.15, 0.25, 0.35)]
    for a, b in zip(vals, vals[1:]):
        assert a.value <= b.value + 3 * math.hypot(a.std_error, b.std_error)


def test_one_arm_set_dominates_point():
    spec = GraphSpec(2, 0.45)
    one = estimate_one_arm(6, spec, 3000, seed=2)
    both = estimate_one_arm_set([(0, 0), (1, 0)], 6, spec, 3000, seed=2)
    assert both.hits >= one.hits
    with pytest.raises(ValueError):
        estimate_one_arm_set([(4, 0)], 6, spec, 10)


def test_hit_of_point_equals_tau():
    spec = GraphSpec(2, 0.45)
    a = estimate_hit([(3, 1)], (0, 0), spec, 3000, seed=6)
    b = estimate_tau((3, 1), spec, 3000, seed=6)
    assert abs(a.value - b.value) < 4 * math.hypot(a.std_error, b.std_error)


def test_pcap_of_point_is_one_when_paired():
    spec = GraphSpec(2, 0.45)
    r = estimate_pcap([(0, 0)], (3, 0), spec, 5000, seed=8, paired=True)
    assert r.ratio == pytest.approx(1.0) and r.std_error == pytest.approx(0.0, abs=1e-12)


def test_pcap_of_point_independent_streams():
    spec = GraphSpec(2, 0.45)
    r = estimate_pcap([(0, 0)], (3, 0), spec, 20000, seed=8)
    assert abs(r.ratio - 1) < 3.5 * r.std_error


def test_pcap_geometry_guard():
    with pytest.raises(ValueError):
        estimate_pcap([(0, 0), (5, 0)], (3, 0), GraphSpec(2, 0.4), 10)
    assert default_z([(0, 0), (2, 1)], 2) == (8, 0)


def test_two_sets_with_singletons_is_pcap_of_point():
    spec = GraphSpec(2, 0.45)
    r = estimate_two_sets([(0, 0)], [(0, 0)], (3, 0), spec, 20000, seed=12)
    assert abs(r.ratio - 1) < 3.5 * r.std_error


def test_pioneer_tail_ccdf_shape():
    tab = pioneer_tail(4, 1, (4, 0, 0), [0, 1, 2, 3, 5, 8], GraphSpec(3, 0.25), 4000, seed=2)
    assert tab.ccdf[0] == 1.0
    assert all(a >= b for a, b in zip(tab.ccdf, tab.ccdf[1:]))
    assert tab.conditional_ccdf[1] == 1.0
    assert len(tab.rows()) == 6


def test_derive_seed_distinct():
    seeds = {derive_seed(7, k) for k in range(100)}
    assert len(seeds) == 100 and all(0 <= s < 2**63 for s in seeds)


def test_calibrate_pc_recovers_square_lattice():
    # the one-arm exponent in d=2 is 5/48, and p_c = 1/2 exactly
    cal = calibrate_pc(GraphSpec(2, 0.5), (8, 32), (0.4, 0.6), 4000, 6, seed=5, exponent=5 / 48)
    assert abs(cal.p - 0.5) < 0.02
    assert 0.4 <= cal.p <= 0.6


def test_calibrate_pc_bracket_error():
    with pytest.raises(BracketError):
        calibrate_pc(GraphSpec(2, 0.5), (4, 8), (0.9, 0.95), 2000, 2, seed=1)


def test_truncated_replicas_widen_interval():
    spec = GraphSpec(2, 1.0)
    e = estimate_tau((40, 0), spec, 20, budget=50)
    assert e.n_truncated == 20 or e.hits == 20
    assert e.lower <= e.upper
