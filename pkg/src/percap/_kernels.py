"""Compiled core: counter-based edge randomness and budgeted cluster growth.

Every edge state is a keyed hash of (stream key, canonical edge) so a
configuration never has to be stored; re-querying an edge is free of state
and any replica can be replayed from its index alone.

Point hashing is linear, lin(x) = sum_i x_i * R_i (mod 2^64), which makes the
hash of x + offset an O(1) update. Canonical edges are (lin(lower endpoint),
code of the lexicographically positive offset).
"""

from __future__ import annotations

import numpy as np
from numba import njit

U64 = np.uint64

_GOLDEN = U64(0x9E3779B97F4A7C15)
_M1 = U64(0xFF51AFD7ED558CCD)
_M2 = U64(0xC4CEB9FE1A85EC53)
_DIRMUL = U64(0xD6E8FEB86659FD93)
_S33 = U64(33)
_S11 = U64(11)
_S29 = U64(29)

TAG_EDGE = 0x5EED_ED6E
TAG_WALK = 0x5EED_3A1C

MAX_DIM = 64

# Verdicts shared by every kernel.
DISCONNECTED = 0
CONNECTED = 1
TRUNCATED = 2
TIMEOUT = 3


def _axis_multipliers(n: int) -> np.ndarray:
    out = np.empty(n, dtype=np.uint64)
    state = 0x243F6A8885A308D3
    mask = (1 << 64) - 1
    for i in range(n):
        state = (state + 0x9E3779B97F4A7C15) & mask
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
        z ^= z >> 31
        out[i] = z | 1
    return out


AXIS_MULT = _axis_multipliers(MAX_DIM)


@njit(cache=True, inline="always")
def fmix64(h):
    h ^= h >> _S33
    h *= _M1
    h ^= h >> _S33
    h *= _M2
    h ^= h >> _S33
    return h


@njit(cache=True)
def stream_key(seed, replica, tag):
    """Two 64-bit keys for stream (seed, replica, tag)."""
    k = fmix64(U64(seed) ^ fmix64(U64(tag)))
    k = fmix64(k + U64(replica) * _GOLDEN)
    k2 = fmix64(k ^ _DIRMUL)
    return k, k2


@njit(cache=True, inline="always")
def edge_hash(lin_lower, direction, k1, k2):
    # explicit casts: a key below 2^63 passed from Python arrives as int64
    h = fmix64(U64(lin_lower) + U64(k1))
    return fmix64(h ^ ((U64(direction) + U64(1)) * _DIRMUL + U64(k2)))


@njit(cache=True, inline="always")
def draw_u53(k1, k2, counter):
    """53-bit uniform integer for position ``counter`` of a stream."""
    h = fmix64(fmix64(U64(counter) * _GOLDEN + U64(k1)) ^ U64(k2))
    return h >> _S11


@njit(cache=True)
def lin_hash(pt, mult):
    h = U64(0)
    for i in range(pt.shape[0]):
        h += U64(pt[i]) * mult[i]
    return h


@njit(cache=True, inline="always")
def in_regions(pt, kinds, centers, ra, rb):
    d = pt.shape[0]
    for j in range(kinds.shape[0]):
        kind = kinds[j]
        if kind == 3:
            if pt[ra[j]] < rb[j]:
                return False
            continue
        if kind == 5:
            if pt[ra[j]] > rb[j]:
                return False
            continue
        dist = 0
        for i in range(d):
            v = pt[i] - centers[j, i]
            if v < 0:
                v = -v
            if v > dist:
                dist = v
        if kind == 1:
            if dist > ra[j]:
                return False
        elif kind == 2:
            if dist <= ra[j]:
                return False
        elif kind == 4:
            if dist <= ra[j] or dist > rb[j]:
                return False
    return True


@njit(cache=True)
def build_set(pts, mult):
    """Open-addressing table over the rows of ``pts`` (values are row indices)."""
    n = pts.shape[0]
    size = 8
    while size < 2 * n + 2:
        size *= 2
    table = np.full(size, -1, dtype=np.int64)
    lins = np.empty(n, dtype=np.uint64)
    mask = U64(size - 1)
    for i in range(n):
        h = lin_hash(pts[i], mult)
        lins[i] = h
        slot = np.int64(fmix64(h) & mask)
        while table[slot] >= 0:
            slot = (slot + 1) & (size - 1)
        table[slot] = i
    return table, lins


@njit(cache=True, inline="always")
def set_lookup(pt, h, pts, lins, table):
    size = table.shape[0]
    if size == 0 or pts.shape[0] == 0:
        return -1
    slot = np.int64(fmix64(h) & U64(size - 1))
    d = pt.shape[0]
    while True:
        idx = table[slot]
        if idx < 0:
            return -1
        if lins[idx] == h:
            same = True
            for i in range(d):
                if pts[idx, i] != pt[i]:
                    same = False
                    break
            if same:
                return idx
        slot = (slot + 1) & (size - 1)


@njit(cache=True)
def edge_open(a, b, k1, k2, thr, mult):
    """State of edge {a, b} (any order) under stream keys (k1, k2)."""
    d = a.shape[0]
    lower_is_a = False
    for i in range(d):
        if a[i] != b[i]:
            lower_is_a = a[i] < b[i]
            break
    lo = a if lower_is_a else b
    hi = b if lower_is_a else a
    # direction code: offset hi - lo encoded in base 2^20 positional form
    code = U64(0)
    for i in range(d):
        code = code * U64(1048583) + U64(hi[i] - lo[i] + 524288)
    return (edge_hash(lin_hash(lo, mult), code, k1, k2) >> _S11) < thr


@njit(cache=True)
def offset_codes(offs):
    """Canonical direction code and orientation of every offset.

    codes[k] encodes the lexicographically positive one of +-offs[k], as in
    :func:`edge_open`; positive[k] tells whether offs[k] itself is that one
    (i.e. whether x is the lower endpoint of the edge {x, x + offs[k]}).
    """
    m, d = offs.shape
    codes = np.empty(m, dtype=np.uint64)
    positive = np.empty(m, dtype=np.bool_)
    for k in range(m):
        sign = 1
        for i in range(d):
            if offs[k, i] != 0:
                sign = 1 if offs[k, i] > 0 else -1
                break
        code = U64(0)
        for i in range(d):
            code = code * U64(1048583) + U64(sign * offs[k, i] + 524288)
        codes[k] = code
        positive[k] = sign > 0
    return codes, positive


@njit(cache=True)
def offset_lins(offs, mult):
    m = offs.shape[0]
    out = np.empty(m, dtype=np.uint64)
    for k in range(m):
        out[k] = lin_hash(offs[k], mult)
    return out


@njit(cache=True)
def _grow(pts, lins, cap):
    d = pts.shape[1]
    npts = np.empty((cap, d), dtype=np.int64)
    nlins = np.empty(cap, dtype=np.uint64)
    npts[: pts.shape[0]] = pts
    nlins[: lins.shape[0]] = lins
    return npts, nlins


@njit(cache=True)
def _rehash(table, stamp, lins, count, cur):
    size = table.shape[0] * 2
    ntab = np.empty(size, dtype=np.int64)
    nstamp = np.zeros(size, dtype=np.int64)
    mask = U64(size - 1)
    for i in range(count):
        slot = np.int64(fmix64(lins[i]) & mask)
        while nstamp[slot] == cur:
            slot = (slot + 1) & (size - 1)
        nstamp[slot] = cur
        ntab[slot] = i
    return ntab, nstamp


@njit(cache=True)
def explore_core(
    seeds, k1, k2, thr, offs, off_lin, codes, positive, mult,
    rk, rc, ra, rb,
    tk, tc, ta, tb, use_tregion,
    tpts, tlins, ttab,
    stop_on_hit, budget,
    pts, lins, table, stamp, cur,
):
    """Breadth-first growth of the open cluster of ``seeds`` inside a region.

    Returns (status, count, hit_vertex, hit_target_index, n_target, pts,
    lins, table, stamp). ``status`` is CONNECTED when stopped at a target,
    TRUNCATED when a vertex beyond ``budget`` was discovered, else
    DISCONNECTED (component exhausted). ``n_target`` counts admitted
    vertices satisfying the target predicate.
    """
    d = seeds.shape[1]
    m = offs.shape[0]
    count = 0
    n_target = 0
    hit_vertex = -1
    hit_index = -1
    nb = np.empty(d, dtype=np.int64)
    # seeds
    for s in range(seeds.shape[0]):
        pt = seeds[s]
        h = lin_hash(pt, mult)
        size = table.shape[0]
        slot = np.int64(fmix64(h) & U64(size - 1))
        dup = False
        while stamp[slot] == cur:
            idx = table[slot]
            if lins[idx] == h:
                same = True
                for i in range(d):
                    if pts[idx, i] != pt[i]:
                        same = False
                        break
                if same:
                    dup = True
                    break
            slot = (slot + 1) & (size - 1)
        if dup:
            continue
        if count >= budget:
            return TRUNCATED, count, hit_vertex, hit_index, n_target, pts, lins, table, stamp
        if count >= pts.shape[0]:
            pts, lins = _grow(pts, lins, min(2 * pts.shape[0], budget + 1))
        for i in range(d):
            pts[count, i] = pt[i]
        lins[count] = h
        stamp[slot] = cur
        table[slot] = count
        tidx = set_lookup(pt, h, tpts, tlins, ttab)
        is_t = tidx >= 0
        if not is_t and use_tregion:
            is_t = in_regions(pt, tk, tc, ta, tb)
        if is_t:
            n_target += 1
            if hit_vertex < 0:
                hit_vertex = count
                hit_index = tidx
        count += 1
        if 2 * count > table.shape[0]:
            table, stamp = _rehash(table, stamp, lins, count, cur)
    if stop_on_hit and hit_vertex >= 0:
        return CONNECTED, count, hit_vertex, hit_index, n_target, pts, lins, table, stamp

    head = 0
    while head < count:
        hu = lins[head]
        for k in range(m):
            hv = hu + off_lin[k]
            if positive[k]:
                eh = edge_hash(hu, codes[k], k1, k2)
            else:
                eh = edge_hash(hv, codes[k], k1, k2)
            if (eh >> _S11) >= thr:
                continue
            for i in range(d):
                nb[i] = pts[head, i] + offs[k, i]
            if not in_regions(nb, rk, rc, ra, rb):
                continue
            size = table.shape[0]
            slot = np.int64(fmix64(hv) & U64(size - 1))
            seen = False
            while stamp[slot] == cur:
                idx = table[slot]
                if lins[idx] == hv:
                    same = True
                    for i in range(d):
                        if pts[idx, i] != nb[i]:
                            same = False
                            break
                    if same:
                        seen = True
                        break
                slot = (slot + 1) & (size - 1)
            if seen:
                continue
            if count >= budget:
                return TRUNCATED, count, hit_vertex, hit_index, n_target, pts, lins, table, stamp
            if count >= pts.shape[0]:
                pts, lins = _grow(pts, lins, min(2 * pts.shape[0], budget + 1))
            for i in range(d):
                pts[count, i] = nb[i]
            lins[count] = hv
            stamp[slot] = cur
            table[slot] = count
            tidx = set_lookup(nb, hv, tpts, tlins, ttab)
            is_t = tidx >= 0
            if not is_t and use_tregion:
                is_t = in_regions(nb, tk, tc, ta, tb)
            count += 1
            if is_t:
                n_target += 1
                if hit_vertex < 0:
                    hit_vertex = count - 1
                    hit_index = tidx
                if stop_on_hit:
                    return CONNECTED, count, hit_vertex, hit_index, n_target, pts, lins, table, stamp
            if 2 * count > table.shape[0]:
                table, stamp = _rehash(table, stamp, lins, count, cur)
        head += 1
    status = CONNECTED if hit_vertex >= 0 else DISCONNECTED
    return status, count, hit_vertex, hit_index, n_target, pts, lins, table, stamp


def new_workspace(d: int, budget: int, cap: int = 1024):
    cap = max(16, min(cap, budget + 1))
    pts = np.empty((cap, d), dtype=np.int64)
    lins = np.empty(cap, dtype=np.uint64)
    size = 16
    while size < 2 * cap:
        size *= 2
    table = np.empty(size, dtype=np.int64)
    stamp = np.zeros(size, dtype=np.int64)
    return pts, lins, table, stamp


@njit(cache=True)
def _new_ws(d, budget):
    cap = max(16, min(1024, budget + 1))
    pts = np.empty((cap, d), dtype=np.int64)
    lins = np.empty(cap, dtype=np.uint64)
    size = 16
    while size < 2 * cap:
        size *= 2
    table = np.empty(size, dtype=np.int64)
    stamp = np.zeros(size, dtype=np.int64)
    return pts, lins, table, stamp


@njit(cache=True)
def batch_explore(
    seed, replica0, n, tag, thr, offs, off_lin, codes, positive, mult,
    seeds, rk, rc, ra, rb, tk, tc, ta, tb, use_tregion, tpts, stop_on_hit, budget, reverse,
):
    """Run :func:`explore_core` for replicas replica0 .. replica0+n-1.

    Returns per-replica status, admitted-vertex count, target-set index of
    the first hit and number of admitted target vertices. With ``reverse``
    a truncated point-set query is retried from the target side (the event
    is symmetric); the hit index is then -1.
    """
    d = offs.shape[1]
    ttab, tlins = build_set(tpts, mult)
    if tpts.shape[0] == 0:
        ttab = np.empty(0, dtype=np.int64)
    stab, slins = build_set(seeds, mult)
    empty_k = np.empty(0, dtype=np.int64)
    empty_c = np.empty((0, d), dtype=np.int64)
    pts, lins, table, stamp = _new_ws(d, budget)
    status = np.empty(n, dtype=np.int8)
    sizes = np.empty(n, dtype=np.int64)
    hits = np.empty(n, dtype=np.int64)
    ntgt = np.empty(n, dtype=np.int64)
    cur = 0
    for j in range(n):
        k1, k2 = stream_key(seed, replica0 + j, tag)
        cur += 1
        res = explore_core(
            seeds, k1, k2, thr, offs, off_lin, codes, positive, mult,
            rk, rc, ra, rb, tk, tc, ta, tb, use_tregion,
            tpts, tlins, ttab, stop_on_hit, budget,
            pts, lins, table, stamp, cur,
        )
        status[j] = res[0]
        sizes[j] = res[1]
        hits[j] = res[3]
        ntgt[j] = res[4]
        pts, lins, table, stamp = res[5], res[6], res[7], res[8]
        if reverse and res[0] == TRUNCATED and tpts.shape[0] > 0:
            cur += 1
            r2 = explore_core(
                tpts, k1, k2, thr, offs, off_lin, codes, positive, mult,
                rk, rc, ra, rb, empty_k, empty_c, empty_k, empty_k, False,
                seeds, slins, stab, True, budget,
                pts, lins, table, stamp, cur,
            )
            pts, lins, table, stamp = r2[5], r2[6], r2[7], r2[8]
            status[j] = r2[0]
            hits[j] = -1
    return status, sizes, hits, ntgt


@njit(cache=True)
def connect_either_way(
    src, dst, dlins, dtab, slins, stab, k1, k2, thr, offs, off_lin, codes, positive, mult,
    rk, rc, ra, rb, budget, pts, lins, table, stamp, cur,
):
    """Is some vertex of ``src`` joined to ``dst`` (inside the region)?

    Explores from ``src``; if that is truncated, explores from ``dst``
    instead. Returns (status, hit index into dst or -1, workspace..., cur).
    """
    d = offs.shape[1]
    empty_k = np.empty(0, dtype=np.int64)
    empty_c = np.empty((0, d), dtype=np.int64)
    cur += 1
    res = explore_core(
        src, k1, k2, thr, offs, off_lin, codes, positive, mult,
        rk, rc, ra, rb, empty_k, empty_c, empty_k, empty_k, False,
        dst, dlins, dtab, True, budget,
        pts, lins, table, stamp, cur,
    )
    pts, lins, table, stamp = res[5], res[6], res[7], res[8]
    if res[0] != TRUNCATED:
        return res[0], res[3], pts, lins, table, stamp, cur
    cur += 1
    r2 = explore_core(
        dst, k1, k2, thr, offs, off_lin, codes, positive, mult,
        rk, rc, ra, rb, empty_k, empty_c, empty_k, empty_k, False,
        src, slins, stab, True, budget,
        pts, lins, table, stamp, cur,
    )
    pts, lins, table, stamp = r2[5], r2[6], r2[7], r2[8]
    return r2[0], -1, pts, lins, table, stamp, cur


@njit(cache=True)
def explore_once(
    k1, k2, thr, offs, off_lin, codes, positive, mult,
    seeds, rk, rc, ra, rb, tk, tc, ta, tb, use_tregion, tpts, stop_on_hit, budget,
):
    """Single exploration returning the admitted vertices themselves."""
    d = offs.shape[1]
    ttab, tlins = build_set(tpts, mult)
    if tpts.shape[0] == 0:
        ttab = np.empty(0, dtype=np.int64)
    pts, lins, table, stamp = _new_ws(d, budget)
    res = explore_core(
        seeds, k1, k2, thr, offs, off_lin, codes, positive, mult,
        rk, rc, ra, rb, tk, tc, ta, tb, use_tregion,
        tpts, tlins, ttab, stop_on_hit, budget,
        pts, lins, table, stamp, 1,
    )
    count = res[1]
    return res[0], res[2], res[3], res[4], res[5][:count].copy()


@njit(cache=True)
def open_edges_within(vpts, k1, k2, thr, offs, off_lin, codes, positive, mult):
    """Open edges with both endpoints in ``vpts``, as index pairs (i, j) and offset index.

    Each undirected edge is listed once, from its lexicographically lower end.
    """
    n, d = vpts.shape
    table, lins = build_set(vpts, mult)
    m = offs.shape[0]
    out_i = []
    out_j = []
    nb = np.empty(d, dtype=np.int64)
    for u in range(n):
        hu = lins[u]
        for k in range(m):
            if not positive[k]:
                continue
            if (edge_hash(hu, codes[k], k1, k2) >> _S11) >= thr:
                continue
            for i in range(d):
                nb[i] = vpts[u, i] + offs[k, i]
            v = set_lookup(nb, hu + off_lin[k], vpts, lins, table)
            if v >= 0:
                out_i.append(u)
                out_j.append(v)
    a = np.empty(len(out_i), dtype=np.int64)
    b = np.empty(len(out_i), dtype=np.int64)
    for t in range(len(out_i)):
        a[t] = out_i[t]
        b[t] = out_j[t]
    return a, b


@njit(cache=True)
def walk_core(
    start, wk1, wk2, k1, k2, thr, offs, off_lin, codes, positive, mult,
    rk, rc, ra, rb, tpts, tlins, ttab, max_steps,
):
    """Simple random walk on the open subgraph (inside a region) until it enters
    the target set.

    Open neighbours are enumerated in offset order and one is chosen with
    the walk stream's draw for the current step. Returns (status, target
    index, steps).
    """
    d = start.shape[0]
    m = offs.shape[0]
    cur = start.copy()
    hcur = lin_hash(cur, mult)
    choices = np.empty(m, dtype=np.int64)
    steps = 0
    idx = set_lookup(cur, hcur, tpts, tlins, ttab)
    if idx >= 0:
        return CONNECTED, idx, 0
    nb = np.empty(d, dtype=np.int64)
    while steps < max_steps:
        deg = 0
        for k in range(m):
            hv = hcur + off_lin[k]
            if positive[k]:
                eh = edge_hash(hcur, codes[k], k1, k2)
            else:
                eh = edge_hash(hv, codes[k], k1, k2)
            if (eh >> _S11) >= thr:
                continue
            if rk.shape[0] > 0:
                for i in range(d):
                    nb[i] = cur[i] + offs[k, i]
                if not in_regions(nb, rk, rc, ra, rb):
                    continue
            choices[deg] = k
            deg += 1
        if deg == 0:
            return DISCONNECTED, -1, steps
        u = draw_u53(wk1, wk2, steps)
        pick = choices[np.int64((u * U64(deg)) >> U64(53))] if deg < 2048 else choices[np.int64(u % U64(deg))]
        for i in range(d):
            cur[i] += offs[pick, i]
        hcur = hcur + off_lin[pick]
        steps += 1
        idx = set_lookup(cur, hcur, tpts, tlins, ttab)
        if idx >= 0:
            return CONNECTED, idx, steps
    return TIMEOUT, -1, steps


@njit(cache=True)
def batch_equilibrium(
    seed, replica0, n, thr, offs, off_lin, codes, positive, mult,
    z, apts, budget, max_steps,
):
    """Per replica: does C(z) meet A, and if so where does the walk from z
    first enter A. Status CONNECTED / DISCONNECTED / TRUNCATED / TIMEOUT;
    hit index into A.
    """
    d = offs.shape[1]
    ttab, tlins = build_set(apts, mult)
    zr = z.reshape(1, d)
    ztab, zlins = build_set(zr, mult)
    pts, lins, table, stamp = _new_ws(d, budget)
    empty_k = np.empty(0, dtype=np.int64)
    empty_c = np.empty((0, d), dtype=np.int64)
    status = np.empty(n, dtype=np.int8)
    hits = np.empty(n, dtype=np.int64)
    steps = np.empty(n, dtype=np.int64)
    cur = 0
    for j in range(n):
        k1, k2 = stream_key(seed, replica0 + j, TAG_EDGE)
        st, _, pts, lins, table, stamp, cur = connect_either_way(
            zr, apts, tlins, ttab, zlins, ztab, k1, k2, thr, offs, off_lin, codes, positive,
            mult, empty_k, empty_c, empty_k, empty_k, budget, pts, lins, table, stamp, cur,
        )
        steps[j] = 0
        if st != CONNECTED:
            status[j] = st
            hits[j] = -1
            continue
        wk1, wk2 = stream_key(seed, replica0 + j, TAG_WALK)
        st, idx, ns = walk_core(
            z, wk1, wk2, k1, k2, thr, offs, off_lin, codes, positive, mult,
            empty_k, empty_c, empty_k, empty_k, apts, tlins, ttab, max_steps,
        )
        status[j] = st
        hits[j] = idx
        steps[j] = ns
    return status, hits, steps


@njit(cache=True)
def batch_ordering(
    seed, replica0, n, thr, offs, off_lin, codes, positive, mult,
    z, apts, budget,
):
    """Per replica: smallest i with a_i in C(z), or -1; status as elsewhere.

    After the first contact a_m is found from z, membership of each earlier
    a_j is decided by a search between a_j and a_m; C(a_j) is typically
    small when it misses C(z), unlike C(z) itself.
    """
    d = offs.shape[1]
    k = apts.shape[0]
    ttab, tlins = build_set(apts, mult)
    zr = z.reshape(1, d)
    ztab, zlins = build_set(zr, mult)
    pts, lins, table, stamp = _new_ws(d, budget)
    empty_k = np.empty(0, dtype=np.int64)
    empty_c = np.empty((0, d), dtype=np.int64)
    status = np.empty(n, dtype=np.int8)
    first = np.empty(n, dtype=np.int64)
    cur = 0
    for j in range(n):
        k1, k2 = stream_key(seed, replica0 + j, TAG_EDGE)
        st, mhit, pts, lins, table, stamp, cur = connect_either_way(
            zr, apts, tlins, ttab, zlins, ztab, k1, k2, thr, offs, off_lin, codes, positive,
            mult, empty_k, empty_c, empty_k, empty_k, budget, pts, lins, table, stamp, cur,
        )
        if st != CONNECTED:
            status[j] = st
            first[j] = -1
            continue
        # anchor: a vertex known to be in C(z)
        if mhit >= 0:
            anchor = apts[mhit : mhit + 1]
            upto = mhit
        else:
            anchor = zr
            upto = k
        atab, alins = build_set(anchor, mult)
        best = mhit
        trunc = False
        for jj in range(upto):
            src = apts[jj : jj + 1]
            stab, slins = build_set(src, mult)
            s2, _, pts, lins, table, stamp, cur = connect_either_way(
                src, anchor, alins, atab, slins, stab, k1, k2, thr, offs, off_lin, codes,
                positive, mult, empty_k, empty_c, empty_k, empty_k, budget,
                pts, lins, table, stamp, cur,
            )
            if s2 == CONNECTED:
                best = jj
                break
            if s2 == TRUNCATED:
                trunc = True
                break
        if trunc or best < 0:
            status[j] = TRUNCATED
            first[j] = -1
        else:
            status[j] = CONNECTED
            first[j] = best
    return status, first


@njit(cache=True)
def batch_iic(
    seed, replica0, n, thr, offs, off_lin, codes, positive, mult,
    x, w, apts, rk, rc, ra, rb, budget,
):
    """Per attempt: accept iff x <-> w (inside the region); on acceptance
    record whether C(x) meets A.

    Codes: 0 rejected, 1 accepted & misses A, 2 accepted & hits A,
    3 acceptance test truncated, 4 accepted but the A test truncated.
    Both tests search from either end before giving up.
    """
    d = offs.shape[1]
    xr = x.reshape(1, d)
    wr = w.reshape(1, d)
    wt, wl = build_set(wr, mult)
    xt, xl = build_set(xr, mult)
    at, al = build_set(apts, mult)
    pts, lins, table, stamp = _new_ws(d, budget)
    out = np.empty(n, dtype=np.int8)
    cur = 0
    for j in range(n):
        k1, k2 = stream_key(seed, replica0 + j, TAG_EDGE)
        st, _, pts, lins, table, stamp, cur = connect_either_way(
            xr, wr, wl, wt, xl, xt, k1, k2, thr, offs, off_lin, codes, positive, mult,
            rk, rc, ra, rb, budget, pts, lins, table, stamp, cur,
        )
        if st == DISCONNECTED:
            out[j] = 0
            continue
        if st == TRUNCATED:
            out[j] = 3
            continue
        # from A towards x first: C(A) is small when it misses C(x)
        st, _, pts, lins, table, stamp, cur = connect_either_way(
            apts, xr, xl, xt, al, at, k1, k2, thr, offs, off_lin, codes, positive, mult,
            rk, rc, ra, rb, budget, pts, lins, table, stamp, cur,
        )
        if st == CONNECTED:
            out[j] = 2
        elif st == TRUNCATED:
            out[j] = 4
        else:
            out[j] = 1
    return out
