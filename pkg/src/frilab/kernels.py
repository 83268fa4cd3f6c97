"""Hot array kernels, each in a numba-jitted and a pure-numpy/python twin.

Kernels are deterministic transforms of pre-drawn arrays (no RNG inside), so
the two backends return bit-identical results; the module-level dispatchers
pick the twin selected by :mod:`frilab.backend`.

Conventions shared with :class:`frilab.lattice.Box`:
  * vertex index: row-major over the window, ``rel @ strides``;
  * edge slot: ``vertex_index * d + axis`` for the edge to the positive
    neighbor along ``axis``;
  * direction code: ``axis * 2 + (0 for +1, 1 for -1)``.
"""

from __future__ import annotations

import numpy as np

from .backend import njit, use_numba

# ---------------------------------------------------------------------------
# walk generation: traversal events clipped to a window edge box


@njit(cache=True)
def _walk_edge_events_numba(starts, lengths, dirs, center, radius, strides):
    n = starts.shape[0]
    d = starts.shape[1]
    total = dirs.shape[0]
    out_walk = np.empty(total, dtype=np.int64)
    out_slot = np.empty(total, dtype=np.int64)
    m = 0
    step = 0
    pos = np.empty(d, dtype=np.int64)
    for w in range(n):
        for i in range(d):
            pos[i] = starts[w, i]
        for _ in range(lengths[w]):
            code = dirs[step]
            step += 1
            axis = code >> 1
            sign = 1 - 2 * (code & 1)
            lo_ax = pos[axis] if sign == 1 else pos[axis] - 1
            inside = True
            vid = 0
            for i in range(d):
                ci = lo_ax if i == axis else pos[i]
                rel = ci - center[i] + radius
                if i == axis:
                    if rel < 0 or rel > 2 * radius - 1:
                        inside = False
                        break
                else:
                    if rel < 0 or rel > 2 * radius:
                        inside = False
                        break
                vid += rel * strides[i]
            if inside:
                out_walk[m] = w
                out_slot[m] = vid * d + axis
                m += 1
            pos[axis] += sign
    return out_walk[:m].copy(), out_slot[:m].copy()


def _walk_edge_events_numpy(starts, lengths, dirs, center, radius, strides):
    n = starts.shape[0]
    d = starts.shape[1]
    if dirs.shape[0] == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    codes = dirs.astype(np.int64)  # uint8 arithmetic would wrap the sign
    axis = codes >> 1
    sign = 1 - 2 * (codes & 1)
    disp = np.zeros((dirs.shape[0], d), dtype=np.int64)
    disp[np.arange(dirs.shape[0]), axis] = sign
    rep = np.repeat(np.arange(n, dtype=np.int64), lengths)
    cs = np.cumsum(disp, axis=0)
    seg_start = np.concatenate(
        ([0], np.cumsum(lengths)[:-1])
    ).astype(np.int64)
    base = np.zeros((n, d), dtype=np.int64)
    nz = seg_start > 0
    base[nz] = cs[seg_start[nz] - 1]
    pos_after = starts[rep] + cs - base[rep]
    pos_before = pos_after - disp
    lo = np.minimum(pos_before, pos_after)
    hi = np.maximum(pos_before, pos_after)
    c = np.asarray(center, dtype=np.int64)
    ok = (np.abs(lo - c).max(axis=1) <= radius) & (
        np.abs(hi - c).max(axis=1) <= radius
    )
    rel = lo[ok] - c + radius
    vids = rel @ np.asarray(strides, dtype=np.int64)
    slots = vids * d + axis[ok]
    return rep[ok], slots


def walk_edge_events(starts, lengths, dirs, center, radius, strides):
    """(walk index, window edge slot) per traversal event, in step order.

    ``starts``: (n, d) int64; ``lengths``: (n,) int64 summing to
    ``len(dirs)``; ``dirs``: direction codes for all steps, walk-major.
    Duplicate traversals are kept (callers deduplicate as needed).
    """
    starts = np.ascontiguousarray(starts, dtype=np.int64)
    lengths = np.ascontiguousarray(lengths, dtype=np.int64)
    dirs = np.ascontiguousarray(dirs, dtype=np.uint8)
    center = np.ascontiguousarray(center, dtype=np.int64)
    strides = np.ascontiguousarray(strides, dtype=np.int64)
    if use_numba():
        return _walk_edge_events_numba(
            starts, lengths, dirs, center, int(radius), strides
        )
    return _walk_edge_events_numpy(
        starts, lengths, dirs, center, int(radius), strides
    )


@njit(cache=True)
def _walk_vertex_visits_numba(starts, lengths, dirs, center, radius, strides):
    n = starts.shape[0]
    d = starts.shape[1]
    total = dirs.shape[0] + n
    out_walk = np.empty(total, dtype=np.int64)
    out_vid = np.empty(total, dtype=np.int64)
    m = 0
    step = 0
    pos = np.empty(d, dtype=np.int64)
    for w in range(n):
        for i in range(d):
            pos[i] = starts[w, i]
        for k in range(lengths[w] + 1):
            if k > 0:
                code = dirs[step]
                step += 1
                axis = code >> 1
                pos[axis] += 1 - 2 * (code & 1)
            inside = True
            vid = 0
            for i in range(d):
                rel = pos[i] - center[i] + radius
                if rel < 0 or rel > 2 * radius:
                    inside = False
                    break
                vid += rel * strides[i]
            if inside:
                out_walk[m] = w
                out_vid[m] = vid
                m += 1
    return out_walk[:m].copy(), out_vid[:m].copy()


def _walk_vertex_visits_numpy(starts, lengths, dirs, center, radius, strides):
    n = starts.shape[0]
    d = starts.shape[1]
    total = dirs.shape[0]
    c = np.asarray(center, dtype=np.int64)
    st = np.asarray(strides, dtype=np.int64)
    if total == 0:
        pos = starts
        walk = np.arange(n, dtype=np.int64)
    else:
        codes = dirs.astype(np.int64)  # uint8 arithmetic would wrap the sign
        axis = codes >> 1
        sign = 1 - 2 * (codes & 1)
        disp = np.zeros((total, d), dtype=np.int64)
        disp[np.arange(total), axis] = sign
        rep = np.repeat(np.arange(n, dtype=np.int64), lengths)
        cs = np.cumsum(disp, axis=0)
        seg_start = np.concatenate(([0], np.cumsum(lengths)[:-1])).astype(np.int64)
        base = np.zeros((n, d), dtype=np.int64)
        nz = seg_start > 0
        base[nz] = cs[seg_start[nz] - 1]
        after = starts[rep] + cs - base[rep]
        # interleave each walk's start in front of its step positions
        order_keys = np.concatenate((np.arange(n), rep))
        order_sub = np.concatenate(
            (np.zeros(n, np.int64), np.arange(1, total + 1) - seg_start[rep])
        )
        order = np.lexsort((order_sub, order_keys))
        pos = np.concatenate((starts, after))[order]
        walk = np.concatenate((np.arange(n, dtype=np.int64), rep))[order]
    ok = np.abs(pos - c).max(axis=1) <= radius
    rel = pos[ok] - c + radius
    return walk[ok], rel @ st


def walk_vertex_visits(starts, lengths, dirs, center, radius, strides):
    """(walk index, window vertex id) per visit, in step order, starts
    included.  Duplicates are kept."""
    starts = np.ascontiguousarray(starts, dtype=np.int64)
    lengths = np.ascontiguousarray(lengths, dtype=np.int64)
    dirs = np.ascontiguousarray(dirs, dtype=np.uint8)
    center = np.ascontiguousarray(center, dtype=np.int64)
    strides = np.ascontiguousarray(strides, dtype=np.int64)
    if use_numba():
        return _walk_vertex_visits_numba(
            starts, lengths, dirs, center, int(radius), strides
        )
    return _walk_vertex_visits_numpy(
        starts, lengths, dirs, center, int(radius), strides
    )


# ---------------------------------------------------------------------------
# union-find


@njit(cache=True)
def _uf_find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@njit(cache=True)
def _uf_union(parent, rank, a, b):
    ra = _uf_find(parent, a)
    rb = _uf_find(parent, b)
    if ra == rb:
        return
    if rank[ra] < rank[rb]:
        parent[ra] = rb
    elif rank[ra] > rank[rb]:
        parent[rb] = ra
    else:
        parent[rb] = ra
        rank[ra] += 1


@njit(cache=True)
def _components_numba(n, eu, ev):
    parent = np.arange(n, dtype=np.int64)
    rank = np.zeros(n, dtype=np.int64)
    for i in range(eu.shape[0]):
        _uf_union(parent, rank, eu[i], ev[i])
    labels = np.empty(n, dtype=np.int64)
    for x in range(n):
        labels[x] = _uf_find(parent, x)
    # canonicalize: label = smallest member id
    mins = np.full(n, n, dtype=np.int64)
    for x in range(n):
        r = labels[x]
        if x < mins[r]:
            mins[r] = x
    for x in range(n):
        labels[x] = mins[labels[x]]
    return labels


class _PyUnionFind:
    """Plain union-find used by the fallback twins."""

    def __init__(self, n):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, x):
        parent = self.parent
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1


def _components_numpy(n, eu, ev):
    uf = _PyUnionFind(n)
    for a, b in zip(eu.tolist(), ev.tolist()):
        uf.union(a, b)
    roots = np.fromiter((uf.find(x) for x in range(n)), dtype=np.int64, count=n)
    mins = np.full(n, n, dtype=np.int64)
    np.minimum.at(mins, roots, np.arange(n, dtype=np.int64))
    return mins[roots]


def components_labels(n, eu, ev):
    """Connected-component label per vertex; label = min member id."""
    eu = np.ascontiguousarray(eu, dtype=np.int64)
    ev = np.ascontiguousarray(ev, dtype=np.int64)
    if use_numba():
        return _components_numba(int(n), eu, ev)
    return _components_numpy(int(n), eu, ev)


@njit(cache=True)
def _first_connection_numba(n, eu, ev, offsets, src, dst):
    parent = np.arange(n + 2, dtype=np.int64)
    rank = np.zeros(n + 2, dtype=np.int64)
    s = n
    t = n + 1
    for i in range(src.shape[0]):
        _uf_union(parent, rank, s, src[i])
    for i in range(dst.shape[0]):
        _uf_union(parent, rank, t, dst[i])
    if _uf_find(parent, s) == _uf_find(parent, t):
        return 0
    n_groups = offsets.shape[0] - 1
    for g in range(n_groups):
        for i in range(offsets[g], offsets[g + 1]):
            _uf_union(parent, rank, eu[i], ev[i])
        if _uf_find(parent, s) == _uf_find(parent, t):
            return g + 1
    return -1


def _first_connection_numpy(n, eu, ev, offsets, src, dst):
    uf = _PyUnionFind(n + 2)
    s, t = n, n + 1
    for a in src.tolist():
        uf.union(s, a)
    for b in dst.tolist():
        uf.union(t, b)
    if uf.find(s) == uf.find(t):
        return 0
    n_groups = offsets.shape[0] - 1
    eu_l, ev_l = eu.tolist(), ev.tolist()
    for g in range(n_groups):
        for i in range(offsets[g], offsets[g + 1]):
            uf.union(eu_l[i], ev_l[i])
        if uf.find(s) == uf.find(t):
            return g + 1
    return -1


def first_connection_index(n, eu, ev, offsets, src, dst):
    """Smallest 1-based group count after which src and dst sets connect.

    Edge endpoints arrive grouped (``offsets`` has one more entry than there
    are groups); groups are unioned in order.  Returns 0 when the sets share
    a vertex already, -1 when all groups leave them apart.
    """
    eu = np.ascontiguousarray(eu, dtype=np.int64)
    ev = np.ascontiguousarray(ev, dtype=np.int64)
    offsets = np.ascontiguousarray(offsets, dtype=np.int64)
    src = np.ascontiguousarray(src, dtype=np.int64)
    dst = np.ascontiguousarray(dst, dtype=np.int64)
    if use_numba():
        return int(
            _first_connection_numba(int(n), eu, ev, offsets, src, dst)
        )
    return int(_first_connection_numpy(int(n), eu, ev, offsets, src, dst))


def connected_in(n, eu, ev, src, dst) -> bool:
    """True iff the src and dst vertex-id sets are joined by the edges."""
    one = np.asarray([0, len(eu)], dtype=np.int64)
    return first_connection_index(n, eu, ev, one, src, dst) >= 0
