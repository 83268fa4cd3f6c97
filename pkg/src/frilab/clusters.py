"""Cluster analytics and percolation events on window edge sets.

Connectivity is computed by union-find over dense window vertex ids; a
vertex shared between two query sets counts as connected (the zero-length
path).  Events that restrict to a box measure clusters and their diameters
from the edges inside that box only.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from . import kernels
from .lattice import Box, EdgeSet, GeometryError


def _as_coords(vertices, d: int) -> np.ndarray:
    arr = np.asarray(list(vertices) if not isinstance(vertices, np.ndarray) else vertices)
    if arr.size == 0:
        return np.empty((0, d), np.int64)
    arr = arr.reshape(-1, d).astype(np.int64)
    return arr


def _edges_as_box_ids(edges: EdgeSet, box: Box):
    """Endpoint id pairs (in ``box`` numbering) of the edges lying fully
    inside ``box``."""
    w = edges.window
    slots = np.flatnonzero(edges.mask)
    eu, ev = w.edge_slot_endpoints(slots)
    cu = w.vertex_coords(eu)
    cv = w.vertex_coords(ev)
    ok = box.contains(cu) & box.contains(cv)
    return box.vertex_ids(cu[ok]), box.vertex_ids(cv[ok])


def _shell_window_ids(window: Box, center, radius: int) -> np.ndarray:
    shell_box = Box(tuple(center), radius)
    coords = shell_box.vertex_coords(shell_box.boundary_vertex_ids())
    if not np.all(window.contains(coords)):
        raise GeometryError("window does not cover the requested shell")
    return window.vertex_ids(coords)


def _box_window_ids(window: Box, center, radius: int) -> np.ndarray:
    inner = Box(tuple(center), radius)
    coords = inner.all_coords()
    if not np.all(window.contains(coords)):
        raise GeometryError("window does not cover the requested box")
    return window.vertex_ids(coords)


@dataclass
class ClusterIndex:
    """Connectivity partition of a box with per-cluster aggregates."""

    window: Box
    labels: np.ndarray

    def __post_init__(self):
        n = self.window.n_vertices
        if self.labels.shape != (n,):
            raise ValueError("one label per window vertex required")
        self._roots = np.unique(self.labels)
        coords = self.window.all_coords()
        d = self.window.d
        big = np.iinfo(np.int64).max
        mins = np.full((n, d), big, dtype=np.int64)
        maxs = np.full((n, d), -big, dtype=np.int64)
        np.minimum.at(mins, self.labels, coords)
        np.maximum.at(maxs, self.labels, coords)
        self._sizes = np.bincount(self.labels, minlength=n).astype(np.int64)
        self._mins = mins
        self._maxs = maxs

    def find(self, vid: int) -> int:
        return int(self.labels[vid])

    @property
    def roots(self) -> np.ndarray:
        return self._roots

    def size_of(self, root: int) -> int:
        return int(self._sizes[root])

    def bbox_of(self, root: int):
        return self._mins[root].copy(), self._maxs[root].copy()

    def diameter_of(self, root: int) -> int:
        return int((self._maxs[root] - self._mins[root]).max())

    def diameters(self) -> np.ndarray:
        """Diameter per root, aligned with :attr:`roots`."""
        return (self._maxs[self._roots] - self._mins[self._roots]).max(axis=1)


def build_index(edges: EdgeSet, window: Box | None = None) -> ClusterIndex:
    """Exact connectivity partition of the window under ``edges``."""
    if window is not None and window != edges.window:
        raise GeometryError("edge set belongs to a different window")
    w = edges.window
    slots = np.flatnonzero(edges.mask)
    eu, ev = w.edge_slot_endpoints(slots)
    labels = kernels.components_labels(w.n_vertices, eu, ev)
    return ClusterIndex(w, labels)


def connected(A, B, edges: EdgeSet, within=None) -> bool:
    """True iff some path in ``edges`` joins A and B, staying inside
    ``within`` (a Box or vertex collection) when given."""
    w = edges.window
    d = w.d
    ca = _as_coords(A, d)
    cb = _as_coords(B, d)
    if ca.shape[0] == 0 or cb.shape[0] == 0:
        raise GeometryError("A and B must be nonempty")
    slots = np.flatnonzero(edges.mask)
    eu, ev = w.edge_slot_endpoints(slots)
    if within is not None:
        allowed = np.zeros(w.n_vertices, dtype=bool)
        if isinstance(within, Box):
            coords = w.all_coords()
            allowed[within.contains(coords)] = True
        else:
            cw = _as_coords(within, d)
            cw = cw[w.contains(cw)]
            allowed[w.vertex_ids(cw)] = True
        ca = ca[w.contains(ca)]
        ca = ca[allowed[w.vertex_ids(ca)]] if ca.shape[0] else ca
        cb = cb[w.contains(cb)]
        cb = cb[allowed[w.vertex_ids(cb)]] if cb.shape[0] else cb
        if ca.shape[0] == 0 or cb.shape[0] == 0:
            return False
        ok = allowed[eu] & allowed[ev]
        eu, ev = eu[ok], ev[ok]
    else:
        if not (np.all(w.contains(ca)) and np.all(w.contains(cb))):
            raise GeometryError("query vertices must lie in the window")
    src = w.vertex_ids(ca)
    dst = w.vertex_ids(cb)
    return kernels.connected_in(w.n_vertices, eu, ev, src, dst)


def crossing(R: int, edges: EdgeSet, center=None) -> bool:
    """{B(R) joined to the shell at 2R by the edge set}."""
    w = edges.window
    c = tuple(center) if center is not None else w.center
    src = _box_window_ids(w, c, R)
    dst = _shell_window_ids(w, c, 2 * R)
    slots = np.flatnonzero(edges.mask)
    eu, ev = w.edge_slot_endpoints(slots)
    return kernels.connected_in(w.n_vertices, eu, ev, src, dst)


def _box_components(edges: EdgeSet, center, radius: int):
    """(labels over the sub-box, sub-box) for edges inside the box."""
    box = Box(tuple(center), radius)
    eu, ev = _edges_as_box_ids(edges, box)
    labels = kernels.components_labels(box.n_vertices, eu, ev)
    return labels, box


def _component_diameters(labels: np.ndarray, box: Box):
    """Per-root diameters, only for roots with at least one edge member."""
    n = box.n_vertices
    coords = box.all_coords()
    big = np.iinfo(np.int64).max
    mins = np.full((n, box.d), big, dtype=np.int64)
    maxs = np.full((n, box.d), -big, dtype=np.int64)
    np.minimum.at(mins, labels, coords)
    np.maximum.at(maxs, labels, coords)
    roots = np.unique(labels)
    return roots, (maxs[roots] - mins[roots]).max(axis=1)


def exist_event(R: int, edges: EdgeSet, center=None) -> bool:
    """Some cluster of the edges inside B(R) has diameter >= R/5."""
    c = tuple(center) if center is not None else edges.window.center
    labels, box = _box_components(edges, c, R)
    roots, diams = _component_diameters(labels, box)
    sizes = np.bincount(labels, minlength=box.n_vertices)
    has_edge = sizes[roots] >= 2
    return bool(np.any(diams[has_edge] >= R / 5.0))


def unique_event(R: int, edges: EdgeSet, center=None) -> bool:
    """All clusters of B(R) edges with diameter >= R/10 are pairwise
    connected by the edges inside B(2R)."""
    c = tuple(center) if center is not None else edges.window.center
    labels, box = _box_components(edges, c, R)
    roots, diams = _component_diameters(labels, box)
    sizes = np.bincount(labels, minlength=box.n_vertices)
    qualifying = roots[(diams >= R / 10.0) & (sizes[roots] >= 2)]
    if qualifying.shape[0] <= 1:
        return True
    big_labels, big_box = _box_components(edges, c, 2 * R)
    # any member vertex represents its cluster; roots are vertex ids of
    # the small box, valid coordinates in the big box as well
    reps = box.vertex_coords(qualifying)
    rep_labels = big_labels[big_box.vertex_ids(reps)]
    return bool(np.all(rep_labels == rep_labels[0]))


def xi_event(N: int, edges_alpha: EdgeSet, edges_beta: EdgeSet, center=None) -> bool:
    """Crossing of B(N) to the 6N shell in alpha, plus beta-uniqueness of
    the alpha clusters of B(4N) touching both the 4N and 2N+1 shells."""
    if not edges_alpha.issubset(edges_beta):
        raise GeometryError("edges_alpha must be contained in edges_beta")
    w = edges_alpha.window
    c = tuple(center) if center is not None else w.center
    src = _box_window_ids(w, c, N)
    dst = _shell_window_ids(w, c, 6 * N)
    slots = np.flatnonzero(edges_alpha.mask)
    eu, ev = w.edge_slot_endpoints(slots)
    if not kernels.connected_in(w.n_vertices, eu, ev, src, dst):
        return False
    labels, box = _box_components(edges_alpha, c, 4 * N)
    coords = box.all_coords()
    linf = np.abs(coords - np.asarray(c, np.int64)).max(axis=1)
    sizes = np.bincount(labels, minlength=box.n_vertices)
    touch_outer = np.zeros(box.n_vertices, dtype=bool)
    touch_inner = np.zeros(box.n_vertices, dtype=bool)
    np.logical_or.at(touch_outer, labels[linf == 4 * N], True)
    np.logical_or.at(touch_inner, labels[linf == 2 * N + 1], True)
    roots = np.unique(labels)
    qualifying = roots[
        touch_outer[roots] & touch_inner[roots] & (sizes[roots] >= 2)
    ]
    if qualifying.shape[0] <= 1:
        return True
    beta_labels, beta_box = _box_components(edges_beta, c, 4 * N)
    reps = box.vertex_coords(qualifying)
    rep_labels = beta_labels[beta_box.vertex_ids(reps)]
    return bool(np.all(rep_labels == rep_labels[0]))


def annulus_event_A(n: int, x, K_scales, edges: EdgeSet) -> bool:
    """Crossing event at scale K_n around center x."""
    return crossing(int(K_scales[n]), edges, center=x)


@dataclass
class BoxGrid:
    """Good/bad classification of a K0-spaced grid of boxes.

    ``events`` records the (exist, unique, pair-equal) triple each flag was
    computed from; the flag is their conjunction.
    """

    k0: int
    centers: np.ndarray
    flags: np.ndarray
    events: np.ndarray

    def bad_centers(self) -> np.ndarray:
        return self.centers[~self.flags]


def classify_boxes(pair, k0: int, extent: int) -> BoxGrid:
    """Flag each grid box good iff the first (smaller-T) sample has the
    exist and unique events at radius k0 around its center and the coupled
    pair agrees edgewise on the surrounding 2k0 box."""
    first = pair.derived.window_edges()
    second = pair.source.window_edges()
    w = first.window
    if second.window != w:
        raise GeometryError("coupled samples live on different windows")
    if extent * k0 + 2 * k0 > w.radius:
        raise GeometryError("window too small for the requested grid extent")
    d = w.d
    axes = [np.arange(-extent, extent + 1, dtype=np.int64) * k0 + c
            for c in w.center]
    mesh = np.meshgrid(*axes, indexing="ij")
    centers = np.stack([m.ravel() for m in mesh], axis=1)
    diff_slots = np.flatnonzero(first.mask ^ second.mask)
    du, dv = w.edge_slot_endpoints(diff_slots)
    dcu = w.vertex_coords(du)
    dcv = w.vertex_coords(dv)
    n_cells = centers.shape[0]
    ex = np.zeros(n_cells, dtype=bool)
    un = np.zeros(n_cells, dtype=bool)
    eq = np.zeros(n_cells, dtype=bool)
    for i in range(n_cells):
        c = tuple(centers[i])
        ex[i] = exist_event(k0, first, center=c)
        un[i] = unique_event(k0, first, center=c)
        if dcu.shape[0] == 0:
            eq[i] = True
        else:
            inside = (
                np.abs(dcu - centers[i]).max(axis=1) <= 2 * k0
            ) & (np.abs(dcv - centers[i]).max(axis=1) <= 2 * k0)
            eq[i] = not bool(np.any(inside))
    flags = ex & un & eq
    events = np.stack([ex, un, eq], axis=1)
    return BoxGrid(k0=k0, centers=centers, flags=flags, events=events)


def star_crossing_H(x, M: int, N: int, bad_centers, k0: int) -> bool:
    """True iff a *-path of bad box centers joins B_x(M) to the complement
    of the open ball of radius N (reaching sup-norm distance >= N)."""
    if M > N:
        raise ValueError("need M <= N")
    centers = _as_coords(bad_centers, len(x))
    if centers.shape[0] == 0:
        return False
    x = np.asarray(x, dtype=np.int64)
    dist = np.abs(centers - x).max(axis=1)
    start = dist <= M
    goal = dist >= N
    if not start.any():
        return False
    index = {tuple(c): i for i, c in enumerate(centers)}
    offsets = [
        np.asarray(o, dtype=np.int64) * k0
        for o in product((-1, 0, 1), repeat=centers.shape[1])
        if any(o)
    ]
    seen = start.copy()
    frontier = list(np.flatnonzero(start))
    while frontier:
        i = frontier.pop()
        if goal[i]:
            return True
        for off in offsets:
            j = index.get(tuple(centers[i] + off))
            if j is not None and not seen[j]:
                seen[j] = True
                frontier.append(j)
    return bool(np.any(seen & goal))