"""Geometry of the integer lattice and its nearest-neighbor edges.

Boxes are l-infinity balls ``B_c(r)``.  Vertex sets and edge sets that feed
the hot kernels use dense window-relative indexing: a vertex of ``B_c(r)`` is
a flat row-major index, an edge is ``vertex_index * d + axis`` for the edge
from a vertex to its positive neighbor along ``axis``.  Global (windowless)
sets are unsupported by design.

Public vertices are plain int tuples and edges are ordered pairs of tuples
with the lexicographically smaller endpoint first.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

Vertex = tuple
Edge = tuple


class GeometryError(ValueError):
    """Contract violation in a geometry operation."""


class EmptySetError(GeometryError):
    """An operation that requires nonempty input received an empty set."""


class OffGridError(GeometryError):
    """A vertex expected on the coarse grid K0 * Z^d is not on it."""


def unit_step(d: int, axis: int, sign: int) -> Vertex:
    v = [0] * d
    v[axis] = sign
    return tuple(v)


def canonical_edge(x, y) -> Edge:
    """Unordered nearest-neighbor edge, smaller endpoint first."""
    x = tuple(int(c) for c in x)
    y = tuple(int(c) for c in y)
    if sum(abs(a - b) for a, b in zip(x, y)) != 1:
        raise GeometryError(f"not a nearest-neighbor pair: {x}, {y}")
    return (x, y) if x < y else (y, x)


@dataclass(frozen=True)
class Box:
    """l-infinity ball ``B_center(radius)`` with dense vertex/edge indexing."""

    center: Vertex
    radius: int

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(int(c) for c in self.center))
        if self.radius < 0:
            raise GeometryError("box radius must be >= 0")
        if len(self.center) < 1:
            raise GeometryError("dimension must be >= 1")

    @property
    def d(self) -> int:
        return len(self.center)

    @property
    def side(self) -> int:
        return 2 * self.radius + 1

    @property
    def n_vertices(self) -> int:
        return self.side**self.d

    @property
    def n_edge_slots(self) -> int:
        return self.n_vertices * self.d

    @property
    def n_edges(self) -> int:
        # d * 2R * (2R+1)^(d-1)
        return self.d * 2 * self.radius * self.side ** (self.d - 1)

    @cached_property
    def _strides(self) -> np.ndarray:
        # row-major: last axis varies fastest
        s = np.ones(self.d, dtype=np.int64)
        for i in range(self.d - 2, -1, -1):
            s[i] = s[i + 1] * self.side
        return s

    @cached_property
    def _center_arr(self) -> np.ndarray:
        return np.asarray(self.center, dtype=np.int64)

    def contains(self, coords) -> np.ndarray:
        """Vectorized membership for an (n, d) coordinate array."""
        coords = np.asarray(coords, dtype=np.int64)
        return np.max(np.abs(coords - self._center_arr), axis=-1) <= self.radius

    def contains_vertex(self, x) -> bool:
        return max(abs(int(a) - b) for a, b in zip(x, self.center)) <= self.radius

    def vertex_ids(self, coords) -> np.ndarray:
        """Flat indices of (n, d) coordinates; caller guarantees membership."""
        coords = np.asarray(coords, dtype=np.int64)
        rel = coords - self._center_arr + self.radius
        return rel @ self._strides

    def vertex_coords(self, ids) -> np.ndarray:
        """(n, d) coordinates for flat indices."""
        ids = np.asarray(ids, dtype=np.int64)
        out = np.empty(ids.shape + (self.d,), dtype=np.int64)
        rem = ids
        for i in range(self.d):
            out[..., i], rem = np.divmod(rem, self._strides[i])
        return out - self.radius + self._center_arr

    @cached_property
    def _coords_table(self) -> np.ndarray:
        axes = [
            np.arange(c - self.radius, c + self.radius + 1, dtype=np.int64)
            for c in self.center
        ]
        grid = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=1)

    def all_coords(self) -> np.ndarray:
        """(n_vertices, d) coordinates in index order."""
        return self._coords_table

    @cached_property
    def _valid_slot_mask(self) -> np.ndarray:
        coords = self.all_coords()
        valid = np.empty((self.n_vertices, self.d), dtype=bool)
        for axis in range(self.d):
            valid[:, axis] = coords[:, axis] < self.center[axis] + self.radius
        return valid.ravel()

    def edge_slot_valid(self) -> np.ndarray:
        """Boolean mask over edge slots: slot v*d+axis is a real in-box edge."""
        return self._valid_slot_mask

    def edge_slot_endpoints(self, slots) -> tuple:
        """Vertex-id pairs (lower, upper) for edge slots."""
        slots = np.asarray(slots, dtype=np.int64)
        vid = slots // self.d
        axis = slots % self.d
        return vid, vid + self._strides[axis]

    def edge_slot_of(self, edge: Edge) -> int:
        """Flat slot of a canonical edge; both endpoints must be inside."""
        a, b = edge
        diff = [bb - aa for aa, bb in zip(a, b)]
        axis = next(i for i, v in enumerate(diff) if v != 0)
        if diff[axis] != 1:
            raise GeometryError(f"edge not in canonical orientation: {edge}")
        vid = int(self.vertex_ids(np.asarray([a]))[0])
        return vid * self.d + axis

    def edge_of_slot(self, slot: int) -> Edge:
        vid, axis = divmod(int(slot), self.d)
        a = tuple(int(c) for c in self.vertex_coords(np.asarray([vid]))[0])
        b = list(a)
        b[axis] += 1
        return (a, tuple(b))

    @cached_property
    def _shell_ids(self) -> np.ndarray:
        if self.radius == 0:
            return np.zeros(1, dtype=np.int64)
        coords = self.all_coords()
        on_shell = (
            np.max(np.abs(coords - self._center_arr), axis=1) == self.radius
        )
        return np.nonzero(on_shell)[0].astype(np.int64)

    def boundary_vertex_ids(self) -> np.ndarray:
        """Indices of the internal boundary shell (l-infinity == radius)."""
        return self._shell_ids

    def shell_vertex_count(self, k: int) -> int:
        """Number of vertices at l-infinity distance exactly ``radius + k``."""
        if k < 0:
            raise GeometryError("shell offset must be >= 0")
        rr = self.radius + k
        if rr == 0:
            return 1
        return (2 * rr + 1) ** self.d - (2 * rr - 1) ** self.d


def box_vertices(box: Box) -> set:
    """All vertices of the box as tuples (use only at small radii)."""
    return {tuple(int(c) for c in row) for row in box.all_coords()}


def box_edges(box: Box) -> "EdgeSet":
    """Every edge with both endpoints in the box."""
    return EdgeSet(box, box.edge_slot_valid().copy())


@dataclass
class EdgeSet:
    """Dense edge set over a window box.

    ``mask`` is a boolean array over the window's edge slots; invalid slots
    (edges that would leave the box) stay False.
    """

    window: Box
    mask: np.ndarray

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.shape != (self.window.n_edge_slots,):
            raise GeometryError("edge mask shape does not match the window")

    @classmethod
    def empty(cls, window: Box) -> "EdgeSet":
        return cls(window, np.zeros(window.n_edge_slots, dtype=bool))

    @classmethod
    def from_edges(cls, window: Box, edges) -> "EdgeSet":
        out = cls.empty(window)
        for e in edges:
            out.mask[window.edge_slot_of(e)] = True
        return out

    def _check_same_window(self, other: "EdgeSet"):
        if self.window != other.window:
            raise GeometryError("edge sets live on different windows")

    def __contains__(self, edge: Edge) -> bool:
        a, b = edge
        if not (self.window.contains_vertex(a) and self.window.contains_vertex(b)):
            return False
        return bool(self.mask[self.window.edge_slot_of(canonical_edge(a, b))])

    def __iter__(self):
        for slot in np.nonzero(self.mask)[0]:
            yield self.window.edge_of_slot(int(slot))

    def __len__(self) -> int:
        return int(self.mask.sum())

    def union(self, other: "EdgeSet") -> "EdgeSet":
        self._check_same_window(other)
        return EdgeSet(self.window, self.mask | other.mask)

    def difference(self, other: "EdgeSet") -> "EdgeSet":
        self._check_same_window(other)
        return EdgeSet(self.window, self.mask & ~other.mask)

    def intersection(self, other: "EdgeSet") -> "EdgeSet":
        self._check_same_window(other)
        return EdgeSet(self.window, self.mask & other.mask)

    def issubset(self, other: "EdgeSet") -> bool:
        self._check_same_window(other)
        return bool(np.all(other.mask[self.mask]))

    def to_edges(self) -> list:
        return list(self)

    def copy(self) -> "EdgeSet":
        return EdgeSet(self.window, self.mask.copy())


def _as_vertex_set(obj) -> set:
    if isinstance(obj, Box):
        return box_vertices(obj)
    return {tuple(int(c) for c in v) for v in obj}


def _neighbors(x: Vertex):
    d = len(x)
    for axis in range(d):
        for sign in (1, -1):
            y = list(x)
            y[axis] += sign
            yield tuple(y)


def internal_boundary(vertices) -> set:
    """Vertices of A with at least one l1-neighbor outside A."""
    A = _as_vertex_set(vertices)
    return {x for x in A if any(y not in A for y in _neighbors(x))}


def outer_boundary(vertices) -> set:
    """Vertices outside A with at least one l1-neighbor inside A."""
    A = _as_vertex_set(vertices)
    out = set()
    for x in A:
        for y in _neighbors(x):
            if y not in A:
                out.add(y)
    return out


def _as_edge_collection(obj) -> set:
    if isinstance(obj, EdgeSet):
        return set(obj)
    return {canonical_edge(*e) for e in obj}


def covered_vertices(edges) -> set:
    """V(A): all endpoints of an edge collection."""
    es = _as_edge_collection(edges)
    out = set()
    for a, b in es:
        out.add(a)
        out.add(b)
    return out


def edge_boundary(edges) -> set:
    """Edges of A whose both endpoints lie on the boundary of V(A)."""
    es = _as_edge_collection(edges)
    if not es:
        return set()
    bnd = internal_boundary(covered_vertices(es))
    return {e for e in es if e[0] in bnd and e[1] in bnd}

def outer_edge_boundary(edges) -> set:
    """Edges outside A from the boundary of V(A) to its outer boundary."""
    es = _as_edge_collection(edges)
    if not es:
        return set()
    cov = covered_vertices(es)
    bnd = internal_boundary(cov)
    out = set()
    for x in bnd:
        for y in _neighbors(x):
            if y not in cov:
                e = canonical_edge(x, y)
                if e not in es:
                    out.add(e)
    return out


def _is_vertex(obj) -> bool:
    return isinstance(obj, tuple) and obj and all(
        isinstance(c, (int, np.integer)) for c in obj
    )


def _is_edge(obj) -> bool:
    return (
        isinstance(obj, tuple)
        and len(obj) == 2
        and _is_vertex(obj[0])
        and _is_vertex(obj[1])
    )


def lex_less(a, b) -> bool:
    """Strict lexicographic order, overloaded.

    Vertices compare coordinatewise at the first difference; edges compare
    (smaller endpoint, larger endpoint); finite sets of either kind compare by
    the subset clause first and otherwise by the first differing element of
    the sorted sequences.  On vertices and edges this is a strict total
    order; on sets it is the literal two-clause rule (a pre-order).
    """
    if _is_vertex(a) and _is_vertex(b):
        if len(a) != len(b):
            raise GeometryError("dimension mismatch")
        return tuple(a) < tuple(b)
    if _is_edge(a) and _is_edge(b):
        return canonical_edge(*a) < canonical_edge(*b)
    return _lex_less_set(a, b)


def _lex_less_set(a, b) -> bool:
    if isinstance(a, EdgeSet) or isinstance(b, EdgeSet) or _any_edge_member(a, b):
        sa = _as_edge_collection(a)
        sb = _as_edge_collection(b)
    else:
        sa = _as_vertex_set(a)
        sb = _as_vertex_set(b)
    if sa == sb:
        return False
    if sa <= sb:
        return True
    la, lb = sorted(sa), sorted(sb)
    for xa, xb in zip(la, lb):
        if xa != xb:
            return xa < xb
    # sb is a strict prefix of sa: not smaller
    return False


def _any_edge_member(a, b) -> bool:
    for coll in (a, b):
        if isinstance(coll, EdgeSet):
            return True
        for item in coll:
            return _is_edge(item)
    return False


def _pair_coords(obj) -> np.ndarray:
    if isinstance(obj, Box):
        return obj.all_coords()
    if isinstance(obj, EdgeSet):
        verts = covered_vertices(obj)
        if not verts:
            raise EmptySetError("edge set covers no vertices")
        return np.asarray(sorted(verts), dtype=np.int64)
    if _is_vertex(obj):
        return np.asarray([obj], dtype=np.int64)
    items = list(obj)
    if not items:
        raise EmptySetError("empty set has no distances")
    if _is_edge(items[0]):
        return np.asarray(sorted(covered_vertices(items)), dtype=np.int64)
    return np.asarray(sorted(_as_vertex_set(items)), dtype=np.int64)


def dist_linf(a, b) -> int:
    """min over pairs of the l-infinity distance; edge sets use V(.)."""
    ca, cb = _pair_coords(a), _pair_coords(b)
    diff = np.abs(ca[:, None, :] - cb[None, :, :]).max(axis=2)
    return int(diff.min())


def dist_l1(a, b) -> int:
    ca, cb = _pair_coords(a), _pair_coords(b)
    diff = np.abs(ca[:, None, :] - cb[None, :, :]).sum(axis=2)
    return int(diff.min())


def diam(obj) -> int:
    """max l-infinity distance over pairs; edge sets use covered vertices."""
    c = _pair_coords(obj)
    return int((c.max(axis=0) - c.min(axis=0)).max())


def star_adjacent(x, y, k0: int) -> bool:
    """True iff distinct coarse-grid vertices sit at l-infinity distance k0."""
    if k0 < 1:
        raise GeometryError("grid spacing must be >= 1")
    for v in (x, y):
        if any(int(c) % k0 != 0 for c in v):
            raise OffGridError(f"vertex {tuple(v)} is not on {k0}*Z^d")
    dist = max(abs(int(a) - int(b)) for a, b in zip(x, y))
    return dist == k0
