# pylint: skip-file
import itertools

import numpy as np
import pytest
from hypothesis import given, assume, settings
import hypothesis.strategies as st

from frilab.lattice import (
    Box,
    EdgeSet,
    GeometryError,
    OffGridError,
    box_edges,
    box_vertices,
    canonical_edge,
    covered_vertices,
    diam,
    dist_l1,
    dist_linf,
    edge_boundary,
    internal_boundary,
    lex_less,
    outer_boundary,
    outer_edge_boundary,
    star_adjacent,
    unit_step,
)


@st.composite
def boxes(draw, min_d=1, max_d=3, max_radius=3):
    d = draw(st.integers(min_d, max_d))
    radius = draw(st.integers(0, max_radius))
    center = tuple(draw(st.integers(-4, 4)) for _ in range(d))
    return Box(center, radius)


@st.composite
def boxes_with_vid(draw):
    box = draw(boxes())
    vid = draw(st.integers(0, box.n_vertices - 1))
    return box, vid


@st.composite
def vertices(draw, d):
    return tuple(draw(st.integers(-6, 6)) for _ in range(d))


@st.composite
def vertex_sets(draw, max_d=3):
    d = draw(st.integers(1, max_d))
    return draw(st.sets(vertices(d), min_size=1, max_size=8))


def test_unit_step():
    assert unit_step(3, 0, 1) == (1, 0, 0)
    assert unit_step(3, 2, -1) == (0, 0, -1)


@given(boxes(), st.integers(0, 5), st.sampled_from([1, -1]))
def test_canonical_edge_orders_endpoints(box, axis, sign):
    assume(axis < box.d)
    x = box.center
    y = tuple(c + (sign if i == axis else 0) for i, c in enumerate(x))
    e = canonical_edge(x, y)
    assert e == canonical_edge(y, x)
    assert e[0] < e[1]
    assert sum(abs(a - b) for a, b in zip(*e)) == 1


def test_canonical_edge_rejects_non_neighbors():
    with pytest.raises(GeometryError):
        canonical_edge((0, 0), (1, 1))
    with pytest.raises(GeometryError):
        canonical_edge((0, 0), (0, 0))


def test_box_validation():
    with pytest.raises(GeometryError):
        Box((0, 0), -1)
    with pytest.raises(GeometryError):
        Box((), 1)


@given(boxes_with_vid())
def test_vertex_id_round_trip(box_vid):
    box, vid = box_vid
    coords = box.vertex_coords(np.asarray([vid]))
    assert bool(box.contains(coords)[0])
    assert int(box.vertex_ids(coords)[0]) == vid


@given(boxes())
def test_all_coords_consistent_with_ids(box):
    coords = box.all_coords()
    assert coords.shape == (box.n_vertices, box.d)
    ids = box.vertex_ids(coords)
    assert np.array_equal(ids, np.arange(box.n_vertices))
    assert np.array_equal(box.vertex_coords(ids), coords)


@given(boxes())
def test_edge_slot_mask_counts_real_edges(box):
    assert int(box.edge_slot_valid().sum()) == box.n_edges


@given(boxes())
def test_edge_slot_round_trip(box):
    slots = np.flatnonzero(box.edge_slot_valid())
    for slot in slots[:20]:
        e = box.edge_of_slot(int(slot))
        assert e == canonical_edge(*e)
        assert box.edge_slot_of(e) == int(slot)


def test_edge_slot_of_rejects_reversed():
    box = Box((0, 0), 2)
    with pytest.raises(GeometryError):
        box.edge_slot_of(((1, 0), (0, 0)))


@given(boxes())
def test_boundary_ids_are_the_outer_shell(box):
    coords = box.all_coords()
    linf = np.abs(coords - np.asarray(box.center)).max(axis=1)
    expected = np.flatnonzero(linf == box.radius)
    if box.radius == 0:
        expected = np.asarray([0])
    assert np.array_equal(box.boundary_vertex_ids(), expected)


@given(boxes(max_radius=2), st.integers(0, 2))
def test_shell_vertex_count_matches_enumeration(box, k):
    rr = box.radius + k
    span = range(-rr, rr + 1)
    brute = sum(
        1
        for p in itertools.product(span, repeat=box.d)
        if max(abs(c) for c in p) == rr
    )
    if rr == 0:
        brute = 1
    assert box.shell_vertex_count(k) == brute


def test_box_vertices_and_edges_small():
    box = Box((0, 0), 1)
    vs = box_vertices(box)
    assert len(vs) == 9
    es = box_edges(box)
    assert len(es) == 12
    for e in es:
        assert e[0] in vs and e[1] in vs


@st.composite
def edge_masks(draw):
    box = Box((0, 0), 2)
    n = box.n_edge_slots
    valid = box.edge_slot_valid()
    mask = np.zeros(n, dtype=bool)
    picks = draw(st.lists(st.integers(0, n - 1), max_size=12))
    for p in picks:
        if valid[p]:
            mask[p] = True
    return EdgeSet(box, mask)


@given(edge_masks(), edge_masks())
def test_edge_set_algebra_matches_python_sets(a, b):
    sa, sb = set(a), set(b)
    assert set(a.union(b)) == sa | sb
    assert set(a.difference(b)) == sa - sb
    assert set(a.intersection(b)) == sa & sb
    assert a.issubset(b) == (sa <= sb)
    assert len(a) == len(sa)


@given(edge_masks())
def test_edge_set_round_trip_and_contains(a):
    rebuilt = EdgeSet.from_edges(a.window, list(a))
    assert np.array_equal(rebuilt.mask, a.mask)
    for e in a:
        assert e in rebuilt
    assert ((10, 10), (10, 11)) not in a


def test_edge_set_window_mismatch_raises():
    a = EdgeSet.empty(Box((0, 0), 1))
    b = EdgeSet.empty(Box((0, 0), 2))
    with pytest.raises(GeometryError):
        a.union(b)


def test_edge_set_bad_mask_shape():
    with pytest.raises(GeometryError):
        EdgeSet(Box((0, 0), 1), np.zeros(5, dtype=bool))


def _neighbors(x):
    for axis in range(len(x)):
        for sign in (1, -1):
            y = list(x)
            y[axis] += sign
            yield tuple(y)


@given(vertex_sets())
def test_internal_boundary_matches_comprehension(A):
    expected = {x for x in A if any(y not in A for y in _neighbors(x))}
    assert internal_boundary(A) == expected


@given(vertex_sets())
def test_outer_boundary_matches_comprehension(A):
    expected = {
        y for x in A for y in _neighbors(x) if y not in A
    }
    assert outer_boundary(A) == expected


def test_boundaries_of_a_box():
    box = Box((0, 0), 2)
    assert internal_boundary(box) == {
        v for v in box_vertices(box) if max(abs(c) for c in v) == 2
    }
    assert all(
        max(abs(c) for c in v) == 3 for v in outer_boundary(box)
    )


def test_covered_vertices_and_edge_boundaries():
    e = canonical_edge((0, 0), (1, 0))
    assert covered_vertices([e]) == {(0, 0), (1, 0)}
    assert edge_boundary([e]) == {e}
    outer = outer_edge_boundary([e])
    assert e not in outer
    assert len(outer) == 6
    for a, b in outer:
        assert a in {(0, 0), (1, 0)} or b in {(0, 0), (1, 0)}


def test_edge_boundary_interior_edge_excluded():
    # a plus-shaped cluster: the central vertex is interior
    edges = [
        canonical_edge((0, 0), (1, 0)),
        canonical_edge((0, 0), (-1, 0)),
        canonical_edge((0, 0), (0, 1)),
        canonical_edge((0, 0), (0, -1)),
    ]
    assert edge_boundary(edges) == set()


@given(vertices(3), vertices(3))
def test_lex_less_vertices_is_tuple_order(a, b):
    assert lex_less(a, b) == (a < b)


def test_lex_less_edges_and_sets():
    e1 = canonical_edge((0, 0), (1, 0))
    e2 = canonical_edge((0, 1), (1, 1))
    assert lex_less(e1, e2)
    assert not lex_less(e2, e1)
    # subset clause beats element order
    assert lex_less({(5, 5)}, {(0, 0), (5, 5)})
    assert not lex_less({(1, 1)}, {(1, 1)})
    # otherwise the first differing sorted element decides
    assert lex_less({(0, 0), (5, 5)}, {(5, 5)})
    assert lex_less({(0, 0)}, {(1, 1)})
    assert not lex_less({(1, 1)}, {(0, 0)})


@given(vertex_sets(), vertex_sets())
def test_dist_and_diam_match_brute_force(A, B):
    assume(len(next(iter(A))) == len(next(iter(B))))
    la, lb = sorted(A), sorted(B)
    brute_linf = min(
        max(abs(p - q) for p, q in zip(x, y)) for x in la for y in lb
    )
    brute_l1 = min(
        sum(abs(p - q) for p, q in zip(x, y)) for x in la for y in lb
    )
    assert dist_linf(A, B) == brute_linf
    assert dist_l1(A, B) == brute_l1
    brute_diam = max(
        max(abs(p - q) for p, q in zip(x, y)) for x in la for y in la
    )
    assert diam(A) == brute_diam


def test_dist_accepts_boxes_and_edge_sets():
    box = Box((0, 0), 1)
    far = Box((5, 0), 1)
    assert dist_linf(box, far) == 3
    es = EdgeSet.from_edges(box, [canonical_edge((0, 0), (1, 0))])
    assert dist_linf(es, {(3, 0)}) == 2
    assert diam(es) == 1


def test_star_adjacent():
    assert star_adjacent((0, 0), (2, 2), 2)
    assert star_adjacent((0, 0), (0, 2), 2)
    assert not star_adjacent((0, 0), (4, 0), 2)
    assert not star_adjacent((0, 0), (0, 0), 2)
    with pytest.raises(OffGridError):
        star_adjacent((1, 0), (2, 0), 2)
    with pytest.raises(GeometryError):
        star_adjacent((0, 0), (2, 0), 0)
