# pylint: skip-file
import math

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from frilab.fri_process import (
    DecoratedSample,
    FriSample,
    Paths,
    bond_open_probability,
    dump_lines,
    edge_absence_probability,
    line_to_path,
    padding_radius,
    parse_lines,
    path_intensity,
    path_to_line,
    sample_decorated,
    sample_fri,
    threshold,
    truncate,
)
from frilab.lattice import Box

import oracles


def test_path_intensity_pin():
    assert path_intensity(1.0, 1.0, 3) == pytest.approx(3.0)
    assert path_intensity(0.5, 3.0, 2) == pytest.approx(0.5)


@st.composite
def path_collections(draw):
    d = draw(st.integers(2, 3))
    n = draw(st.integers(0, 6))
    starts, lengths, dirs = [], [], []
    for _ in range(n):
        starts.append([draw(st.integers(-3, 3)) for _ in range(d)])
        codes = draw(st.lists(st.integers(0, 2 * d - 1), max_size=6))
        lengths.append(len(codes))
        dirs.extend(codes)
    return Paths(
        np.asarray(starts, np.int64).reshape(n, d),
        np.asarray(lengths, np.int64),
        np.asarray(dirs, np.uint8),
    )


def test_paths_validation():
    with pytest.raises(ValueError):
        Paths(np.zeros(3, np.int64), np.zeros(3, np.int64), np.empty(0, np.uint8))
    with pytest.raises(ValueError):
        Paths(np.zeros((2, 3), np.int64), np.zeros(3, np.int64), np.empty(0, np.uint8))
    with pytest.raises(ValueError):
        Paths(
            np.zeros((2, 3), np.int64),
            np.asarray([1, 0], np.int64),
            np.empty(0, np.uint8),
        )
    with pytest.raises(ValueError):
        Paths(
            np.zeros((1, 3), np.int64),
            np.asarray([-1], np.int64),
            np.empty(0, np.uint8),
        )
    with pytest.raises(ValueError):
        Paths.concat([])


@given(path_collections(), st.data())
def test_paths_select_matches_list_filtering(paths, data):
    mask = np.asarray(
        [data.draw(st.booleans()) for _ in range(len(paths))], dtype=bool
    )
    sel = paths.select(mask)
    kept = [i for i in range(len(paths)) if mask[i]]
    assert len(sel) == len(kept)
    for j, i in enumerate(kept):
        assert tuple(sel.starts[j]) == tuple(paths.starts[i])
        assert np.array_equal(sel.steps_of(j), paths.steps_of(i))
    # index-mask form selects the same collection
    sel2 = paths.select(np.asarray(kept, dtype=np.int64))
    assert np.array_equal(sel2.starts, sel.starts)
    assert np.array_equal(sel2.dirs, sel.dirs)


@given(path_collections(), path_collections())
def test_paths_concat_preserves_structure(a, b):
    if a.d != b.d:
        return
    both = Paths.concat([a, b])
    assert len(both) == len(a) + len(b)
    for i in range(len(a)):
        assert np.array_equal(both.steps_of(i), a.steps_of(i))
    for i in range(len(b)):
        assert np.array_equal(both.steps_of(len(a) + i), b.steps_of(i))


def test_threshold_validates_and_nests():
    rng = np.random.default_rng(12001)
    window = Box((0, 0, 0), 2)
    dec = sample_decorated(window, 1.0, 1.0, rng)
    with pytest.raises(ValueError):
        threshold(dec, -0.1)
    with pytest.raises(ValueError):
        threshold(dec, 1.5)
    assert len(threshold(dec, 0.0).paths) == 0
    assert len(threshold(dec, 1.0).paths) == len(dec.paths)
    grid = [0.1, 0.3, 0.55, 0.8, 1.0]
    sizes = [len(threshold(dec, u).paths) for u in grid]
    assert sizes == sorted(sizes)
    # kept paths at a lower level are a prefix-closed subset of higher levels
    lo = threshold(dec, 0.3)
    hi = threshold(dec, 0.8)
    lo_set = {
        (tuple(lo.paths.starts[i]), lo.paths.steps_of(i).tobytes())
        for i in range(len(lo.paths))
    }
    hi_set = {
        (tuple(hi.paths.starts[i]), hi.paths.steps_of(i).tobytes())
        for i in range(len(hi.paths))
    }
    assert lo_set <= hi_set


def test_decorated_labels_lie_in_interval():
    rng = np.random.default_rng(12002)
    window = Box((0, 0, 0), 1)
    dec = sample_decorated(window, 0.7, 1.0, rng)
    if len(dec.paths):
        assert dec.labels.min() > 0.0
        assert dec.labels.max() <= 0.7
    with pytest.raises(ValueError):
        sample_decorated(window, 0.0, 1.0, rng)
    with pytest.raises(ValueError):
        DecoratedSample(
            paths=dec.paths,
            labels=dec.labels[:-1] if len(dec.paths) else np.zeros(3),
            u_max=0.7,
            T=1.0,
            window=window,
            padding=dec.padding,
            intrusion_tol=1e-6,
        )


def test_padding_radius_is_minimal():
    window = Box((0, 0, 0), 2)
    u, T, tol = 1.0, 1.0, 1e-6
    p = padding_radius(window, u, T, tol)
    lam = path_intensity(u, T, 3)
    s = T / (T + 1.0)

    def tail(p0):
        total, k = 0.0, p0 + 1
        while True:
            term = lam * window.shell_vertex_count(k) * s**k
            total += term
            if term < 1e-20:
                return total
            k += 1

    assert tail(p) < tol
    assert p == 0 or tail(p - 1) >= tol
    assert padding_radius(window, 0.0, T, tol) == 0
    with pytest.raises(ValueError):
        padding_radius(window, u, T, 0.0)


def test_padding_radius_grows_as_tol_shrinks():
    window = Box((0, 0, 0), 2)
    p_loose = padding_radius(window, 1.0, 1.0, 1e-2)
    p_tight = padding_radius(window, 1.0, 1.0, 1e-8)
    assert p_loose <= p_tight


def test_none_thinning_window_counts_are_poisson():
    rng = np.random.default_rng(12003)
    window = Box((0, 0, 0), 3)
    u, T = 1.0, 1.0
    lam = path_intensity(u, T, 3)
    counts = []
    for _ in range(4):
        s = sample_fri(window, u, T, rng, thinning="none", padding=2)
        counts.append(s.start_counts())
    counts = np.concatenate(counts)
    n = counts.size
    kmax = int(counts.max())
    obs = np.bincount(counts, minlength=kmax + 1).astype(float)
    probs = np.asarray(
        [math.exp(-lam) * lam**k / math.factorial(k) for k in range(kmax + 1)]
    )
    probs[-1] += max(0.0, 1.0 - probs.sum())
    cm, pm = oracles.merge_tail_bins(obs, probs)
    assert oracles.chi2_pvalue(cm, pm * n) > 0.01


def test_shell_thinning_per_vertex_mean():
    rng = np.random.default_rng(12004)
    window = Box((0, 0, 0), 2)
    total, n_vertices = 0.0, 0
    for _ in range(200):
        s = sample_fri(window, 1.0, 1.0, rng)
        total += float(s.start_counts().sum())
        n_vertices += window.n_vertices
    mean = total / n_vertices
    sigma = math.sqrt(3.0 / n_vertices)
    assert abs(mean - 3.0) < 4.0 * sigma


def test_shell_and_none_routes_agree_on_edge_law():
    rng = np.random.default_rng(12005)
    # identical window-trace law at the same explicit padding
    window = Box((0, 0, 0), 2)
    u, T, pad, n = 0.6, 1.0, 2, 2000
    slot = window.edge_slot_of(((0, 0, 0), (1, 0, 0)))
    hits = {"shell": 0, "none": 0}
    for mode in ("shell", "none"):
        for _ in range(n):
            s = sample_fri(window, u, T, rng, thinning=mode, padding=pad)
            hits[mode] += bool(s.window_edges().mask[slot])
    z = oracles.two_sample_z(hits["shell"], n, hits["none"], n)
    assert abs(z) < 4.0


def test_sample_fri_validates_and_zero_intensity():
    rng = np.random.default_rng(12006)
    window = Box((0, 0, 0), 2)
    with pytest.raises(ValueError):
        sample_fri(window, -0.5, 1.0, rng)
    with pytest.raises(ValueError):
        sample_fri(window, 1.0, 1.0, rng, thinning="fancy")
    s = sample_fri(window, 0.0, 1.0, rng)
    assert len(s.paths) == 0
    assert len(s.window_edges()) == 0
    assert s.covered_vertex_ids().size == 0


def test_truncate_all_kinds():
    rng = np.random.default_rng(12007)
    window = Box((0, 0, 0), 2)
    s = sample_fri(window, 1.0, 1.0, rng)
    for L in (0, 1, 3):
        t = truncate(s, L)
        assert isinstance(t, FriSample)
        assert t.paths.lengths.size == 0 or int(t.paths.lengths.max()) <= L
    dec = sample_decorated(window, 1.0, 1.0, rng)
    td = truncate(dec, 2)
    assert isinstance(td, DecoratedSample)
    assert td.labels.shape == (len(td.paths),)
    assert td.paths.lengths.size == 0 or int(td.paths.lengths.max()) <= 2
    tp = truncate(dec.paths, 1)
    assert isinstance(tp, Paths)
    with pytest.raises(ValueError):
        truncate(s, -1)
    # nesting in L
    a = truncate(s, 1)
    b = truncate(s, 4)
    assert len(a.paths) <= len(b.paths)


def test_sample_fri_with_length_cap():
    rng = np.random.default_rng(12008)
    window = Box((0, 0, 0), 2)
    s = sample_fri(window, 1.0, 1.0, rng, L=2)
    assert s.padding <= 2
    assert s.paths.lengths.size == 0 or int(s.paths.lengths.max()) <= 2


def test_length_one_truncation_is_bernoulli_bond():
    for u, T, d in [(1.0, 1.0, 3), (0.3, 2.0, 3), (2.0, 0.5, 4)]:
        e = ((0,) * d, tuple(1 if i == 0 else 0 for i in range(d)))
        lo, hi = edge_absence_probability(e, u, T, d, L=1)
        assert lo == pytest.approx(hi, rel=1e-14)
        assert 1.0 - lo == pytest.approx(bond_open_probability(u, T, d), rel=1e-12)


def test_bond_open_probability_empirical():
    rng = np.random.default_rng(12009)
    window = Box((0, 0, 0), 1)
    u, T, n = 1.0, 1.0, 10_000
    slot = window.edge_slot_of(((0, 0, 0), (1, 0, 0)))
    hits = 0
    for _ in range(n):
        s = sample_fri(window, u, T, rng, L=1)
        hits += bool(s.window_edges().mask[slot])
    p = bond_open_probability(u, T, 3)
    sigma = oracles.binomial_sigma(p, n)
    assert abs(hits / n - p) < 3.5 * sigma


def test_edge_absence_enclosure_untruncated():
    e = ((0, 0, 0), (1, 0, 0))
    lo, hi = edge_absence_probability(e, 1.0, 1.0, 3, tail_tol=1e-8)
    assert 0.0 < lo <= hi < 1.0
    lam = path_intensity(1.0, 1.0, 3)
    slo, shi = oracles.enumerate_visit_sum(e, 1.0, 3, 8)
    assert lo <= math.exp(-lam * slo) and math.exp(-lam * shi) <= hi


def test_fri_sample_window_views():
    rng = np.random.default_rng(12010)
    window = Box((0, 0, 0), 2)
    s = sample_fri(window, 1.0, 1.0, rng)
    walk_ids, slots = s.edge_events()
    edges = s.window_edges()
    assert set(np.unique(slots).tolist()) == set(np.flatnonzero(edges.mask).tolist())
    covered = s.covered_vertex_ids()
    assert np.array_equal(covered, np.unique(covered))
    # brute recomputation from the raw paths
    expected = set()
    off = s.paths.offsets
    for i in range(len(s.paths)):
        verts = oracles.walk_vertices(
            tuple(s.paths.starts[i]), s.paths.dirs[off[i] : off[i + 1]]
        )
        for p in verts:
            if max(abs(c) for c in p) <= 2:
                expected.add(int(window.vertex_ids(np.asarray([p]))[0]))
    assert set(covered.tolist()) == expected
    assert s.params.T == 1.0 and s.params.d == 3


def test_serialization_pin():
    start, codes, label = line_to_path("0 0 0; +1 +1 -3; 0.25")
    assert start == (0, 0, 0)
    assert codes.tolist() == [0, 0, 5]
    assert label == 0.25
    assert path_to_line(start, codes, label) == "0 0 0; +1 +1 -3; 0.25"
    no_label = "1 -2; -2 +1"
    s2, c2, l2 = line_to_path(no_label)
    assert s2 == (1, -2) and c2.tolist() == [3, 0] and l2 is None


def test_serialization_rejects_malformed():
    with pytest.raises(ValueError):
        line_to_path("0 0 0")
    with pytest.raises(ValueError):
        line_to_path("0 0; +3; 1.0")  # axis beyond dimension
    with pytest.raises(ValueError):
        line_to_path("0 0; *1; 1.0")
    with pytest.raises(ValueError):
        parse_lines(["0 0; +1; 0.5", "0 0; +1"], d=2)
    with pytest.raises(ValueError):
        parse_lines(["0 0 0; +1"], d=2)


@given(path_collections(), st.booleans())
def test_serialization_round_trip(paths, with_labels):
    labels = (
        np.linspace(0.1, 0.9, len(paths)) if with_labels and len(paths) else None
    )
    lines = dump_lines(paths, labels)
    parsed, plabels = parse_lines(lines, paths.d)
    assert len(parsed) == len(paths)
    assert np.array_equal(parsed.starts, paths.starts)
    assert np.array_equal(parsed.lengths, paths.lengths)
    assert np.array_equal(parsed.dirs, paths.dirs)
    if labels is None:
        assert plabels is None
    else:
        assert np.allclose(plabels, labels)


def test_parse_lines_skips_blanks():
    paths, labels = parse_lines(["", "   ", "0 0; +1"], d=2)
    assert len(paths) == 1
    assert labels is None
    empty, lab = parse_lines([], d=3)
    assert len(empty) == 0 and lab is None
