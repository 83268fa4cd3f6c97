"""Lazy coding of the noisy truncated soup and its exploration algorithm.

The coding holds one walk bundle per vertex of B(R+L) and one Bernoulli
bit per edge of the radius-R edge box.  Every component draws from its own
counter-keyed substream identified by (master seed, prefix, kind, index,
epoch), so the full configuration is well defined before anything is
sampled and the sampling order cannot matter.  The exploration run reveals components lazily; the
full-reveal evaluation completes the same configuration and must agree.

The run picks a uniform radius j in {1..R}, seeds the frontier at the
sphere of radius j, and repeatedly decides the lexicographically smallest
undecided candidate edge: an edge covered by an already sampled bundle is
open outright; otherwise its noise bit is sampled, and a zero bit defers
the decision to the nearby bundles, sampled one per step in lex order.
The outcome is whether the origin joins the explored open set.
"""

from __future__ import annotations

import heapq
import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from . import clusters, kernels
from .lattice import Box, canonical_edge

V_KIND, E_KIND, J_KIND, V_EXT_KIND = 0, 1, 2, 3

_MASK64 = (1 << 64) - 1
_KEY_SALT = 0x9E3779B97F4A7C15

# vertices share raw blocks in groups of 64 (64 words each); edge bits in
# groups of 4096 (1 word each), so batch reveals fetch thousands of
# component draws per bit-generator construction
_VERTEX_GROUP_SHIFT = 6
_VERTEX_WORDS = 64
_EDGE_GROUP_SHIFT = 12
_GROUP_WORDS = 4096


def _stream_raw(seed, prefix, kind, index, epoch, k) -> np.ndarray:
    """First ``k`` raw 64-bit words of one component stream.

    The stream identity (prefix, kind, index, epoch) is packed into the
    upper words of a Philox counter, leaving the low word as draw space;
    distinct identities can never overlap because no stream draws 2^64
    values.  Counter-keyed construction is an order of magnitude cheaper
    than seed-sequence spawning, which dominates full-configuration
    reveals otherwise.
    """
    return _stream_bitgen(seed, prefix, kind, index, epoch).random_raw(k)


def _stream_bitgen(seed, prefix, kind, index, epoch) -> np.random.Philox:
    if not 0 <= index < (1 << 32) or not 0 <= epoch < (1 << 24):
        raise ValueError("component index or epoch out of packing range")
    parts = tuple(int(p) & _MASK64 for p in prefix)
    if len(parts) > 2:
        folded = parts[1]
        for p in parts[2:]:
            folded = (folded * 0x100000001B3 + p + 1) & _MASK64
        parts = (parts[0], folded)
    p0 = parts[0] if parts else 0
    p1 = parts[1] if len(parts) > 1 else 0
    tail = (int(kind) << 56) | (int(index) << 24) | int(epoch)
    return np.random.Philox(
        counter=[0, p0, p1, tail], key=[int(seed) & _MASK64, _KEY_SALT]
    )


def _u01(words: np.ndarray) -> np.ndarray:
    """Uniforms in [0, 1) from raw 64-bit words (53-bit mantissa)."""
    return (words >> np.uint64(11)).astype(np.float64) * 2.0**-53


def _poisson_cdf(lam: float) -> np.ndarray:
    """Cumulative table for inversion sampling; the final entry is forced
    to 1 so every uniform lands inside.  The loop stops once the running
    term drops below 1e-20 past the mode, so the truncated tail mass stays
    under 1e-18 for every mean the 10_000-entry guard admits."""
    if lam < 0:
        raise ValueError("lam must be >= 0")
    pmf = math.exp(-lam)
    cdf = [pmf]
    k = 0
    while k < lam or pmf > 1e-20:
        k += 1
        pmf *= lam / k
        cdf.append(cdf[-1] + pmf)
        if k > 10_000:
            raise ValueError("poisson mean too large for the table")
    arr = np.asarray(cdf, dtype=np.float64)
    arr[-1] = 1.0
    return arr


def _geometric_lengths(u: np.ndarray, log_s: float) -> np.ndarray:
    """Walk lengths (number of completed steps) by inversion: P[len = k]
    equals s^k (1 - s)."""
    if u.size == 0:
        return np.zeros(0, dtype=np.int64)
    return np.floor(np.log1p(-u) / log_s).astype(np.int64)


def _dir_codes(u: np.ndarray, d: int) -> np.ndarray:
    codes = (u * (2 * d)).astype(np.int64)
    return np.minimum(codes, 2 * d - 1).astype(np.uint8)


def _ragged_cols(counts: np.ndarray) -> np.ndarray:
    """Concatenated ``0..c-1`` ranges, one per entry of ``counts``."""
    total = int(counts.sum())
    starts = np.cumsum(counts) - counts
    return np.arange(total, dtype=np.int64) - np.repeat(starts, counts)


def _ragged_cols_from(walk_rows, walk_lengths, base) -> np.ndarray:
    """Word columns of every step of every kept walk.

    Walks are grouped by row (non-decreasing ``walk_rows``); within a row
    their step words sit consecutively starting at that row's ``base``
    column, in walk order.
    """
    cs = np.cumsum(walk_lengths) - walk_lengths
    if walk_rows.size:
        first = np.flatnonzero(np.r_[True, walk_rows[1:] != walk_rows[:-1]])
        reps = np.diff(np.r_[first, walk_rows.size])
        row_offset = np.repeat(cs[first], reps)
    else:
        row_offset = cs
    walk_start = base + (cs - row_offset)
    return np.repeat(walk_start, walk_lengths) + _ragged_cols(walk_lengths)


def _group_bundle_slots(m, walk_rows, starts, lengths, codes, window) -> list:
    """Per-row sorted unique edge slots from a flat batch of walks."""
    empty = np.empty(0, dtype=np.int64)
    out = [empty] * m
    if walk_rows.size == 0:
        return out
    widx, slots = kernels.walk_edge_events(
        starts, lengths, codes,
        window._center_arr, window.radius, window._strides,
    )
    if slots.size == 0:
        return out
    rows = walk_rows[widx]
    order = np.lexsort((slots, rows))
    rows = rows[order]
    slots = slots[order]
    fresh = np.r_[True, (rows[1:] != rows[:-1]) | (slots[1:] != slots[:-1])]
    rows = rows[fresh]
    slots = slots[fresh]
    bounds = np.flatnonzero(np.r_[True, rows[1:] != rows[:-1]])
    pieces = np.split(slots, bounds[1:])
    for r, arr in zip(rows[bounds].tolist(), pieces):
        out[r] = arr
    return out


def _replacement_bundles(rng, coords, cdf, log_s, L, d, window) -> list:
    """Fresh bundles for every vertex at once from a trial-local stream.

    Draw order is fixed: one count uniform per vertex, then every length
    uniform, then every step uniform of the kept (length <= L) walks.
    """
    m = coords.shape[0]
    counts = np.searchsorted(cdf, rng.random(m), side="right")
    counts = counts.astype(np.int64)
    row_of_walk = np.repeat(np.arange(m, dtype=np.int64), counts)
    lengths = _geometric_lengths(rng.random(row_of_walk.size), log_s)
    keep = lengths <= L
    walk_rows = row_of_walk[keep]
    walk_lengths = lengths[keep]
    codes = _dir_codes(rng.random(int(walk_lengths.sum())), d)
    starts = coords[walk_rows]
    return _group_bundle_slots(
        m, walk_rows, starts, walk_lengths, codes, window
    )


def _labels_connect(add, labels, eu, ev, orig_lbl, sphere_set) -> bool:
    """Whether opening the ``add`` slots joins the origin's base component
    to a sphere component; exact because additions only merge components.

    Union-find over component labels, with every sphere component
    collapsed onto one token.
    """
    par: dict = {}

    def find(x):
        root = x
        while root in par:
            root = par[root]
        while x != root:
            par[x], x = root, par[x]
        return root

    for s in add.tolist():
        a = int(labels[eu[s]])
        b = int(labels[ev[s]])
        if a in sphere_set:
            a = -2
        if b in sphere_set:
            b = -2
        ra, rb = find(a), find(b)
        if ra != rb:
            par[ra] = rb
    return find(orig_lbl) == find(-2)


class Coding:
    """Per-component lazily sampled randomness for one noisy-soup trial."""

    def __init__(self, d, R, L, u, T, eps, seed, prefix=()):
        if R < 1 or L < 1:
            raise ValueError("R and L must be >= 1")
        if not 0.0 <= eps <= 1.0:
            raise ValueError("eps must lie in [0, 1]")
        if u < 0 or T <= 0:
            raise ValueError("u must be >= 0 and T > 0")
        self.d = int(d)
        self.R = int(R)
        self.L = int(L)
        self.u = float(u)
        self.T = float(T)
        self.eps = float(eps)
        self.seed = int(seed)
        self.prefix = tuple(int(p) for p in prefix)
        self.v_window = Box((0,) * d, R + L)
        self.e_window = Box((0,) * d, R)
        w = self.e_window
        self._bundle_slots: dict = {}
        self._epochs: dict = {}
        # reference count of sampled bundles covering each edge slot
        self._cover = np.zeros(w.n_edge_slots, dtype=np.int32)
        self._bits = np.zeros(w.n_edge_slots, dtype=bool)
        self._bits_sampled = np.zeros(w.n_edge_slots, dtype=bool)
        self._valid = w.edge_slot_valid()
        valid_slots = np.flatnonzero(self._valid)
        eu, ev = w.edge_slot_endpoints(valid_slots)
        self._eu = np.full(w.n_edge_slots, -1, dtype=np.int64)
        self._ev = np.full(w.n_edge_slots, -1, dtype=np.int64)
        self._eu[valid_slots] = eu
        self._ev[valid_slots] = ev
        self._coords = w.all_coords()
        self._linf = np.abs(self._coords).max(axis=1)
        self._origin = int(w.vertex_ids(np.zeros((1, d), dtype=np.int64))[0])
        self._xi_cache: dict = {}
        self._lam = 2.0 * self.d * self.u / (self.T + 1.0)
        self._cdf = _poisson_cdf(self._lam)
        self._log_s = math.log(self.T / (self.T + 1.0))
        self._v_coords = self.v_window.all_coords()
        # epoch-0 word blocks and derived bundles, shared verbatim by the
        # lazy per-component path and the batched reveal
        self._group_cache: dict = {}
        self._bundle_table: list | None = None

    def _group_words(self, kind: int, group: int) -> np.ndarray:
        key = (kind, group)
        words = self._group_cache.get(key)
        if words is None:
            words = _stream_raw(
                self.seed, self.prefix, kind, group, 0, _GROUP_WORDS
            )
            self._group_cache[key] = words
        return words

    def _ensure_bundle_table(self) -> list:
        if self._bundle_table is None:
            self._bundle_table = self._bundles_batch(
                np.arange(self.v_window.n_vertices, dtype=np.int64)
            )
        return self._bundle_table

    # -- component addressing

    def vertex_id(self, x) -> int:
        return int(self.v_window.vertex_ids(np.asarray([x], dtype=np.int64))[0])

    def edge_slot(self, e) -> int:
        return self.e_window.edge_slot_of(canonical_edge(*e))

    def _next_epoch(self, kind, index) -> int:
        k = (kind, index)
        epoch = self._epochs.get(k, 0)
        self._epochs[k] = epoch + 1
        return epoch

    # -- sampling

    def _vertex_words(self, vid: int, epoch: int, k: int) -> np.ndarray:
        """First k positional words of one vertex component: the shared
        group block holds the first 64, an extension stream the rest."""
        group = vid >> _VERTEX_GROUP_SHIFT
        offset = (vid & (_VERTEX_WORDS - 1)) * _VERTEX_WORDS
        if epoch == 0:
            base = self._group_words(V_KIND, group)[
                offset : offset + min(k, _VERTEX_WORDS)
            ]
        else:
            base = _stream_raw(
                self.seed, self.prefix, V_KIND, group, epoch,
                offset + min(k, _VERTEX_WORDS),
            )[offset:]
        if k <= _VERTEX_WORDS:
            return base[:k]
        ext = _stream_raw(
            self.seed, self.prefix, V_EXT_KIND, vid, epoch, k - _VERTEX_WORDS
        )
        return np.concatenate((base, ext))

    def _bundle_of_vertex(self, vid: int, epoch: int) -> np.ndarray:
        """Edge slots (radius-R window) covered by one vertex's killed
        walks, keeping only lengths <= L; single-component twin of the
        batched reveal, reading the same positional words."""
        words = self._vertex_words(vid, epoch, _VERTEX_WORDS)
        n = int(np.searchsorted(self._cdf, _u01(words[:1]), side="right")[0])
        if n == 0:
            return np.empty(0, dtype=np.int64)
        if 1 + n > words.size:
            words = self._vertex_words(vid, epoch, 1 + n)
        lengths = _geometric_lengths(_u01(words[1 : 1 + n]), self._log_s)
        lengths = lengths[lengths <= self.L]
        total = int(lengths.sum())
        if total == 0:
            return np.empty(0, dtype=np.int64)
        if 1 + n + total > words.size:
            words = self._vertex_words(vid, epoch, 1 + n + total)
        dirs = _dir_codes(_u01(words[1 + n : 1 + n + total]), self.d)
        x = self._v_coords[vid]
        starts = np.tile(np.asarray(x, dtype=np.int64), (lengths.size, 1))
        _, slots = kernels.walk_edge_events(
            starts, lengths, dirs,
            self.e_window._center_arr, self.e_window.radius,
            self.e_window._strides,
        )
        return np.unique(slots)

    def _bundles_batch(self, vids: np.ndarray) -> list:
        """Fresh epoch-0 bundles for many vertices at once; the group
        blocks supply all positional words in a few raw fetches and the
        walk transforms run vectorized across every vertex."""
        m = vids.size
        words = np.empty((m, _VERTEX_WORDS), dtype=np.uint64)
        groups = vids >> _VERTEX_GROUP_SHIFT
        offsets = (vids & (_VERTEX_WORDS - 1)) * _VERTEX_WORDS
        span = np.arange(_VERTEX_WORDS, dtype=np.int64)
        for g in np.unique(groups):
            rows = np.flatnonzero(groups == g)
            raw = self._group_words(V_KIND, int(g))
            words[rows] = raw[offsets[rows, None] + span[None, :]]
        counts = np.searchsorted(self._cdf, _u01(words[:, 0]), side="right")
        counts = counts.astype(np.int64)

        row_of_walk = np.repeat(np.arange(m, dtype=np.int64), counts)
        col_of_walk = _ragged_cols(counts) + 1
        plain = col_of_walk < _VERTEX_WORDS
        lengths = np.zeros(row_of_walk.size, dtype=np.int64)
        lengths[plain] = _geometric_lengths(
            _u01(words[row_of_walk[plain], col_of_walk[plain]]), self._log_s
        )
        keep = (lengths <= self.L) & plain
        kept_lengths = lengths[keep]
        kept_rows = row_of_walk[keep]
        per_row_total = np.bincount(kept_rows, kept_lengths, minlength=m)
        per_row_total = per_row_total.astype(np.int64)
        needed = 1 + counts + per_row_total
        overflow = np.flatnonzero(
            (needed > _VERTEX_WORDS) | (counts + 1 > _VERTEX_WORDS)
        )
        simple = np.ones(m, dtype=bool)
        simple[overflow] = False

        sel = simple[kept_rows]
        walk_rows = kept_rows[sel]
        walk_lengths = kept_lengths[sel]
        dir_col = _ragged_cols_from(
            walk_rows, walk_lengths, (1 + counts)[walk_rows]
        )
        dir_u = _u01(words[np.repeat(walk_rows, walk_lengths), dir_col])
        codes = _dir_codes(dir_u, self.d)
        starts = self._v_coords[vids[walk_rows]]
        out = _group_bundle_slots(
            m, walk_rows, starts, walk_lengths, codes, self.e_window
        )
        for r in overflow:
            out[r] = self._bundle_of_vertex(int(vids[r]), 0)
        return out

    def bundle_slots(self, vid: int) -> np.ndarray:
        if vid not in self._bundle_slots:
            epoch = self._next_epoch(V_KIND, vid)
            if epoch == 0 and self._bundle_table is not None:
                slots = self._bundle_table[vid]
            else:
                slots = self._bundle_of_vertex(vid, epoch)
            self._bundle_slots[vid] = slots
            self._cover[slots] += 1
        return self._bundle_slots[vid]

    def vertex_sampled(self, vid: int) -> bool:
        return vid in self._bundle_slots

    def _edge_uniform(self, slot: int, epoch: int) -> float:
        group = slot >> _EDGE_GROUP_SHIFT
        col = slot & ((1 << _EDGE_GROUP_SHIFT) - 1)
        if epoch == 0:
            word = self._group_words(E_KIND, group)[col]
        else:
            word = _stream_raw(
                self.seed, self.prefix, E_KIND, group, epoch, col + 1
            )[-1]
        return float(_u01(np.asarray([word], dtype=np.uint64))[0])

    def edge_bit(self, slot: int) -> bool:
        if not self._bits_sampled[slot]:
            epoch = self._next_epoch(E_KIND, slot)
            self._bits[slot] = self._edge_uniform(slot, epoch) < self.eps
            self._bits_sampled[slot] = True
        return bool(self._bits[slot])

    def edge_sampled(self, slot: int) -> bool:
        return bool(self._bits_sampled[slot])

    # -- replacement (influence estimates); set/restore keep every other
    # component untouched

    def set_vertex(self, vid: int, slots: np.ndarray) -> np.ndarray:
        old = self._bundle_slots[vid]
        self._cover[old] -= 1
        self._bundle_slots[vid] = slots
        self._cover[slots] += 1
        return old

    def set_edge(self, slot: int, bit: bool) -> bool:
        old = bool(self._bits[slot])
        self._bits[slot] = bit
        self._bits_sampled[slot] = True
        return old

    def resample_vertex(self, x) -> None:
        """Replace one bundle with an independent copy from its next
        epoch; a vertex outside the coding domain is a no-op."""
        coord = np.asarray([x], dtype=np.int64)
        if not bool(self.v_window.contains(coord)[0]):
            return
        vid = self.vertex_id(x)
        self.bundle_slots(vid)
        epoch = self._next_epoch(V_KIND, vid)
        self.set_vertex(vid, self._bundle_of_vertex(vid, epoch))

    def resample_edge(self, e) -> None:
        a, b = canonical_edge(*e)
        pts = np.asarray([a, b], dtype=np.int64)
        if not bool(self.e_window.contains(pts).all()):
            return
        slot = self.edge_slot(e)
        self.edge_bit(slot)
        epoch = self._next_epoch(E_KIND, slot)
        self.set_edge(slot, self._edge_uniform(slot, epoch) < self.eps)

    @classmethod
    def from_spec(cls, spec: dict, seed: int) -> "Coding":
        return cls(
            d=spec["d"], R=spec["R"], L=spec["L"], u=spec["u"],
            T=spec["T"], eps=spec["eps"], seed=seed,
        )

    # -- assembled configuration

    def reveal_all(self) -> None:
        missing = [
            v for v in range(self.v_window.n_vertices)
            if v not in self._bundle_slots
        ]
        if missing:
            # unsampled components have never advanced their epoch, so
            # their table entries are epoch-0 draws and the accounting
            # jumps straight to 1
            table = self._ensure_bundle_table()
            bundles = [table[v] for v in missing]
            self._bundle_slots.update(zip(missing, bundles))
            self._epochs.update(((V_KIND, v), 1) for v in missing)
            flat = np.concatenate(bundles)
            self._cover += np.bincount(
                flat, minlength=self._cover.size
            ).astype(self._cover.dtype)
        slots = np.flatnonzero(self._valid & ~self._bits_sampled)
        if slots.size:
            groups = slots >> _EDGE_GROUP_SHIFT
            cols = slots & ((1 << _EDGE_GROUP_SHIFT) - 1)
            for g in np.unique(groups):
                rows = np.flatnonzero(groups == g)
                raw = self._group_words(E_KIND, int(g))
                self._bits[slots[rows]] = _u01(raw[cols[rows]]) < self.eps
            self._epochs.update(((E_KIND, s), 1) for s in slots.tolist())
            self._bits_sampled[slots] = True

    def open_slot_mask(self) -> np.ndarray:
        """Openness over radius-R edge slots given everything sampled so
        far; unsampled components count as absent."""
        return ((self._cover > 0) | (self._bits & self._bits_sampled)) \
            & self._valid

    def _xi_parts(self, r: int):
        if r not in self._xi_cache:
            inside = self._valid.copy()
            ok = (self._linf[self._eu] <= r) & (self._linf[self._ev] <= r)
            inside &= ok
            dst = clusters._shell_window_ids(
                self.e_window, self.e_window.center, r
            )
            self._xi_cache[r] = (inside, dst)
        return self._xi_cache[r]

    def xi(self, radius: int | None = None) -> bool:
        """Whether the origin joins the radius sphere through open edges,
        evaluated inside the radius box."""
        r = self.R if radius is None else int(radius)
        if r < 1 or r > self.R:
            raise ValueError("radius must lie in 1..R")
        inside, dst = self._xi_parts(r)
        open_slots = np.flatnonzero(self.open_slot_mask() & inside)
        return kernels.connected_in(
            self.e_window.n_vertices,
            self._eu[open_slots],
            self._ev[open_slots],
            np.asarray([self._origin]),
            dst,
        )


def full_indicator(coding: Coding, radius: int | None = None) -> bool:
    """Direct evaluation on the fully revealed configuration."""
    coding.reveal_all()
    return coding.xi(radius)


# ---------------------------------------------------------------------------
# exploration run


@dataclass(frozen=True)
class RunTrace:
    """Record of one exploration run: enough to replay it without rng."""

    j: int
    decisions: tuple
    outcome: bool
    revealed_vertices: tuple
    revealed_edges: tuple
    undecided_edges: tuple
    sampled_points: tuple
    open_edges: tuple

    def dump_lines(self) -> list:
        head = {"j": self.j, "outcome": int(self.outcome)}
        lines = [json.dumps(head)]
        for t, case, edge, vertex, value in self.decisions:
            lines.append(json.dumps({
                "t": t, "case": case, "edge": edge, "vertex": vertex,
                "value": value,
            }))
        return lines


def _l1_ball_offsets(d: int, radius: int) -> np.ndarray:
    pts = [
        p for p in itertools.product(range(-radius, radius + 1), repeat=d)
        if sum(abs(c) for c in p) <= radius
    ]
    return np.asarray(pts, dtype=np.int64)


def _edge_as_pair(window: Box, slot: int):
    eu, ev = window.edge_slot_endpoints(np.asarray([slot]))
    a = tuple(int(c) for c in window.vertex_coords(eu)[0])
    b = tuple(int(c) for c in window.vertex_coords(ev)[0])
    return (a, b)


def run_algorithm_T(
    R: int, L: int, eps: float, u: float, T: float, seed: int, *,
    d: int = 3, prefix=(), coding: Coding | None = None,
) -> RunTrace:
    """One exploration run over a fresh (or supplied) coding.

    Decides candidate edges (undecided edges of the radius-j box touching
    the explored open set or the radius-j sphere) in lex order until no
    candidate remains; asserts that no component is sampled twice and that
    the step count stays within its a-priori bound.
    """
    if coding is None:
        coding = Coding(d, R, L, u, T, eps, seed, prefix=prefix)
    w = coding.e_window
    j_word = _stream_raw(coding.seed, coding.prefix, J_KIND, 0, 0, 1)
    j = 1 + int(_u01(j_word)[0] * R)

    eu_all, ev_all = coding._eu, coding._ev
    linf = coding._linf
    all_slots = np.flatnonzero(coding._valid)

    # edges of the radius-j box: both endpoints inside B(j)
    in_box = np.zeros(w.n_edge_slots, dtype=bool)
    in_box[all_slots] = (linf[eu_all[all_slots]] <= j) \
        & (linf[ev_all[all_slots]] <= j)

    sel = np.flatnonzero(in_box)
    ends = np.concatenate((eu_all[sel], ev_all[sel]))
    twice = np.concatenate((sel, sel))
    order = np.argsort(ends, kind="stable")
    ends_s = ends[order]
    bounds = np.flatnonzero(np.r_[True, ends_s[1:] != ends_s[:-1]])
    incident = [()] * w.n_vertices
    for v, piece in zip(
        ends_s[bounds].tolist(), np.split(twice[order], bounds[1:])
    ):
        incident[v] = piece.tolist()

    undecided = in_box.copy()
    active = np.zeros(w.n_vertices, dtype=bool)
    active[linf == j] = True

    heap = []
    queued = np.zeros(w.n_edge_slots, dtype=bool)

    def push_incident(vid):
        for s in incident[vid]:
            if undecided[s] and not queued[s]:
                queued[s] = True
                heapq.heappush(heap, s)

    for vid in np.flatnonzero(active):
        push_incident(int(vid))

    # vertices within walk reach of each candidate edge, in vertex-id
    # (= lexicographic) order; id order makes the smallest-point rule a
    # first-hit scan
    ball = _l1_ball_offsets(d, L - 1)
    a = coding._coords[eu_all[sel]]
    b = coding._coords[ev_all[sel]]
    pts = np.concatenate(
        (a[:, None, :] + ball[None, :, :], b[:, None, :] + ball[None, :, :]),
        axis=1,
    )
    nb_lists = np.sort(
        coding.v_window.vertex_ids(pts.reshape(-1, d)).reshape(sel.size, -1),
        axis=1,
    ).tolist()
    slot_row = np.full(w.n_edge_slots, -1, dtype=np.int64)
    slot_row[sel] = np.arange(sel.size, dtype=np.int64)
    coding._ensure_bundle_table()

    sampled_points: set = set()
    open_slots: list = []
    decisions: list = []
    revealed_edges: list = []
    t = 0
    step_cap = 3 * int(sel.size) + coding.v_window.n_vertices + 5

    def nearby_unsampled(slot):
        out = []
        prev = -1
        for v in nb_lists[slot_row[slot]]:
            if v != prev:
                prev = v
                if v not in sampled_points:
                    out.append(v)
        return out

    def mark_open(slot):
        undecided[slot] = False
        open_slots.append(slot)
        for vid in (int(eu_all[slot]), int(ev_all[slot])):
            active[vid] = True
            push_incident(vid)

    while heap:
        slot = heap[0]
        if not undecided[slot]:
            heapq.heappop(heap)
            continue
        t += 1
        assert t <= step_cap, "exploration failed to make progress"
        covered = bool(coding._cover[slot] > 0)
        if not coding.edge_sampled(slot):
            if covered:
                decisions.append((t, "A1", slot, None, 1))
                mark_open(slot)
            else:
                bit = coding.edge_bit(slot)
                revealed_edges.append(slot)
                if bit:
                    decisions.append((t, "A2-open", slot, None, 1))
                    mark_open(slot)
                elif not nearby_unsampled(slot):
                    decisions.append((t, "A2-closed", slot, None, 0))
                    undecided[slot] = False
                else:
                    decisions.append((t, "A2-defer", slot, None, 0))
        else:
            candidates = nearby_unsampled(slot)
            assert candidates, "revisit with no unsampled bundle nearby"
            x_vid = candidates[0]
            assert not coding.vertex_sampled(x_vid), "bundle sampled twice"
            bundle = coding.bundle_slots(x_vid)
            sampled_points.add(x_vid)
            covers = bool(np.isin(slot, bundle))
            if len(candidates) > 1:
                case = "B1-open" if covers else "B1-miss"
            else:
                case = "B2-open" if covers else "B2-closed"
            decisions.append((t, case, slot, x_vid, int(covers)))
            if covers:
                mark_open(slot)
            elif len(candidates) == 1:
                undecided[slot] = False

    touched = np.zeros(w.n_vertices, dtype=bool)
    for s in open_slots:
        touched[eu_all[s]] = True
        touched[ev_all[s]] = True
    outcome = bool(touched[coding._origin])

    # slot and vertex ids become coordinate tuples in one vectorized pass
    undecided_slots = np.flatnonzero(undecided).tolist()
    need = sorted(
        {dec[2] for dec in decisions}
        | set(open_slots) | set(revealed_edges) | set(undecided_slots)
    )
    need_arr = np.asarray(need, dtype=np.int64)
    cu = coding._coords[eu_all[need_arr]].tolist() if need else []
    cv = coding._coords[ev_all[need_arr]].tolist() if need else []
    pair_of = {
        s: (tuple(pa), tuple(pb)) for s, pa, pb in zip(need, cu, cv)
    }
    vids_sorted = sorted(sampled_points)
    vert_coords = coding.v_window.vertex_coords(
        np.asarray(vids_sorted, dtype=np.int64)
    ).tolist() if vids_sorted else []
    coord_of = {v: tuple(p) for v, p in zip(vids_sorted, vert_coords)}
    points = tuple(coord_of[v] for v in vids_sorted)
    return RunTrace(
        j=j,
        decisions=tuple(
            (t_, case, pair_of[s], None if x is None else coord_of[x], val)
            for (t_, case, s, x, val) in decisions
        ),
        outcome=outcome,
        revealed_vertices=points,
        revealed_edges=tuple(
            pair_of[s] for s in sorted(revealed_edges)
        ),
        undecided_edges=tuple(pair_of[s] for s in undecided_slots),
        sampled_points=points,
        open_edges=tuple(pair_of[s] for s in sorted(open_slots)),
    )


def replay_trace(lines_or_trace, *, d: int = 3) -> dict:
    """Re-run the induction from recorded decisions, without randomness.

    Returns the reconstructed outcome and final open set; raises if the
    record is internally inconsistent (wrong case ordering).
    """
    if isinstance(lines_or_trace, RunTrace):
        lines = lines_or_trace.dump_lines()
    else:
        lines = list(lines_or_trace)
    head = json.loads(lines[0])
    j = head["j"]
    open_edges = []
    closed = set()
    bits_sampled = set()
    points = set()
    for line in lines[1:]:
        rec = json.loads(line)
        edge = tuple(tuple(p) for p in rec["edge"])
        case = rec["case"]
        if case == "A1":
            open_edges.append(edge)
        elif case == "A2-open":
            if edge in bits_sampled:
                raise ValueError("bit sampled twice")
            bits_sampled.add(edge)
            open_edges.append(edge)
        elif case == "A2-closed":
            bits_sampled.add(edge)
            closed.add(edge)
        elif case == "A2-defer":
            bits_sampled.add(edge)
        elif case in ("B1-open", "B2-open"):
            points.add(tuple(rec["vertex"]))
            open_edges.append(edge)
        elif case == "B1-miss":
            points.add(tuple(rec["vertex"]))
        elif case == "B2-closed":
            points.add(tuple(rec["vertex"]))
            closed.add(edge)
        else:
            raise ValueError(f"unknown case {case}")
    touched = set()
    for a, b in open_edges:
        touched.add(a)
        touched.add(b)
    outcome = (0,) * d in touched
    return {
        "j": j,
        "outcome": outcome,
        "open_edges": tuple(open_edges),
        "sampled_points": tuple(sorted(points)),
    }


# ---------------------------------------------------------------------------
# revealment and the variance inequality


def revealment(
    R: int, L: int, eps: float, u: float, T: float, trials: int, seed: int,
    *, d: int = 3,
) -> tuple:
    """Per-component sampling frequencies over exploration runs."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    probe = Coding(d, R, L, u=u, T=T, eps=eps, seed=0)
    v_counts = np.zeros(probe.v_window.n_vertices, dtype=np.int64)
    e_counts = np.zeros(probe.e_window.n_edge_slots, dtype=np.int64)
    for i in range(trials):
        coding = Coding(d, R, L, u=u, T=T, eps=eps, seed=seed, prefix=(i,))
        trace = run_algorithm_T(
            R, L, eps, u, T, seed, d=d, coding=coding
        )
        if trace.revealed_vertices:
            vids = probe.v_window.vertex_ids(
                np.asarray(trace.revealed_vertices, dtype=np.int64)
            )
            v_counts[vids] += 1
        for e in trace.revealed_edges:
            e_counts[probe.e_window.edge_slot_of(canonical_edge(*e))] += 1
    v_coords = probe.v_window.all_coords()
    rho_v = {
        tuple(int(c) for c in v_coords[vid]): v_counts[vid] / trials
        for vid in range(probe.v_window.n_vertices)
    }
    rho_e = {}
    for slot in np.flatnonzero(probe.e_window.edge_slot_valid()):
        rho_e[_edge_as_pair(probe.e_window, int(slot))] = (
            e_counts[slot] / trials
        )
    return rho_v, rho_e


def gamma_theta(
    R: int, L: int, eps: float, u: float, T: float, radii, trials: int,
    seed: int, *, d: int = 3, tag: int = 90, start: int = 0,
) -> dict:
    """Origin-to-sphere frequencies of the noisy soup at several radii,
    from full configurations."""
    radii = [int(r) for r in radii]
    counts = {r: 0 for r in radii}
    for i in range(start, start + trials):
        coding = Coding(d, R, L, u=u, T=T, eps=eps, seed=seed, prefix=(tag, i))
        coding.reveal_all()
        for r in radii:
            if coding.xi(r):
                counts[r] += 1
    return {r: counts[r] / trials for r in radii}


def osss_check(
    R: int, L: int, eps: float, u: float, T: float, trials: int, seed: int,
    *, d: int = 3, influence_trials: int | None = None,
) -> dict:
    """Empirical check that the outcome variance is bounded by the
    revealment-weighted influence sum, within three combined sigma.

    Revealment comes from exploration runs, influence from full
    configurations with one component replaced at a time (replacements
    draw from a trial-local stream).  A flip is decided without touching
    the configuration: additions only merge the base components, so a
    label-level union settles them, and connectivity is re-solved only
    when a removal strips an edge from the origin's component.
    """
    if R > 6 or L > 2:
        raise ValueError("instance too large for the joint Monte Carlo")
    n_inf = trials if influence_trials is None else int(influence_trials)

    rho_v, rho_e = revealment(R, L, eps, u, T, trials, seed, d=d)

    probe = Coding(d, R, L, u=u, T=T, eps=eps, seed=0)
    n_v = probe.v_window.n_vertices
    v_coords_all = probe.v_window.all_coords()
    valid_slots = np.flatnonzero(probe.e_window.edge_slot_valid())
    flip_v = np.zeros(n_v, dtype=np.int64)
    flip_e = np.zeros(probe.e_window.n_edge_slots, dtype=np.int64)
    theta_successes = 0
    origin_arr = np.asarray([probe._origin])
    for i in range(n_inf):
        coding = Coding(d, R, L, u=u, T=T, eps=eps, seed=seed, prefix=(1, i))
        coding.reveal_all()
        inside, dst = coding._xi_parts(R)
        eu_all, ev_all = coding._eu, coding._ev
        base_open = coding.open_slot_mask()
        open_idx = np.flatnonzero(base_open & inside)
        labels = kernels.components_labels(
            coding.e_window.n_vertices, eu_all[open_idx], ev_all[open_idx]
        )
        orig_lbl = int(labels[coding._origin])
        sphere_set = set(labels[dst].tolist())
        base = orig_lbl in sphere_set
        theta_successes += int(base)

        res_rng = np.random.default_rng(
            np.random.SeedSequence(seed, spawn_key=(2, i))
        )
        new_bundles = _replacement_bundles(
            res_rng, v_coords_all, coding._cdf, coding._log_s, L, d,
            coding.e_window,
        )
        new_bits = res_rng.random(valid_slots.size) < eps

        cover = coding._cover
        bits = coding._bits

        def xi_modified(add, rem):
            mask = base_open.copy()
            mask[rem] = False
            mask[add] = True
            idx = np.flatnonzero(mask & inside)
            return bool(kernels.connected_in(
                coding.e_window.n_vertices,
                eu_all[idx], ev_all[idx], origin_arr, dst,
            ))

        for vid in range(n_v):
            new = new_bundles[vid]
            old = coding._bundle_slots[vid]
            if old.size == 0 and new.size == 0:
                continue
            if np.array_equal(old, new):
                continue
            add = new[~base_open[new]]
            rem_cand = old[np.isin(old, new, invert=True)] \
                if new.size else old
            rem = rem_cand[(cover[rem_cand] == 1) & ~bits[rem_cand]]
            if add.size == 0 and rem.size == 0:
                continue
            if base:
                # additions cannot switch a satisfied crossing off; a
                # removal matters only inside the origin's component
                if rem.size == 0:
                    continue
                if not (labels[eu_all[rem]] == orig_lbl).any():
                    continue
                if not xi_modified(add, rem):
                    flip_v[vid] += 1
            else:
                if add.size == 0:
                    continue
                if not _labels_connect(
                    add, labels, eu_all, ev_all, orig_lbl, sphere_set
                ):
                    continue
                if rem.size == 0 or xi_modified(add, rem):
                    flip_v[vid] += 1
        for k, slot in enumerate(valid_slots.tolist()):
            new_bit = bool(new_bits[k])
            if new_bit == bits[slot]:
                continue
            if cover[slot] > 0:
                continue
            if new_bit:
                if base:
                    continue
                la = int(labels[eu_all[slot]])
                lb = int(labels[ev_all[slot]])
                if (la == orig_lbl and lb in sphere_set) or \
                        (lb == orig_lbl and la in sphere_set):
                    flip_e[slot] += 1
            else:
                if not base:
                    continue
                if labels[eu_all[slot]] != orig_lbl:
                    continue
                if not xi_modified(
                    np.empty(0, dtype=np.int64), np.asarray([slot])
                ):
                    flip_e[slot] += 1

    theta = theta_successes / n_inf
    var_hat = theta * (1.0 - theta)

    rhs = 0.0
    rhs_var = 0.0
    for vid in range(n_v):
        rho = rho_v[tuple(int(c) for c in v_coords_all[vid])]
        inf = flip_v[vid] / n_inf
        rhs += rho * inf
        rhs_var += (
            rho * rho * inf * (1 - inf) / n_inf
            + inf * inf * rho * (1 - rho) / trials
        )
    for slot in valid_slots:
        pair = _edge_as_pair(probe.e_window, int(slot))
        rho = rho_e[pair]
        inf = flip_e[int(slot)] / n_inf
        rhs += rho * inf
        rhs_var += (
            rho * rho * inf * (1 - inf) / n_inf
            + inf * inf * rho * (1 - rho) / trials
        )

    sigma_lhs = abs(1.0 - 2.0 * theta) * np.sqrt(
        theta * (1.0 - theta) / n_inf
    )
    sigma = float(np.sqrt(sigma_lhs**2 + rhs_var))
    return {
        "var_hat": float(var_hat),
        "rhs": float(rhs),
        "slack": float(rhs - var_hat),
        "sigma": sigma,
        "holds": bool(var_hat <= rhs + 3.0 * sigma),
        "theta_hat": float(theta),
        "trials": trials,
        "influence_trials": n_inf,
    }
