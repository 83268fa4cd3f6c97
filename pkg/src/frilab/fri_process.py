"""Finitary random interlacements: windowed sampling, labels, truncation.

The process is a Poisson soup of killed walks: each lattice vertex emits
``Poisson(2du/(T+1))`` independent walks.  Only the trace inside a finite
window is ever observed, so sampling proceeds on the window plus a padding
collar wide enough that walks started beyond it reach the window with total
expected count below ``intrusion_tol``.

Two sampling routes are provided.  The default ``shell`` route thins each
collar shell at distance k by the survival factor s^k (a walk shorter than
k steps cannot travel k in sup norm) and draws the conditioned lengths as
k plus a fresh geometric, which leaves the window trace law exact.  The
``none`` route literally instantiates every vertex of the padded box.  The
two routes agree in law on the window and are cross-checked in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .killed_walk import KillParams, sample_lengths, draw_steps
from .lattice import Box, EdgeSet, GeometryError


def path_intensity(u: float, T: float, d: int) -> float:
    """Per-vertex expected number of walks, 2du/(T+1)."""
    return 2.0 * d * u / (T + 1.0)


@dataclass
class Paths:
    """Structure-of-arrays path collection.

    ``starts`` is (n, d), ``lengths`` is (n,), and ``dirs`` concatenates the
    per-path step codes (code 2*axis + (0 for +, 1 for -)).
    """

    starts: np.ndarray
    lengths: np.ndarray
    dirs: np.ndarray

    def __post_init__(self):
        self.starts = np.ascontiguousarray(self.starts, dtype=np.int64)
        self.lengths = np.ascontiguousarray(self.lengths, dtype=np.int64)
        self.dirs = np.ascontiguousarray(self.dirs, dtype=np.uint8)
        if self.starts.ndim != 2:
            raise ValueError("starts must be (n, d)")
        if self.lengths.shape != (self.starts.shape[0],):
            raise ValueError("lengths must be (n,)")
        if int(self.lengths.sum()) != self.dirs.shape[0]:
            raise ValueError("dirs length must equal sum of lengths")
        if self.lengths.size and int(self.lengths.min()) < 0:
            raise ValueError("lengths must be >= 0")

    @classmethod
    def empty(cls, d: int) -> "Paths":
        return cls(
            np.empty((0, d), np.int64), np.empty(0, np.int64), np.empty(0, np.uint8)
        )

    @property
    def d(self) -> int:
        return int(self.starts.shape[1])

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate(([0], np.cumsum(self.lengths))).astype(np.int64)

    def __len__(self) -> int:
        return int(self.starts.shape[0])

    def steps_of(self, i: int) -> np.ndarray:
        off = self.offsets
        return self.dirs[off[i] : off[i + 1]]

    def select(self, mask: np.ndarray) -> "Paths":
        """New collection holding the paths where mask is True."""
        mask = np.asarray(mask)
        if mask.dtype == bool:
            sel = np.flatnonzero(mask)
        else:
            sel = mask.astype(np.int64)
        off = self.offsets
        lens = self.lengths[sel]
        total = int(lens.sum())
        out_off = np.concatenate(([0], np.cumsum(lens))).astype(np.int64)
        idx = np.repeat(off[sel], lens) + (
            np.arange(total, dtype=np.int64) - np.repeat(out_off[:-1], lens)
        )
        return Paths(self.starts[sel], lens, self.dirs[idx])

    @classmethod
    def concat(cls, parts: list) -> "Paths":
        if not parts:
            raise ValueError("nothing to concatenate")
        return cls(
            np.concatenate([p.starts for p in parts]),
            np.concatenate([p.lengths for p in parts]),
            np.concatenate([p.dirs for p in parts]),
        )


@dataclass
class FriSample:
    """One draw of the interlacement trace around a window."""

    paths: Paths
    u: float
    T: float
    window: Box
    padding: int
    intrusion_tol: float
    thinning: str = "shell"

    @property
    def params(self) -> KillParams:
        return KillParams(self.T, self.window.d)

    def start_counts(self, box: Box | None = None) -> np.ndarray:
        """Number of paths started at each vertex id of ``box``.

        Only window vertices carry the unconditioned per-vertex law under
        shell thinning; collar counts are length-conditioned.
        """
        box = box or self.window
        inside = box.contains(self.paths.starts)
        vids = box.vertex_ids(self.paths.starts[inside])
        return np.bincount(vids, minlength=box.n_vertices).astype(np.int64)

    def edge_events(self):
        """(walk_ids, edge_slots) for every window-edge traversal."""
        w = self.window
        return kernels.walk_edge_events(
            self.paths.starts,
            self.paths.lengths,
            self.paths.dirs,
            w._center_arr,
            w.radius,
            w._strides,
        )

    def window_edges(self) -> EdgeSet:
        _, slots = self.edge_events()
        mask = np.zeros(self.window.n_edge_slots, dtype=bool)
        mask[slots] = True
        return EdgeSet(self.window, mask)

    def covered_vertex_ids(self, box: Box | None = None) -> np.ndarray:
        """Sorted unique vertex ids of ``box`` visited by any path."""
        box = box or self.window
        _, vids = kernels.walk_vertex_visits(
            self.paths.starts,
            self.paths.lengths,
            self.paths.dirs,
            box._center_arr,
            box.radius,
            box._strides,
        )
        return np.unique(vids)


@dataclass
class DecoratedSample:
    """Label-decorated soup at ceiling intensity ``u_max``.

    Each path carries an independent uniform label in (0, u_max]; keeping
    the paths with label <= u reproduces the process at intensity u, and the
    kept sets are nested in u by construction.
    """

    paths: Paths
    labels: np.ndarray
    u_max: float
    T: float
    window: Box
    padding: int
    intrusion_tol: float
    thinning: str = "shell"

    def __post_init__(self):
        self.labels = np.ascontiguousarray(self.labels, dtype=np.float64)
        if self.labels.shape != (len(self.paths),):
            raise ValueError("one label per path required")


def threshold(sample: DecoratedSample, u: float) -> FriSample:
    """Paths with label <= u, as a plain sample at intensity u."""
    if not 0.0 <= u <= sample.u_max:
        raise ValueError("u must lie in [0, u_max]")
    keep = sample.labels <= u
    return FriSample(
        paths=sample.paths.select(keep),
        u=u,
        T=sample.T,
        window=sample.window,
        padding=sample.padding,
        intrusion_tol=sample.intrusion_tol,
        thinning=sample.thinning,
    )


def padding_radius(
    window: Box, u: float, T: float, intrusion_tol: float = 1e-6
) -> int:
    """Smallest collar width p with the expected number of window-reaching
    walks started beyond the collar below ``intrusion_tol``."""
    if intrusion_tol <= 0:
        raise ValueError("intrusion_tol must be positive")
    if u == 0:
        return 0
    d = window.d
    lam = path_intensity(u, T, d)
    s = T / (T + 1.0)
    terms = []
    k = 1
    total = 0.0
    while True:
        term = lam * window.shell_vertex_count(k) * s**k
        terms.append(term)
        total += term
        if term < min(1e-18 * max(total, 1.0), intrusion_tol * 1e-12):
            break
        k += 1
        if k > 100_000:
            raise GeometryError("padding series did not converge")
    suffix = np.cumsum(terms[::-1])[::-1]
    for p in range(len(terms) + 1):
        tail = float(suffix[p]) if p < len(terms) else 0.0
        if tail < intrusion_tol:
            return p
    return len(terms)


def _uniform_shell_starts(
    window: Box, k: int, n: int, rng: np.random.Generator
) -> np.ndarray:
    """``n`` points uniform on the shell at sup-norm distance
    window.radius + k from the window center, by batched rejection."""
    d = window.d
    rr = window.radius + k
    if n == 0:
        return np.empty((0, d), np.int64)
    side = 2 * rr + 1
    inner = 2 * rr - 1
    rate = 1.0 - (inner / side) ** d
    out = np.empty((n, d), np.int64)
    got = 0
    while got < n:
        batch = int((n - got) / rate * 1.3) + 16
        cand = rng.integers(-rr, rr + 1, size=(batch, d))
        hit = cand[np.abs(cand).max(axis=1) == rr]
        take = min(n - got, hit.shape[0])
        out[got : got + take] = hit[:take]
        got += take
    return out + window._center_arr


def _soup_parts(
    window: Box,
    lam: float,
    T: float,
    padding: int,
    thinning: str,
    rng: np.random.Generator,
) -> Paths:
    d = window.d
    s = T / (T + 1.0)
    parts = []
    if thinning == "shell":
        n_win = window.n_vertices
        n0 = int(rng.poisson(n_win * lam))
        vids = rng.integers(0, n_win, size=n0)
        starts = window.vertex_coords(vids)
        lengths = sample_lengths(T, n0, rng)
        parts.append((starts, lengths))
        for k in range(1, padding + 1):
            mean = lam * window.shell_vertex_count(k) * s**k
            nk = int(rng.poisson(mean))
            starts = _uniform_shell_starts(window, k, nk, rng)
            lengths = k + sample_lengths(T, nk, rng)
            parts.append((starts, lengths))
    elif thinning == "none":
        padded = Box(window.center, window.radius + padding)
        counts = rng.poisson(lam, size=padded.n_vertices)
        vids = np.repeat(np.arange(padded.n_vertices), counts)
        starts = padded.vertex_coords(vids)
        lengths = sample_lengths(T, starts.shape[0], rng)
        parts.append((starts, lengths))
    else:
        raise ValueError(f"unknown thinning mode: {thinning!r}")
    starts = np.concatenate([p[0] for p in parts])
    lengths = np.concatenate([p[1] for p in parts]).astype(np.int64)
    dirs = draw_steps(d, int(lengths.sum()), rng)
    return Paths(starts, lengths, dirs)


def sample_decorated(
    window: Box,
    u_max: float,
    T: float,
    rng: np.random.Generator,
    *,
    intrusion_tol: float = 1e-6,
    thinning: str = "shell",
    padding: int | None = None,
) -> DecoratedSample:
    """Decorated soup at ceiling u_max with uniform labels in (0, u_max]."""
    if u_max <= 0:
        raise ValueError("u_max must be positive for a decorated sample")
    p = padding_radius(window, u_max, T, intrusion_tol) if padding is None else padding
    lam = path_intensity(u_max, T, window.d)
    paths = _soup_parts(window, lam, T, p, thinning, rng)
    labels = u_max * (1.0 - rng.random(len(paths)))
    return DecoratedSample(
        paths=paths,
        labels=labels,
        u_max=u_max,
        T=T,
        window=window,
        padding=p,
        intrusion_tol=intrusion_tol,
        thinning=thinning,
    )


def sample_fri(
    window: Box,
    u: float,
    T: float,
    rng: np.random.Generator,
    *,
    intrusion_tol: float = 1e-6,
    thinning: str = "shell",
    padding: int | None = None,
    L: int | None = None,
) -> FriSample:
    """Direct draw at intensity u, optionally truncated to length <= L."""
    if u < 0:
        raise ValueError("u must be >= 0")
    p = padding_radius(window, u, T, intrusion_tol) if padding is None else padding
    if L is not None:
        p = min(p, L)
    lam = path_intensity(u, T, window.d)
    paths = _soup_parts(window, lam, T, p, thinning, rng)
    sample = FriSample(
        paths=paths,
        u=u,
        T=T,
        window=window,
        padding=p,
        intrusion_tol=intrusion_tol,
        thinning=thinning,
    )
    if L is not None:
        sample = truncate(sample, L)
    return sample


def truncate(sample, L: int):
    """Drop every path longer than L steps (works on either sample kind)."""
    if L < 0:
        raise ValueError("L must be >= 0")
    if isinstance(sample, Paths):
        return sample.select(sample.lengths <= L)
    keep = sample.paths.lengths <= L
    if isinstance(sample, DecoratedSample):
        return replace(
            sample, paths=sample.paths.select(keep), labels=sample.labels[keep]
        )
    return replace(sample, paths=sample.paths.select(keep))


def edge_absence_probability(
    e, u: float, T: float, d: int, tail_tol: float = 1e-9, L: int | None = None
):
    """Enclosure [lo, hi] of P[edge e is traversed by no path], via the exact
    traversal-sum numerics."""
    from .killed_walk import edge_visit_enclosure_sum

    params = KillParams(T, d)
    lam = path_intensity(u, T, d)
    s_lo, s_hi = edge_visit_enclosure_sum(e, params, tail_tol, budget=L)
    return float(np.exp(-lam * s_hi)), float(np.exp(-lam * s_lo))


def bond_open_probability(u: float, T: float, d: int) -> float:
    """Exact per-edge open probability of the L=1 truncation, which is a
    Bernoulli bond percolation: 1 - exp(-2uT/(T+1)^3)."""
    return float(1.0 - np.exp(-2.0 * u * T / (T + 1.0) ** 3))


# ---------------------------------------------------------------------------
# plain-text path serialization
#
# One path per line: start coordinates, step tokens, optional label,
# separated by semicolons.  Step token "+2" walks one unit up axis 2
# (1-based), "-1" one unit down axis 1.
#   "0 0 0; +1 +1 -3; 0.25"


def path_to_line(start, codes, label=None) -> str:
    toks = []
    for c in np.asarray(codes, dtype=np.int64):
        axis = int(c) >> 1
        sign = "+" if (int(c) & 1) == 0 else "-"
        toks.append(f"{sign}{axis + 1}")
    fields = [" ".join(str(int(v)) for v in start), " ".join(toks)]
    if label is not None:
        fields.append(repr(float(label)))
    return "; ".join(fields)


def line_to_path(line: str):
    """Parse one serialized line -> (start tuple, codes array, label or None)."""
    fields = [f.strip() for f in line.split(";")]
    if len(fields) not in (2, 3):
        raise ValueError(f"malformed path line: {line!r}")
    start = tuple(int(t) for t in fields[0].split())
    codes = []
    for tok in fields[1].split():
        sign, axis = tok[0], int(tok[1:]) - 1
        if sign not in "+-" or axis < 0 or axis >= len(start):
            raise ValueError(f"bad step token {tok!r}")
        codes.append(axis * 2 + (0 if sign == "+" else 1))
    label = float(fields[2]) if len(fields) == 3 else None
    return start, np.asarray(codes, dtype=np.uint8), label


def dump_lines(paths: Paths, labels=None) -> list:
    off = paths.offsets
    out = []
    for i in range(len(paths)):
        lab = None if labels is None else labels[i]
        out.append(path_to_line(paths.starts[i], paths.dirs[off[i] : off[i + 1]], lab))
    return out


def parse_lines(lines, d: int):
    """Inverse of dump_lines -> (Paths, labels or None)."""
    starts, lens, dirs, labels = [], [], [], []
    any_label = False
    for line in lines:
        line = line.strip()
        if not line:
            continue
        s, codes, lab = line_to_path(line)
        if len(s) != d:
            raise ValueError("dimension mismatch in serialized path")
        starts.append(s)
        lens.append(len(codes))
        dirs.append(codes)
        labels.append(lab)
        any_label = any_label or lab is not None
    if not starts:
        return Paths.empty(d), None
    paths = Paths(
        np.asarray(starts, np.int64),
        np.asarray(lens, np.int64),
        np.concatenate(dirs) if dirs else np.empty(0, np.uint8),
    )
    if any_label:
        if any(l is None for l in labels):
            raise ValueError("mixed labeled and unlabeled lines")
        return paths, np.asarray(labels, np.float64)
    return paths, None
