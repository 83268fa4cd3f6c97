"""Couplings between soups at different parameters, plus the noise field.

Monotonicity in u comes for free from label thresholds (see
:func:`frilab.fri_process.threshold`).  Comparison across expected fiber
lengths uses a two-step construction: every path of the longer-fiber soup is
cut to a coupled prefix length, then an independent make-up soup is added so
the per-vertex intensity identity

    2du/(T'+1) + 2du(T'-T)/((T'+1)(T+1)) = 2du/(T+1)

restores the target law exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fri_process import FriSample, Paths, path_intensity, sample_fri
from .lattice import Box, EdgeSet


def length_ratio(T_small: float, T_large: float) -> float:
    """Ratio of survival odds p_small/p_large used by the length coupling."""
    if not 0 < T_small <= T_large:
        raise ValueError("need 0 < T_small <= T_large")
    p_small = T_small / (T_small + 1.0)
    p_large = T_large / (T_large + 1.0)
    return p_small / p_large


def coupled_length_pmf(m: int, T_small: float, T_large: float) -> np.ndarray:
    """Conditional law of the shortened length given original length m.

    Index n of the returned vector is P[new length = n], n = 0..m.  For
    m >= 1 the mass sits on 1..m: geometric with ratio r below m, and the
    whole remaining tail r^(m-1) collapsed onto n = m; length-0 paths stay
    fixed.
    """
    if m < 0:
        raise ValueError("m must be >= 0")
    out = np.zeros(m + 1, dtype=np.float64)
    if m == 0:
        out[0] = 1.0
        return out
    r = length_ratio(T_small, T_large)
    n = np.arange(1, m, dtype=np.float64)
    out[1:m] = r ** (n - 1.0) * (1.0 - r)
    out[m] = r ** (m - 1.0)
    return out


def sample_coupled_lengths(
    m, T_small: float, T_large: float, rng: np.random.Generator
) -> np.ndarray:
    """Vectorized draw from :func:`coupled_length_pmf` for each entry of m.

    Uses min(m, 1 + geometric): P[1 + G = n] = (1-r) r^(n-1) and the capped
    tail P[1 + G >= m] = r^(m-1) match the kernel exactly.
    """
    m = np.asarray(m, dtype=np.int64)
    r = length_ratio(T_small, T_large)
    if r == 1.0:
        return m.copy()
    draws = rng.geometric(1.0 - r, size=m.shape).astype(np.int64)
    out = np.minimum(m, draws)
    out[m == 0] = 0
    return out


def shorten_paths(
    paths: Paths, new_lengths: np.ndarray
) -> Paths:
    """Keep the first ``new_lengths[i]`` steps of each path."""
    new_lengths = np.asarray(new_lengths, dtype=np.int64)
    if new_lengths.shape != (len(paths),):
        raise ValueError("one length per path required")
    if np.any(new_lengths > paths.lengths) or np.any(new_lengths < 0):
        raise ValueError("prefix lengths must lie in [0, current length]")
    off = paths.offsets
    total = int(new_lengths.sum())
    out_off = np.concatenate(([0], np.cumsum(new_lengths))).astype(np.int64)
    idx = np.repeat(off[:-1], new_lengths) + (
        np.arange(total, dtype=np.int64) - np.repeat(out_off[:-1], new_lengths)
    )
    return Paths(paths.starts.copy(), new_lengths, paths.dirs[idx])


@dataclass
class CoupledPair:
    """A soup and its derived counterpart at a smaller fiber length."""

    source: FriSample
    derived: FriSample

    def windows_agree(self) -> bool:
        """True when the two window traces are identical (edges and
        covered vertices)."""
        ea = self.source.window_edges()
        eb = self.derived.window_edges()
        if not np.array_equal(ea.mask, eb.mask):
            return False
        va = self.source.covered_vertex_ids()
        vb = self.derived.covered_vertex_ids()
        return bool(np.array_equal(va, vb))


def derive_from_larger_T(
    sample: FriSample,
    T_target: float,
    rng: np.random.Generator,
    *,
    intrusion_tol: float = 1e-6,
) -> CoupledPair:
    """Couple ``sample`` (at fiber length T') to the law at T_target < T'.

    Paths are cut to coupled prefix lengths, then an independent soup at
    intensity u(T'-T)/(T'+1) and fiber length T_target is sprinkled in.
    """
    T_src = sample.T
    if not 0 < T_target <= T_src:
        raise ValueError("T_target must lie in (0, T_source]")
    if T_target == T_src:
        return CoupledPair(source=sample, derived=sample)
    new_lengths = sample_coupled_lengths(
        sample.paths.lengths, T_target, T_src, rng
    )
    shortened = shorten_paths(sample.paths, new_lengths)
    u_extra = sample.u * (T_src - T_target) / (T_src + 1.0)
    extra = sample_fri(
        sample.window,
        u_extra,
        T_target,
        rng,
        intrusion_tol=intrusion_tol,
        thinning=sample.thinning if sample.thinning in ("shell", "none") else "shell",
    )
    derived = FriSample(
        paths=Paths.concat([shortened, extra.paths]),
        u=sample.u,
        T=T_target,
        window=sample.window,
        padding=min(sample.padding, extra.padding),
        intrusion_tol=sample.intrusion_tol + intrusion_tol,
        thinning=sample.thinning,
    )
    return CoupledPair(source=sample, derived=derived)


# ---------------------------------------------------------------------------
# Bernoulli edge noise and the noisy union


def bernoulli_field(
    window: Box, eps: float, rng: np.random.Generator
) -> EdgeSet:
    """Independent Bernoulli(eps) edge set over the window."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    draws = rng.random(window.n_edge_slots)
    mask = (draws < eps) & window.edge_slot_valid()
    return EdgeSet(window, mask)


def gamma_union(fri_edges: EdgeSet, noise: EdgeSet) -> EdgeSet:
    """Edges open in the soup or in the noise field."""
    return fri_edges.union(noise)


# ---------------------------------------------------------------------------
# fractional truncation: interpolate between cutoff scales


def truncated_band_probability(T: float, lo: int, hi: int) -> float:
    """P[lo < length <= hi] for the geometric length law."""
    s = T / (T + 1.0)
    return s ** (lo + 1) - s ** (hi + 1)


def _sample_band_lengths(
    T: float, lo: int, hi: int, size: int, rng: np.random.Generator
) -> np.ndarray:
    """Geometric lengths conditioned to (lo, hi], by exact inverse cdf."""
    s = T / (T + 1.0)
    span = hi - lo
    u = rng.random(size)
    # conditional P[len <= lo + 1 + g] = (1 - s^(g+1)) / (1 - s^span)
    g = np.ceil(np.log1p(-u * (1.0 - s**span)) / np.log(s)) - 1.0
    g = np.clip(g.astype(np.int64), 0, span - 1)
    return lo + 1 + g


def band_padding(
    window: Box, per_vertex_mean: float, max_len: int, tol: float
) -> int:
    """Collar width for a soup of walks no longer than ``max_len`` with the
    given per-vertex count mean: expected number of window-reaching walks
    started beyond the collar below ``tol``, using the sub-Gaussian bound
    P[sup-norm displacement >= k] <= 2d exp(-k^2 / (2 max_len))."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    if per_vertex_mean == 0.0:
        return 0
    d = window.d
    for p in range(0, max_len + 1):
        tail = 0.0
        for k in range(p + 1, max_len + 1):
            reach = 2.0 * d * np.exp(-(k * k) / (2.0 * max_len))
            tail += (
                per_vertex_mean * window.shell_vertex_count(k) * min(1.0, reach)
            )
        if tail < tol:
            return p
    return max_len


def sample_chi_t(
    window: Box,
    u: float,
    T: float,
    t: float,
    l_scales,
    rng: np.random.Generator,
    *,
    intrusion_tol: float = 1e-6,
) -> FriSample:
    """Truncation interpolated along the cutoff sequence ``l_scales``.

    At integer t = n this is the soup truncated at l_scales[n].  For
    fractional t = n + frac it adds an independent band of paths with
    lengths in (l_scales[n], l_scales[n+1]] whose per-vertex count is
    Poisson with mean frac * (2du/(T+1)) * P[length in band].
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    n = int(np.floor(t))
    frac = t - n
    if n >= len(l_scales) or (frac > 0.0 and n + 1 >= len(l_scales)):
        raise ValueError("t exceeds the provided scale sequence")
    L_n = int(l_scales[n])
    base = sample_fri(
        window, u, T, rng, intrusion_tol=intrusion_tol, L=L_n
    )
    if frac == 0.0:
        return base
    L_next = int(l_scales[n + 1])
    if L_next <= L_n:
        raise ValueError("scale sequence must be strictly increasing")
    band_p = truncated_band_probability(T, L_n, L_next)
    mean = path_intensity(u, T, window.d) * frac * band_p
    pad = band_padding(window, mean, L_next, intrusion_tol)
    padded = Box(window.center, window.radius + pad)
    n_band = int(rng.poisson(mean * padded.n_vertices))
    vids = rng.integers(0, padded.n_vertices, size=n_band)
    starts = padded.vertex_coords(vids)
    lengths = _sample_band_lengths(T, L_n, L_next, n_band, rng)
    from .killed_walk import draw_steps

    dirs = draw_steps(window.d, int(lengths.sum()), rng)
    band = Paths(starts, lengths, dirs)
    return FriSample(
        paths=Paths.concat([base.paths, band]),
        u=u,
        T=T,
        window=window,
        padding=min(base.padding, pad) if u > 0 else pad,
        intrusion_tol=base.intrusion_tol + intrusion_tol,
        thinning="chi_t",
    )
