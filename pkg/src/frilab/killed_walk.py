"""Geometrically killed simple random walk: sampling and exact numerics.

A walk with expected fiber length ``T`` survives each step with probability
``T/(T+1)``, so its length (number of steps) is geometric on {0, 1, ...} with
mean ``T``, and each step is uniform over the ``2d`` unit directions,
independent of the length.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .lattice import GeometryError, canonical_edge


@dataclass(frozen=True)
class KillParams:
    """Walk parameters: expected fiber length T and dimension d.

    The theory needs d >= 3; d = 2 is allowed for debugging and flagged via
    ``theory_range_ok`` plus a warning.
    """

    T: float
    d: int

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("T must be positive")
        if self.d < 2:
            raise ValueError("dimension must be >= 2")
        if self.d == 2:
            warnings.warn(
                "d=2 is outside the supported theory range (d >= 3)",
                stacklevel=2,
            )

    @property
    def survival(self) -> float:
        return self.T / (self.T + 1.0)

    @property
    def kill_rate(self) -> float:
        return 1.0 / (self.T + 1.0)

    @property
    def theory_range_ok(self) -> bool:
        return self.d >= 3


@dataclass(frozen=True)
class Path:
    """A finite nearest-neighbor trajectory: start vertex plus step codes.

    Step code ``2*axis`` moves +1 along ``axis``, ``2*axis + 1`` moves -1.
    """

    start: tuple
    steps: np.ndarray = field(default_factory=lambda: np.empty(0, np.uint8))

    def __post_init__(self):
        object.__setattr__(self, "start", tuple(int(c) for c in self.start))
        object.__setattr__(
            self, "steps", np.ascontiguousarray(self.steps, dtype=np.uint8)
        )

    @property
    def length(self) -> int:
        return int(self.steps.shape[0])

    def vertices(self) -> np.ndarray:
        """(length+1, d) visited coordinates in order."""
        d = len(self.start)
        out = np.empty((self.length + 1, d), dtype=np.int64)
        out[0] = self.start
        if self.length:
            axis = (self.steps >> 1).astype(np.int64)
            sign = 1 - 2 * (self.steps & 1).astype(np.int64)
            disp = np.zeros((self.length, d), dtype=np.int64)
            disp[np.arange(self.length), axis] = sign
            out[1:] = self.start + np.cumsum(disp, axis=0)
        return out

    def edges(self) -> list:
        """All traversed edges (one per step, duplicates removed)."""
        verts = self.vertices()
        return sorted(
            {
                canonical_edge(tuple(verts[i]), tuple(verts[i + 1]))
                for i in range(self.length)
            }
        )

    def prefix(self, n: int) -> "Path":
        if not 0 <= n <= self.length:
            raise ValueError("prefix length out of range")
        return Path(self.start, self.steps[:n].copy())


def sample_length(T: float, rng: np.random.Generator) -> int:
    """One geometric length: P(k) = (1/(T+1)) * (T/(T+1))^k, k >= 0."""
    return int(rng.geometric(1.0 / (T + 1.0)) - 1)


def sample_lengths(T: float, size: int, rng: np.random.Generator) -> np.ndarray:
    return rng.geometric(1.0 / (T + 1.0), size=size).astype(np.int64) - 1


def draw_steps(d: int, total: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform direction codes for ``total`` steps."""
    return rng.integers(0, 2 * d, size=total, dtype=np.int64).astype(np.uint8)


def sample_path(x, params: KillParams, rng: np.random.Generator) -> Path:
    """One killed walk from x: geometric length, then uniform steps."""
    n = sample_length(params.T, rng)
    return Path(tuple(x), draw_steps(params.d, n, rng))


def path_probability(path: Path, params: KillParams) -> float:
    """P_x^{(T)}(eta) = (1/(T+1)) * (T / (2d(T+1)))^{|eta|}."""
    if np.any(path.steps >= 2 * params.d):
        raise GeometryError("path step codes exceed the dimension")
    T, d = params.T, params.d
    return (1.0 / (T + 1.0)) * (T / (2.0 * d * (T + 1.0))) ** path.length


# ---------------------------------------------------------------------------
# exact edge-traversal numerics


class HorizonError(RuntimeError):
    """The DP horizon cap was hit before the tail tolerance was reached."""


def dp_horizon(T: float, tail_tol: float, cap: int = 10_000) -> int:
    """Smallest h with (T/(T+1))^h < tail_tol, capped."""
    s = T / (T + 1.0)
    h = int(np.ceil(np.log(tail_tol) / np.log(s)))
    h = max(h, 1)
    if s**h >= tail_tol:
        h += 1
    if h > cap:
        raise HorizonError(
            f"horizon {h} exceeds cap {cap} before reaching tol {tail_tol}"
        )
    return h


def _edge_axis(e) -> int:
    a, b = e
    diffs = [bb - aa for aa, bb in zip(a, b)]
    axis = next(i for i, v in enumerate(diffs) if v != 0)
    return axis


def traversal_dp_field(e, params: KillParams, horizon: int, budget=None):
    """Array of P_y[walk traverses e within ``horizon`` steps (and dies
    within ``budget`` total steps when given)] for all y near the edge.

    Returns (field, origin) where ``field`` is a dense array over the box of
    radius ``horizon + 1`` centered on the lower endpoint of ``e`` and
    ``origin`` maps coordinates to indices: idx = y - lower + horizon + 1.
    """
    e = canonical_edge(*e)
    d = params.d
    s = params.survival
    if budget is not None:
        if budget < 0:
            raise ValueError("budget must be >= 0")
        horizon = min(horizon, budget)
    if horizon < 1:
        lo = np.asarray(e[0], dtype=np.int64)
        return np.zeros((3,) * d, dtype=np.float64), lo - 1
    lo = np.asarray(e[0], dtype=np.int64)
    axis = _edge_axis(e)
    r = horizon + 1
    shape = (2 * r + 1,) * d
    f = np.zeros(shape, dtype=np.float64)
    # index (in the field) of the two edge endpoints
    ia = (r,) * d
    ib = tuple(r + (1 if i == axis else 0) for i in range(d))

    def shifted(arr, ax, sign):
        out = np.zeros_like(arr)
        src = [slice(None)] * d
        dst = [slice(None)] * d
        if sign > 0:
            src[ax] = slice(1, None)
            dst[ax] = slice(0, -1)
        else:
            src[ax] = slice(0, -1)
            dst[ax] = slice(1, None)
        out[tuple(dst)] = arr[tuple(src)]
        return out

    per_dir = s / (2.0 * d)
    for k in range(1, horizon + 1):
        nxt = np.zeros(shape, dtype=np.float64)
        for ax in range(d):
            for sign in (1, -1):
                nxt += shifted(f, ax, sign)
        if budget is None:
            hit_a, hit_b = 1.0, 1.0
        else:
            # After traversing, the walk must still die within the length
            # budget.  With horizon iterations total, the value built at
            # iteration k is consumed after (horizon - k) earlier steps, so
            # the traversal step leaves budget - (horizon - k) - 1 further
            # steps; the remaining length is within that bound with
            # probability 1 - s^(budget - horizon + k).  When
            # budget == horizon the field is exact.
            expo = budget - horizon + k
            hit = 1.0 - s**expo if expo > 0 else 0.0
            hit_a = hit_b = hit
        # traversing the edge from either endpoint replaces the recursion
        contrib = nxt.copy()
        contrib[ia] += hit_b - f[ib]
        contrib[ib] += hit_a - f[ia]
        f = per_dir * contrib
    return f, lo - r


def edge_visit_probability(z, e, params: KillParams, tail_tol: float):
    """Enclosure [lo, hi] of P_z[the killed walk traverses edge e]."""
    if tail_tol <= 0:
        raise ValueError("tail_tol must be positive")
    h = dp_horizon(params.T, tail_tol)
    field, origin = traversal_dp_field(e, params, h)
    idx = np.asarray(z, dtype=np.int64) - origin
    if np.any(idx < 0) or np.any(idx >= field.shape[0]):
        lo = 0.0
    else:
        lo = float(field[tuple(idx)])
    hi = lo + params.survival ** (h + 1)
    return lo, hi


def edge_visit_enclosure_sum(e, params: KillParams, tail_tol: float, budget=None):
    """Enclosure [lo, hi] of sum over all starts z of P_z[traverse e
    (with total length <= budget when given)].

    The horizon is chosen so that the within-grid tail mass and the
    out-of-grid shell series together stay below ``tail_tol``.
    """
    if tail_tol <= 0:
        raise ValueError("tail_tol must be positive")
    s = params.survival
    d = params.d
    h = dp_horizon(params.T, tail_tol)
    while True:
        if budget is not None and h >= budget:
            # field is exact: every qualifying walk has length <= budget <= h
            h_eff = budget
            field, _ = traversal_dp_field(e, params, h_eff, budget=budget)
            lo = float(field.sum())
            return lo, lo
        grid = float(2 * h + 3) ** d
        in_tail = grid * s ** (h + 1)
        # starts beyond the grid need >= h+1 steps to reach the edge
        shell_tail = _shell_series_tail(h + 1, s, d)
        if in_tail + shell_tail < tail_tol:
            break
        if h > 9_000:
            raise HorizonError("aggregate horizon cap exceeded")
        h = int(h * 1.5) + 1
    field, _ = traversal_dp_field(e, params, h, budget=budget)
    lo = float(field.sum())
    return lo, lo + in_tail + shell_tail


def _shell_series_tail(k0: int, s: float, d: int) -> float:
    """Upper bound on sum_{k >= k0} |shell_k| * s^k for shells around an
    edge: |shell_k| <= (2k+3)^d - (2k+1)^d."""
    total = 0.0
    k = k0
    while True:
        shell = float(2 * k + 3) ** d - float(2 * k + 1) ** d
        term = shell * s**k
        total += term
        if term < 1e-18 * max(total, 1.0):
            return total
        k += 1


def empirical_sup_norm_tail(
    params: KillParams, n: int, trials: int, rng: np.random.Generator
) -> float:
    """Fraction of sampled walks whose max l-infinity displacement >= n."""
    if n < 0:
        raise ValueError("n must be >= 0")
    lengths = sample_lengths(params.T, trials, rng)
    total = int(lengths.sum())
    dirs = draw_steps(params.d, total, rng)
    if total == 0:
        return 1.0 if n == 0 else 0.0
    axis = (dirs >> 1).astype(np.int64)
    sign = 1 - 2 * (dirs & 1).astype(np.int64)
    disp = np.zeros((total, params.d), dtype=np.int64)
    disp[np.arange(total), axis] = sign
    cs = np.cumsum(disp, axis=0)
    seg = np.concatenate(([0], np.cumsum(lengths)[:-1])).astype(np.int64)
    base = np.zeros((trials, params.d), dtype=np.int64)
    nz = seg > 0
    base[nz] = cs[seg[nz] - 1]
    rep = np.repeat(np.arange(trials), lengths)
    linf = np.abs(cs - base[rep]).max(axis=1)
    sup = np.zeros(trials, dtype=np.int64)
    nonempty = lengths > 0
    if np.any(nonempty):
        sup[nonempty] = np.maximum.reduceat(linf, seg[nonempty])
    return float(np.mean(sup >= n))
