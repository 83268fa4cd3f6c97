"""Exact positive-association checks on finite path universes.

A path universe is a finite list of distinct killed-walk trajectories,
each present independently with the probability that its Poisson count is
nonzero.  With at most 20 paths the full configuration space (2^n
present/absent patterns) is enumerable, so expectations of edge-set
functionals, covariances of monotone pairs, and joint absence
probabilities can all be computed without sampling and compared against
closed forms.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .killed_walk import KillParams, Path, path_probability
from .lattice import (
    Box,
    EdgeSet,
    EmptySetError,
    canonical_edge,
    _is_edge,
    box_vertices,
    unit_step,
)

_CONFIG_GUARD_BITS = 20
_MAX_EDGES = 64


@dataclass(frozen=True)
class PathUniverse:
    """Distinct trajectories with independent presence indicators.

    ``edges`` spans every edge any path traverses; ``path_masks[i]`` has
    bit j set when path i traverses ``edges[j]``.
    """

    paths: tuple
    q: np.ndarray
    edges: tuple
    path_masks: np.ndarray
    u: float
    T: float
    L_max: int

    def __post_init__(self):
        object.__setattr__(
            self, "q", np.ascontiguousarray(self.q, dtype=np.float64)
        )
        object.__setattr__(
            self,
            "path_masks",
            np.ascontiguousarray(self.path_masks, dtype=np.uint64),
        )
        n = len(self.paths)
        if self.q.shape != (n,) or self.path_masks.shape != (n,):
            raise ValueError("per-path arrays do not match the path list")
        if n > _CONFIG_GUARD_BITS:
            raise ValueError(
                f"{n} paths need 2^{n} configurations; the guard allows "
                f"2^{_CONFIG_GUARD_BITS}"
            )
        if len(self.edges) > _MAX_EDGES:
            raise ValueError("edge support exceeds 64 edges")
        if np.any(self.q < 0) or np.any(self.q > 1):
            raise ValueError("presence probabilities must lie in [0, 1]")

    @property
    def n_paths(self) -> int:
        return len(self.paths)

    @property
    def n_configs(self) -> int:
        return 1 << len(self.paths)

    def edges_of_mask(self, mask: int) -> frozenset:
        return frozenset(
            e for j, e in enumerate(self.edges) if (int(mask) >> j) & 1
        )

    def config_distribution(self) -> tuple:
        """Aggregated law of the open edge set.

        Returns (masks, probs): unique edge masks over all 2^n
        configurations and their compensated-sum probabilities.
        """
        cached = self.__dict__.get("_dist")
        if cached is not None:
            return cached
        probs = np.ones(1, dtype=np.float64)
        masks = np.zeros(1, dtype=np.uint64)
        for i in range(self.n_paths):
            qi = self.q[i]
            probs = np.concatenate((probs * (1.0 - qi), probs * qi))
            masks = np.concatenate((masks, masks | self.path_masks[i]))
        uniq, inverse = np.unique(masks, return_inverse=True)
        order = np.argsort(inverse, kind="stable")
        bounds = np.searchsorted(inverse[order], np.arange(uniq.size + 1))
        sorted_probs = probs[order]
        agg = [
            math.fsum(sorted_probs[bounds[k]:bounds[k + 1]])
            for k in range(uniq.size)
        ]
        dist = (uniq, tuple(agg))
        object.__setattr__(self, "_dist", dist)
        return dist


def _region_parts(region) -> tuple:
    """Split a region into (start vertices, allowed edge set or None)."""
    if isinstance(region, Box):
        return sorted(box_vertices(region)), None
    if isinstance(region, EdgeSet):
        region = region.to_edges()
    items = sorted(region) if not isinstance(region, (list, tuple)) \
        else list(region)
    if not items:
        raise EmptySetError("region is empty")
    if _is_edge(items[0]):
        allowed = {canonical_edge(*e) for e in items}
        starts = sorted({v for e in allowed for v in e})
        return starts, allowed
    starts = sorted({tuple(int(c) for c in v) for v in items})
    return starts, None


def _guard_overflow(n: int) -> ValueError:
    return ValueError(
        f"{n} paths need 2^{n} configurations; the guard allows "
        f"2^{_CONFIG_GUARD_BITS}"
    )


def _step_sequences(start, L_max: int, d: int, allowed,
                    budget: int | None = None) -> list:
    """All step-code tuples of length 0..L_max from one start, optionally
    confined to an allowed edge set; length-major lexicographic order.

    ``budget`` aborts the enumeration as soon as it would exceed that many
    sequences, so oversized regions fail fast instead of expanding 6^L
    walks before the configuration guard trips.
    """
    out = [()]
    frontier = [((), start)]
    for _ in range(L_max):
        grown = []
        for steps, pos in frontier:
            for code in range(2 * d):
                move = unit_step(d, code >> 1, 1 - 2 * (code & 1))
                nxt = tuple(p + m for p, m in zip(pos, move))
                if allowed is not None \
                        and canonical_edge(pos, nxt) not in allowed:
                    continue
                grown.append((steps + (code,), nxt))
                if budget is not None and len(out) + len(grown) > budget:
                    raise _guard_overflow(len(out) + len(grown))
        frontier = grown
        out.extend(s for s, _ in frontier)
    return out


def build_universe(region, L_max: int, u: float, T: float) -> PathUniverse:
    """Enumerate every trajectory rooted in the region with length at
    most L_max.

    A vertex region (box or vertex collection) admits every step
    sequence; an edge region admits only walks whose traversed edges stay
    inside it, and roots them at the covered vertices.  Presence
    probabilities are exact: q = 1 - exp(-(2du/(T+1)) * p(walk)).
    """
    if L_max < 0:
        raise ValueError("L_max must be >= 0")
    if u < 0:
        raise ValueError("u must be >= 0")
    starts, allowed = _region_parts(region)
    d = len(starts[0])
    params = KillParams(T=T, d=d)
    intensity = 2.0 * d * u / (T + 1.0)

    paths = []
    for x in starts:
        budget = _CONFIG_GUARD_BITS - len(paths)
        for steps in _step_sequences(x, L_max, d, allowed, budget=budget):
            paths.append(Path(x, np.asarray(steps, dtype=np.uint8)))
    if len(paths) > _CONFIG_GUARD_BITS:
        raise _guard_overflow(len(paths))

    q = np.asarray(
        [-math.expm1(-intensity * path_probability(p, params)) for p in paths]
    )
    edges = sorted({e for p in paths for e in p.edges()})
    index = {e: j for j, e in enumerate(edges)}
    masks = np.zeros(len(paths), dtype=np.uint64)
    for i, p in enumerate(paths):
        for e in p.edges():
            masks[i] |= np.uint64(1) << np.uint64(index[e])
    return PathUniverse(
        paths=tuple(paths), q=q, edges=tuple(edges), path_masks=masks,
        u=float(u), T=float(T), L_max=int(L_max),
    )


def exact_expectation(universe: PathUniverse, f) -> float:
    """E[f(open edges)] by full enumeration; f maps a frozenset of
    canonical edges to a number."""
    masks, probs = universe.config_distribution()
    return math.fsum(
        p * float(f(universe.edges_of_mask(m))) for m, p in zip(masks, probs)
    )


def covariance(universe: PathUniverse, f, g) -> float:
    """Cov[f, g] over the open edge set, by full enumeration."""
    masks, probs = universe.config_distribution()
    fv = [float(f(universe.edges_of_mask(m))) for m in masks]
    gv = [float(g(universe.edges_of_mask(m))) for m in masks]
    ef = math.fsum(p * a for p, a in zip(probs, fv))
    eg = math.fsum(p * b for p, b in zip(probs, gv))
    efg = math.fsum(p * a * b for p, a, b in zip(probs, fv, gv))
    return efg - ef * eg


# ---------------------------------------------------------------------------
# monotone pairs


def monotone_tables(m: int) -> list:
    """Truth tables (as bitmasks over the 2^m subsets) of every monotone
    boolean function of m bits; only sensible for m <= 4."""
    if m < 0:
        raise ValueError("m must be >= 0")
    n_cfg = 1 << m
    succ = [
        [s | (1 << b) for b in range(m) if not s & (1 << b)]
        for s in range(n_cfg)
    ]
    tables = []
    for t in range(1 << n_cfg):
        if all(
            (t >> s) & 1 <= (t >> sup) & 1
            for s in range(n_cfg) for sup in succ[s]
        ):
            tables.append(t)
    return tables


def _submask_distribution(universe: PathUniverse, positions) -> tuple:
    """Project the edge-mask law onto the chosen edge positions."""
    masks, probs = universe.config_distribution()
    sub = np.zeros(masks.size, dtype=np.uint64)
    for j, p in enumerate(positions):
        sub |= ((masks >> np.uint64(p)) & np.uint64(1)) << np.uint64(j)
    out: dict = {}
    for s, p in zip(sub, probs):
        out.setdefault(int(s), []).append(p)
    cfgs = sorted(out)
    return (
        np.asarray(cfgs, dtype=np.uint64),
        [math.fsum(out[s]) for s in cfgs],
    )


def _random_monotone(m: int, rng: np.random.Generator):
    """Weight-threshold construction: nonnegative weights make the
    indicator increasing in every bit."""
    w = rng.random(m)
    tau = rng.uniform(0.0, w.sum())
    return w, tau


def fkg_check(
    universe: PathUniverse, pair_budget: int = 200, *,
    edges=None, seed: int = 0,
) -> dict:
    """Minimum covariance over tested pairs of increasing indicator
    functions of the open edge set.

    With at most 4 working edges every monotone pair is enumerated;
    otherwise ``pair_budget`` random weight-threshold pairs are drawn.
    Restricting ``edges`` tests functions of that subset only.
    """
    if edges is None:
        working = list(universe.edges)
    else:
        working = [canonical_edge(*e) for e in edges]
        unknown = [e for e in working if e not in universe.edges]
        if unknown:
            raise ValueError(f"edges outside the universe: {unknown}")
    positions = [universe.edges.index(e) for e in working]
    m = len(working)
    cfgs, probs = _submask_distribution(universe, positions)

    min_cov = math.inf
    worst = None
    passing = 0
    if m <= 4:
        tables = monotone_tables(m)
        vals = np.asarray(
            [[(t >> int(s)) & 1 for s in cfgs] for t in tables],
            dtype=np.float64,
        )
        n_pairs = 0
        for a in range(len(tables)):
            for b in range(a, len(tables)):
                fa, fb = vals[a], vals[b]
                ef = math.fsum(p * x for p, x in zip(probs, fa))
                eg = math.fsum(p * x for p, x in zip(probs, fb))
                efg = math.fsum(p * x * y for p, x, y in zip(probs, fa, fb))
                cov = efg - ef * eg
                n_pairs += 1
                passing += cov >= -1e-12
                if cov < min_cov:
                    min_cov = cov
                    worst = (tables[a], tables[b])
        mode = "exhaustive"
    else:
        rng = np.random.default_rng(seed)
        bits = np.asarray(
            [[(int(s) >> j) & 1 for j in range(m)] for s in cfgs],
            dtype=np.float64,
        )
        n_pairs = int(pair_budget)
        for _ in range(n_pairs):
            wf, tf = _random_monotone(m, rng)
            wg, tg = _random_monotone(m, rng)
            fa = (bits @ wf >= tf).astype(np.float64)
            fb = (bits @ wg >= tg).astype(np.float64)
            ef = math.fsum(p * x for p, x in zip(probs, fa))
            eg = math.fsum(p * x for p, x in zip(probs, fb))
            efg = math.fsum(p * x * y for p, x, y in zip(probs, fa, fb))
            cov = efg - ef * eg
            passing += cov >= -1e-12
            if cov < min_cov:
                min_cov = cov
                worst = ((tuple(wf), tf), (tuple(wg), tg))
        mode = "random"

    return {
        "min_cov": float(min_cov),
        "holds": min_cov >= -1e-12,
        "pairs": n_pairs,
        "passing": int(passing),
        "mode": mode,
        "edge_count": m,
        "worst_pair": worst,
    }


def fkg_check_truncated(
    window, L: int, u: float, T: float, pair_budget: int = 200, **kw
) -> dict:
    """fkg_check on the length-truncated universe rooted in a window."""
    return fkg_check(build_universe(window, L, u, T), pair_budget, **kw)


# ---------------------------------------------------------------------------
# independence factorization


def joint_absence(universe: PathUniverse, indices) -> Fraction:
    """P[every listed path absent], by exact enumeration over the full
    configuration space of the remaining paths.

    Exact rational arithmetic on the float marginals, so the result is
    comparable to the product form without tolerance.
    """
    idx = sorted({int(i) for i in indices})
    if idx and (idx[0] < 0 or idx[-1] >= universe.n_paths):
        raise IndexError("path index out of range")
    fixed = set(idx)
    total = Fraction(1)
    free_terms = [Fraction(1)]
    for i in range(universe.n_paths):
        qi = Fraction(float(universe.q[i]))
        if i in fixed:
            total *= 1 - qi
        else:
            free_terms = [t * (1 - qi) for t in free_terms] \
                + [t * qi for t in free_terms]
    return total * sum(free_terms)


def marginal_absence_product(universe: PathUniverse, indices) -> Fraction:
    """Product of the per-path absence marginals, exact."""
    out = Fraction(1)
    for i in sorted({int(i) for i in indices}):
        out *= 1 - Fraction(float(universe.q[i]))
    return out


def absence_factorization_exact(universe: PathUniverse, max_paths=10) -> bool:
    """Whether joint absence equals the marginal product for every subset
    of the first ``max_paths`` paths, with exact arithmetic."""
    k = min(universe.n_paths, int(max_paths))
    for r in range(k + 1):
        for subset in itertools.combinations(range(k), r):
            if joint_absence(universe, subset) != \
                    marginal_absence_product(universe, subset):
                return False
    return True
