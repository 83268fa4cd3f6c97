"""Monte Carlo estimators with Wilson intervals and reproducible streams.

Every trial draws from its own generator seeded by (master seed, tag,
trial index), so results are bit-identical no matter how trials are
sharded across workers; shard merging is plain count addition.

Critical-intensity scans use the label decoration: one decorated pool per
trial yields the exact intensity at which the crossing first appears, so
the estimated curve u -> p_hat(u) is monotone by construction and bisection
against a threshold is deterministic given the pool.
"""

from __future__ import annotations

import warnings
import zlib
from dataclasses import dataclass, field

import numpy as np

from . import clusters, kernels
from .couplings import derive_from_larger_T
from .fri_process import sample_decorated, sample_fri
from .lattice import Box
from .renorm import mu

Z_95 = 1.959963984540054


def wilson_interval(successes: int, trials: int, z: float = Z_95):
    """Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0 <= successes <= trials:
        raise ValueError("successes out of range")
    n = float(trials)
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2.0 * n)) / denom
    half = z * np.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom
    # at 0 or n successes the exact endpoint equals p; keep p inside
    # despite rounding
    return min(p, max(0.0, center - half)), max(p, min(1.0, center + half))


@dataclass(frozen=True)
class Estimate:
    """A binomial frequency with its 95% Wilson interval."""

    p_hat: float
    n_trials: int
    successes: int
    ci_low: float
    ci_high: float
    params: dict = field(default_factory=dict, compare=False)
    seed: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.ci_low <= self.p_hat <= self.ci_high <= 1.0:
            raise ValueError("interval must satisfy 0 <= lo <= p <= hi <= 1")


def make_estimate(successes: int, trials: int, params=None, seed=None) -> Estimate:
    lo, hi = wilson_interval(successes, trials)
    return Estimate(
        p_hat=successes / trials,
        n_trials=trials,
        successes=successes,
        ci_low=lo,
        ci_high=hi,
        params=dict(params or {}),
        seed=seed,
    )


def trial_rng(seed: int, tag: str, index: int) -> np.random.Generator:
    """Independent stream for one trial, stable across shard layouts."""
    key = zlib.crc32(tag.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(key, index)))


def run_trials(
    trials: int, seed: int, tag: str, trial_fn, params=None, start: int = 0
) -> Estimate:
    """Count successes of ``trial_fn(rng)`` over trial indices
    start..start+trials-1."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    succ = 0
    for i in range(start, start + trials):
        if trial_fn(trial_rng(seed, tag, i)):
            succ += 1
    return make_estimate(succ, trials, params, seed)


# ---------------------------------------------------------------------------
# direct event estimators


def estimate_crossing(
    u: float, T: float, R: int, trials: int, seed: int, *, d: int = 3,
    intrusion_tol: float = 1e-6, start: int = 0,
) -> Estimate:
    """Frequency of {B(R) joined to the 2R shell} in the soup."""
    window = Box((0,) * d, 2 * R)
    src = clusters._box_window_ids(window, window.center, R)
    dst = window.boundary_vertex_ids()

    def trial(rng):
        s = sample_fri(window, u, T, rng, intrusion_tol=intrusion_tol)
        _, slots = s.edge_events()
        eu, ev = window.edge_slot_endpoints(np.unique(slots))
        return kernels.connected_in(window.n_vertices, eu, ev, src, dst)

    params = {"u": u, "T": T, "R": R, "d": d, "intrusion_tol": intrusion_tol}
    return run_trials(trials, seed, f"crossing-R{R}", trial, params, start)


def estimate_point_to_boundary(
    u: float, T: float, R: int, trials: int, seed: int, *, d: int = 3,
    intrusion_tol: float = 1e-6, start: int = 0,
) -> Estimate:
    """Frequency of {origin joined to the R shell} in the soup."""
    params = {"u": u, "T": T, "R": R, "d": d, "intrusion_tol": intrusion_tol}
    if R == 0:
        # the origin lies on the shell; success is certain
        return make_estimate(trials, trials, params, seed)
    window = Box((0,) * d, R)
    src = np.asarray([window.vertex_ids(np.zeros((1, d), np.int64))[0]])
    dst = window.boundary_vertex_ids()

    def trial(rng):
        s = sample_fri(window, u, T, rng, intrusion_tol=intrusion_tol)
        _, slots = s.edge_events()
        eu, ev = window.edge_slot_endpoints(np.unique(slots))
        return kernels.connected_in(window.n_vertices, eu, ev, src, dst)

    return run_trials(trials, seed, f"origin-R{R}", trial, params, start)


def strong_percolation_frequency(
    u: float, T: float, R: int, trials: int, seed: int, *, d: int = 3,
    intrusion_tol: float = 1e-6, start: int = 0,
) -> Estimate:
    """Frequency of {Exist and Unique at radius R}."""
    window = Box((0,) * d, 2 * R)

    def trial(rng):
        s = sample_fri(window, u, T, rng, intrusion_tol=intrusion_tol)
        edges = s.window_edges()
        return clusters.exist_event(R, edges) and clusters.unique_event(R, edges)

    params = {"u": u, "T": T, "R": R, "d": d, "intrusion_tol": intrusion_tol}
    return run_trials(trials, seed, f"strong-R{R}", trial, params, start)


@dataclass(frozen=True)
class ScaledEstimate:
    """An Estimate rescaled by a deterministic factor (may exceed 1)."""

    base: Estimate
    scale: float

    @property
    def value(self) -> float:
        return self.base.p_hat * self.scale

    @property
    def ci_low(self) -> float:
        return self.base.ci_low * self.scale

    @property
    def ci_high(self) -> float:
        return self.base.ci_high * self.scale


def u_tilde_diagnostic(
    u: float, T: float, R: int, trials: int, seed: int, *, d: int = 3,
    intrusion_tol: float = 1e-6, start: int = 0,
) -> ScaledEstimate:
    """R^d times the frequency of {B(mu(R)) NOT joined to the R shell}."""
    if R < 3:
        raise ValueError("R must be >= 3 so that mu(R) < R")
    m = mu(R)
    if m >= R:
        raise ValueError("mu(R) must be smaller than R")
    window = Box((0,) * d, R)
    src = clusters._box_window_ids(window, window.center, m)
    dst = window.boundary_vertex_ids()

    def trial(rng):
        s = sample_fri(window, u, T, rng, intrusion_tol=intrusion_tol)
        _, slots = s.edge_events()
        eu, ev = window.edge_slot_endpoints(np.unique(slots))
        return not kernels.connected_in(window.n_vertices, eu, ev, src, dst)

    params = {
        "u": u, "T": T, "R": R, "d": d, "mu": m,
        "intrusion_tol": intrusion_tol,
    }
    base = run_trials(trials, seed, f"utilde-R{R}", trial, params, start)
    return ScaledEstimate(base=base, scale=float(R) ** d)


def coupling_agreement(
    u: float, T0: float, T: float, R: int, trials: int, seed: int, *,
    d: int = 3, intrusion_tol: float = 1e-6, start: int = 0,
) -> Estimate:
    """Frequency that the coupled soups at T0 and T have identical edge
    sets inside B(R).  The larger parameter is sampled, the smaller derived."""
    window = Box((0,) * d, R)
    T_big, T_small = max(T0, T), min(T0, T)

    def trial(rng):
        s = sample_fri(window, u, T_big, rng, intrusion_tol=intrusion_tol)
        pair = derive_from_larger_T(s, T_small, rng, intrusion_tol=intrusion_tol)
        ea = pair.source.window_edges()
        eb = pair.derived.window_edges()
        return bool(np.array_equal(ea.mask, eb.mask))

    params = {"u": u, "T0": T0, "T": T, "R": R, "d": d}
    return run_trials(trials, seed, f"couple-R{R}", trial, params, start)


# ---------------------------------------------------------------------------
# decay fit


def fit_decay(points) -> tuple:
    """(rate, r_squared) of a least-squares line through (R, log p_hat).

    ``points`` is a sequence of (R, Estimate); entries with p_hat = 0 are
    skipped with a warning.  R = 0 entries enter at probability 1 by the
    shell convention.
    """
    xs, ys = [], []
    skipped = []
    for R, est in points:
        p = est.p_hat if hasattr(est, "p_hat") else float(est)
        if p <= 0.0:
            skipped.append(R)
            continue
        xs.append(float(R))
        ys.append(float(np.log(p)))
    if skipped:
        warnings.warn(f"fit_decay skipped all-zero estimates at R = {skipped}")
    if len(xs) < 2:
        raise ValueError("fit_decay needs at least two nonzero estimates")
    x = np.asarray(xs)
    y = np.asarray(ys)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(r2)


# ---------------------------------------------------------------------------
# pooled critical-intensity machinery


def _first_crossing_label(sample, src, dst) -> float:
    """Label of the path whose arrival first connects src to dst, +inf if
    the full decorated pool never connects, 0.0 on trivial overlap."""
    window = sample.window
    walk_ids, slots = kernels.walk_edge_events(
        sample.paths.starts,
        sample.paths.lengths,
        sample.paths.dirs,
        window._center_arr,
        window.radius,
        window._strides,
    )
    n_paths = len(sample.paths)
    order = np.argsort(sample.labels, kind="stable")
    counts = np.bincount(walk_ids, minlength=n_paths)
    by_walk_off = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
    lens = counts[order]
    total = int(lens.sum())
    out_off = np.concatenate(([0], np.cumsum(lens))).astype(np.int64)
    idx = np.repeat(by_walk_off[order], lens) + (
        np.arange(total, dtype=np.int64) - np.repeat(out_off[:-1], lens)
    )
    slots_sorted = slots[idx]
    eu, ev = window.edge_slot_endpoints(slots_sorted)
    g = kernels.first_connection_index(
        window.n_vertices, eu, ev, out_off, src, dst
    )
    if g < 0:
        return np.inf
    if g == 0:
        return 0.0
    return float(sample.labels[order[g - 1]])


def crossing_label_pool(
    T: float, R: int, u_hi: float, trials: int, seed: int, *, d: int = 3,
    tag: str = "pool", intrusion_tol: float = 1e-6, event: str = "crossing",
    start: int = 0,
) -> np.ndarray:
    """Per-trial critical labels for the crossing event, from decorated
    pools at ceiling u_hi.  Entry +inf means no crossing up to u_hi."""
    if event == "crossing":
        window = Box((0,) * d, 2 * R)
        src = clusters._box_window_ids(window, window.center, R)
    elif event == "origin":
        window = Box((0,) * d, R)
        src = np.asarray([window.vertex_ids(np.zeros((1, d), np.int64))[0]])
    else:
        raise ValueError("event must be 'crossing' or 'origin'")
    dst = window.boundary_vertex_ids()
    out = np.empty(trials, dtype=np.float64)
    for i in range(trials):
        rng = trial_rng(seed, tag, start + i)
        dec = sample_decorated(
            window, u_hi, T, rng, intrusion_tol=intrusion_tol
        )
        out[i] = _first_crossing_label(dec, src, dst)
    return out


def pool_estimate(pool: np.ndarray, u: float, params=None, seed=None) -> Estimate:
    """Estimate of the event probability at intensity u from a label pool."""
    succ = int(np.sum(pool <= u))
    return make_estimate(succ, pool.shape[0], params, seed)


@dataclass(frozen=True)
class UStarProtocol:
    """Operational finite-volume critical-point protocol."""

    R_max: int
    trials: int = 1000
    threshold: float = 0.5
    tol: float = 0.01
    u_hi_init: float = 2.0
    max_doublings: int = 8
    d: int = 3
    intrusion_tol: float = 1e-6


@dataclass(frozen=True)
class UStarResult:
    """Operational critical-intensity estimate.

    ``(bisect_low, bisect_high)`` is the bisection window (width <= tol);
    ``(bracket_low, bracket_high)`` is the wider statistical bracket: the
    evaluated range over which the Wilson interval straddles the
    threshold, so it shrinks with more trials, not just smaller tol.
    """

    u_hat: float
    bisect_low: float
    bisect_high: float
    bracket_low: float
    bracket_high: float
    est_low: Estimate
    est_high: Estimate
    protocol: UStarProtocol
    pool_ceiling: float
    flags: tuple = ()

    @property
    def bracket_width(self) -> float:
        return self.bracket_high - self.bracket_low


def _wilson_bounds_vector(successes: np.ndarray, n: int, z: float = Z_95):
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2.0 * n)) / denom
    half = z * np.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom
    return np.clip(center - half, 0.0, 1.0), np.clip(center + half, 0.0, 1.0)


def estimate_u_star(
    T: float, protocol: UStarProtocol, seed: int, *, tag: str = "ustar"
) -> UStarResult:
    """Bisection of the pooled crossing curve against the threshold.

    The pool gives an exactly monotone curve, so bisection is
    deterministic; the ceiling doubles (with a fresh pool) until the top
    frequency clears the threshold.
    """
    p = protocol
    u_hi = p.u_hi_init
    flags = []
    for attempt in range(p.max_doublings + 1):
        pool = crossing_label_pool(
            T, p.R_max, u_hi, p.trials, seed,
            d=p.d, tag=f"{tag}-a{attempt}", intrusion_tol=p.intrusion_tol,
        )
        top = pool_estimate(pool, u_hi)
        if top.p_hat >= min(1.0, p.threshold + 0.1):
            break
        u_hi *= 2.0
        flags.append(f"ceiling doubled to {u_hi}")
    else:
        raise RuntimeError("crossing frequency never cleared the threshold")

    lo, hi = 0.0, u_hi
    visited = [lo, hi]
    while hi - lo > p.tol:
        mid = 0.5 * (lo + hi)
        visited.append(mid)
        if pool_estimate(pool, mid).p_hat >= p.threshold:
            hi = mid
        else:
            lo = mid

    sorted_pool = np.sort(pool[np.isfinite(pool)])
    grid = np.unique(np.concatenate(
        [np.linspace(0.0, u_hi, 513), np.asarray(visited)]
    ))
    succ = np.searchsorted(sorted_pool, grid, side="right")
    ci_lo, ci_hi = _wilson_bounds_vector(succ, pool.shape[0])
    below = grid[ci_hi < p.threshold]
    above = grid[ci_lo > p.threshold]
    b_lo = float(below.max()) if below.size else 0.0
    b_hi = float(above.min()) if above.size else u_hi
    if not above.size:
        flags.append("upper bracket endpoint hit the pool ceiling")
    if b_lo > b_hi:
        # unreachable with a single pool (monotone by construction);
        # kept as the contractually required widening path
        flags.append("non-monotone interval ordering; bracket widened")
        b_lo, b_hi = b_hi, b_lo
    est_low = pool_estimate(pool, b_lo, params={"T": T, "u": b_lo}, seed=seed)
    est_high = pool_estimate(pool, b_hi, params={"T": T, "u": b_hi}, seed=seed)

    k = int(np.ceil(p.threshold * pool.shape[0]))
    u_hat = float(sorted_pool[k - 1]) if sorted_pool.shape[0] >= k else hi
    return UStarResult(
        u_hat=u_hat,
        bisect_low=lo,
        bisect_high=hi,
        bracket_low=b_lo,
        bracket_high=b_hi,
        est_low=est_low,
        est_high=est_high,
        protocol=p,
        pool_ceiling=u_hi,
        flags=tuple(flags),
    )


@dataclass(frozen=True)
class CriticalScan:
    """Estimated critical intensity along a grid of fiber lengths."""

    T_grid: tuple
    results: tuple
    protocol: UStarProtocol
    failures: tuple = ()

    def modulus_table(self) -> list:
        """|u_hat(T_{i+1}) - u_hat(T_i)| per adjacent grid pair."""
        out = []
        for a, b, ra, rb in zip(
            self.T_grid, self.T_grid[1:], self.results, self.results[1:]
        ):
            out.append((a, b, abs(rb.u_hat - ra.u_hat)))
        return out


def continuity_scan(
    protocol: UStarProtocol, T_grid, seed: int
) -> CriticalScan:
    """Critical-intensity estimate per grid point, with failures surfaced
    instead of aborting the scan."""
    T_grid = tuple(float(T) for T in T_grid)
    if any(b <= a for a, b in zip(T_grid, T_grid[1:])):
        raise ValueError("T grid must be strictly increasing")
    results = []
    failures = []
    for i, T in enumerate(T_grid):
        try:
            results.append(
                estimate_u_star(T, protocol, seed, tag=f"cont{i}")
            )
        except RuntimeError as exc:
            failures.append((T, str(exc)))
            results.append(None)
    return CriticalScan(
        T_grid=T_grid,
        results=tuple(results),
        protocol=protocol,
        failures=tuple(failures),
    )


def t_star_scan(
    u: float, T_grid, protocol: UStarProtocol, seed: int
) -> dict:
    """Bracket the fiber length at which the critical intensity crosses u.

    Scans u_hat(T) over the grid and reports the first adjacent pair where
    u_hat - u changes sign (critical T between them), plus the full scan.
    """
    scan = continuity_scan(protocol, T_grid, seed)
    bracket = None
    usable = [
        (T, r) for T, r in zip(scan.T_grid, scan.results) if r is not None
    ]
    for (Ta, ra), (Tb, rb) in zip(usable, usable[1:]):
        if (ra.u_hat - u) * (rb.u_hat - u) <= 0.0:
            bracket = (Ta, Tb)
            break
    return {"u": u, "bracket": bracket, "scan": scan}


def crossing_curve(
    u_grid, T: float, R: int, trials: int, seed: int, *, d: int = 3,
    intrusion_tol: float = 1e-6, tag: str = "curve",
) -> list:
    """Variance-reduced crossing estimates along a u grid from one
    decorated pool: the curve is non-decreasing exactly."""
    u_grid = [float(u) for u in u_grid]
    if any(u < 0 for u in u_grid):
        raise ValueError("u grid must be nonnegative")
    u_hi = max(u_grid)
    if u_hi == 0.0:
        return [
            make_estimate(0, trials, {"u": u, "T": T, "R": R}, seed)
            for u in u_grid
        ]
    pool = crossing_label_pool(
        T, R, u_hi, trials, seed, d=d, tag=tag, intrusion_tol=intrusion_tol
    )
    return [
        pool_estimate(pool, u, params={"u": u, "T": T, "R": R}, seed=seed)
        for u in u_grid
    ]


# ---------------------------------------------------------------------------
# influence and pivotality


def influence_estimate(
    event_spec: dict, component, trials: int, seed: int, *, start: int = 0
) -> Estimate:
    """Frequency that independently resampling one coding component flips
    the noisy crossing indicator.

    ``event_spec`` carries (d, R, L, u, eps, T); ``component`` is
    ("vertex", x) or ("edge", e).
    """
    from .exploration import Coding, full_indicator

    kind, obj = component
    if kind not in ("vertex", "edge"):
        raise ValueError("component kind must be 'vertex' or 'edge'")

    def trial(rng):
        coding = Coding.from_spec(event_spec, rng.integers(0, 2**63 - 1))
        base = full_indicator(coding)
        if kind == "vertex":
            coding.resample_vertex(tuple(obj))
        else:
            coding.resample_edge(obj)
        return full_indicator(coding) != base

    params = dict(event_spec)
    params["component"] = str(component)
    return run_trials(trials, seed, "influence", trial, params, start)


def pivotal_estimate(
    chi_spec: dict, obj, R: int, trials: int, seed: int, *, start: int = 0
) -> Estimate:
    """Frequency that adding ``obj`` (a path's window edges, or one edge)
    creates the B(R)-to-2R-shell crossing absent without it."""
    from .couplings import sample_chi_t
    from .fri_process import Paths
    from .lattice import canonical_edge

    d = chi_spec["d"]
    window = Box((0,) * d, 2 * R)
    src = clusters._box_window_ids(window, window.center, R)
    dst = window.boundary_vertex_ids()

    extra = np.zeros(window.n_edge_slots, dtype=bool)
    if isinstance(obj, Paths):
        _, slots = kernels.walk_edge_events(
            obj.starts, obj.lengths, obj.dirs,
            window._center_arr, window.radius, window._strides,
        )
        extra[slots] = True
    elif isinstance(obj, tuple) and len(obj) == 2:
        e = canonical_edge(*obj)
        if window.contains_vertex(e[0]) and window.contains_vertex(e[1]):
            extra[window.edge_slot_of(e)] = True
    else:
        raise TypeError("obj must be a Paths collection or an edge pair")
    extra_slots = np.flatnonzero(extra)

    def trial(rng):
        s = sample_chi_t(
            window, chi_spec["u"], chi_spec["T"], chi_spec["t"],
            chi_spec["l_scales"], rng,
        )
        _, slots = s.edge_events()
        mask = np.zeros(window.n_edge_slots, dtype=bool)
        mask[slots] = True
        eu, ev = window.edge_slot_endpoints(np.flatnonzero(mask))
        without = kernels.connected_in(window.n_vertices, eu, ev, src, dst)
        if without:
            return False
        mask[extra_slots] = True
        eu, ev = window.edge_slot_endpoints(np.flatnonzero(mask))
        return kernels.connected_in(window.n_vertices, eu, ev, src, dst)

    params = {k: v for k, v in chi_spec.items() if k != "l_scales"}
    params["R"] = R
    return run_trials(trials, seed, "pivotal", trial, params, start)
