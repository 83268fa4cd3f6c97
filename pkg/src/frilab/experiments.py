"""Named, reproducible Monte Carlo experiments over the soup machinery.

Each experiment maps a validated configuration to schema rows
(:mod:`frilab.csvio`).  Seeding is part of the stable interface: a stream
tagged ``tag`` gives trial ``t`` the generator seeded by
``SeedSequence(master_seed, spawn_key=(crc32(tag), t))``, and exploration
codings key their components by ``(trial, kind, index, epoch)``; shard i
of n covers the contiguous trial range
``[i*trials//n, (i+1)*trials//n)``, so merged counts are bit-identical
for every shard layout, and whole rows are deterministic per
(config, seed, shards).  ``FRILAB_THREADS`` runs shards in a thread pool.
"""

from __future__ import annotations

import concurrent.futures
import configparser
import hashlib
import io
import json
import math
import os
import time
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import __version__, csvio, estimators, fkg, renorm
from .csvio import ResultRow
from .exploration import Coding, osss_check, run_algorithm_T
from .fri_process import edge_absence_probability, sample_fri, truncate
from .killed_walk import sample_lengths
from .lattice import Box, canonical_edge

MAX_WINDOW_VERTICES = 2**21


class ConfigError(ValueError):
    """The experiment configuration is invalid."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run depends on; echoed verbatim into the manifest."""

    experiment: str = ""
    d: int = 3
    u: float = 1.0
    u_grid: tuple = ()
    T: float = 1.0
    T_grid: tuple = ()
    R: tuple = (4,)
    L: int | None = None
    eps: float | None = None
    t: float | None = None
    trials: int = 100
    seed: int = 1
    shards: int = 1
    intrusion_tol: float = 1e-6
    output: str = "results.csv"
    dump_traces: str = ""

    def __post_init__(self):
        object.__setattr__(
            self, "u_grid", tuple(float(x) for x in self.u_grid)
        )
        object.__setattr__(
            self, "T_grid", tuple(float(x) for x in self.T_grid)
        )
        object.__setattr__(self, "R", tuple(int(x) for x in self.R))


# ---------------------------------------------------------------------------
# configuration text format (INI, canonical key order)

_RUN_KEYS = (
    "experiment", "trials", "seed", "shards", "intrusion_tol", "output",
    "dump_traces",
)
_MODEL_KEYS = ("d", "u", "u_grid", "T", "T_grid", "R", "L", "eps", "t")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, tuple):
        return ",".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def config_to_ini(cfg: ExperimentConfig) -> str:
    out = io.StringIO()
    out.write("[run]\n")
    for key in _RUN_KEYS:
        out.write(f"{key} = {_fmt(getattr(cfg, key))}\n")
    out.write("\n[model]\n")
    for key in _MODEL_KEYS:
        out.write(f"{key} = {_fmt(getattr(cfg, key))}\n")
    return out.getvalue()


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    try:
        if key in ("trials", "seed", "shards", "d"):
            return int(raw)
        if key in ("u", "T", "intrusion_tol"):
            return float(raw)
        if key in ("L",):
            return None if raw == "" else int(raw)
        if key in ("eps", "t"):
            return None if raw == "" else float(raw)
        if key in ("u_grid", "T_grid"):
            return tuple(
                float(tok) for tok in raw.split(",") if tok.strip()
            )
        if key == "R":
            return tuple(int(tok) for tok in raw.split(",") if tok.strip())
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return raw


def config_from_ini(
    text: str, base: ExperimentConfig | None = None
) -> ExperimentConfig:
    cp = configparser.ConfigParser()
    cp.optionxform = str  # keep T and t distinct
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    cfg = base or ExperimentConfig()
    known = {"run": _RUN_KEYS, "model": _MODEL_KEYS}
    for section in cp.sections():
        if section not in known:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in cp.items(section):
            if key not in known[section]:
                raise ConfigError(f"unknown key {key} in [{section}]")
            cfg = replace(cfg, **{key: _parse_value(key, raw)})
    return cfg


def config_from_file(path, base=None) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return config_from_ini(fh.read(), base)


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(config_to_ini(cfg).encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# sharding

def shard_ranges(trials: int, shards: int) -> list:
    """(start, count) per shard: contiguous, exhaustive, deterministic."""
    bounds = [i * trials // shards for i in range(shards + 1)]
    return [
        (bounds[i], bounds[i + 1] - bounds[i]) for i in range(shards)
    ]


def _thread_count() -> int:
    try:
        return max(1, int(os.environ.get("FRILAB_THREADS", "1")))
    except ValueError:
        return 1


def _map_shards(fn, ranges) -> list:
    """fn(start, count) per shard, in shard order."""
    jobs = [(s, c) for s, c in ranges if c > 0]
    threads = _thread_count()
    if threads > 1 and len(jobs) > 1:
        with concurrent.futures.ThreadPoolExecutor(threads) as pool:
            return list(pool.map(lambda sc: fn(*sc), jobs))
    return [fn(*sc) for sc in jobs]


# ---------------------------------------------------------------------------
# row helpers


def _row(cfg: ExperimentConfig, **kw) -> ResultRow:
    base = dict(
        experiment=cfg.experiment,
        d=cfg.d,
        u=cfg.u,
        T=cfg.T,
        R=cfg.R[0] if cfg.R else 0,
        L=None,
        eps=None,
        extra="",
        seed=cfg.seed,
        shards=cfg.shards,
        intrusion_tol=cfg.intrusion_tol,
    )
    base.update(kw)
    return ResultRow(**base)


def _estimate_row(cfg, est: estimators.Estimate, **kw) -> ResultRow:
    return _row(
        cfg,
        trials=est.n_trials,
        successes=est.successes,
        p_hat=est.p_hat,
        ci_low=est.ci_low,
        ci_high=est.ci_high,
        **kw,
    )


def _exact_row(cfg, value: float, trials: int, successes: int,
               **kw) -> ResultRow:
    return _row(
        cfg,
        trials=trials,
        successes=successes,
        p_hat=value,
        ci_low=value,
        ci_high=value,
        **kw,
    )


# ---------------------------------------------------------------------------
# runners (cfg -> rows, notes)


def _run_length_law(cfg):
    rows = []
    for T in cfg.T_grid or (cfg.T,):
        tag = f"length-law-T{T!r}"

        def draw(start, count, T=T, tag=tag):
            ks = np.empty(count, dtype=np.int64)
            for i in range(count):
                rng = estimators.trial_rng(cfg.seed, tag, start + i)
                ks[i] = sample_lengths(T, 1, rng)[0]
            return np.bincount(ks)

        parts = _map_shards(draw, shard_ranges(cfg.trials, cfg.shards))
        width = max(p.shape[0] for p in parts)
        counts = np.zeros(width, dtype=np.int64)
        for p in parts:
            counts[: p.shape[0]] += p
        for k in range(width):
            est = estimators.make_estimate(int(counts[k]), cfg.trials)
            rows.append(_estimate_row(cfg, est, T=T, R=0, extra=f"k={k}"))
    return rows, {}


def _run_edge_density(cfg):
    d = cfg.d
    window = Box((0,) * d, 2)
    e = canonical_edge((0,) * d, (1,) + (0,) * (d - 1))
    slot = window.edge_slot_of(e)
    rows = []
    for u in cfg.u_grid or (cfg.u,):
        lo_abs, hi_abs = edge_absence_probability(e, u, cfg.T, d)

        def trial(rng, u=u):
            s = sample_fri(
                window, u, cfg.T, rng, intrusion_tol=cfg.intrusion_tol
            )
            _, slots = s.edge_events()
            return bool(np.any(slots == slot))

        tag = f"edge-density-u{u!r}"
        parts = _map_shards(
            lambda start, count, tag=tag: estimators.run_trials(
                count, cfg.seed, tag, trial, start=start
            ).successes,
            shard_ranges(cfg.trials, cfg.shards),
        )
        est = estimators.make_estimate(sum(parts), cfg.trials)
        extra = f"dp_low={1.0 - hi_abs!r};dp_high={1.0 - lo_abs!r}"
        rows.append(_estimate_row(cfg, est, u=u, R=2, extra=extra))
    return rows, {}


def _run_truncation_decay(cfg):
    R0 = cfg.R[0]
    window = Box((0,) * cfg.d, R0)
    grid = list(range(2, cfg.L + 1))

    def shard(start, count):
        counts = {L: 0 for L in grid}
        for i in range(start, start + count):
            rng = estimators.trial_rng(cfg.seed, "truncation-decay", i)
            s = sample_fri(
                window, cfg.u, cfg.T, rng, intrusion_tol=cfg.intrusion_tol
            )
            _, slots = s.edge_events()
            full = np.unique(slots)
            for L in grid:
                _, t_slots = truncate(s, L).edge_events()
                if not np.array_equal(full, np.unique(t_slots)):
                    counts[L] += 1
        return counts

    parts = _map_shards(shard, shard_ranges(cfg.trials, cfg.shards))
    rows = []
    for L in grid:
        total = sum(p[L] for p in parts)
        est = estimators.make_estimate(total, cfg.trials)
        rows.append(_estimate_row(cfg, est, R=R0, L=L))
    return rows, {}


def _run_theta_curve(cfg):
    us = sorted(cfg.u_grid)
    u_hi = max(us)
    rows = []
    for R in cfg.R:
        tag = f"theta-R{R}"
        parts = _map_shards(
            lambda start, count, R=R, tag=tag: estimators.crossing_label_pool(
                cfg.T, R, u_hi, count, cfg.seed, d=cfg.d, tag=tag,
                intrusion_tol=cfg.intrusion_tol, start=start,
            ),
            shard_ranges(cfg.trials, cfg.shards),
        )
        pool = np.concatenate(parts)
        for u in us:
            est = estimators.pool_estimate(pool, u)
            rows.append(_estimate_row(
                cfg, est, u=u, R=R, extra=f"pool_ceiling={u_hi!r}"
            ))
    return rows, {}


def _protocol(cfg) -> estimators.UStarProtocol:
    u_hi = max(cfg.u_grid) if cfg.u_grid else 2.0
    return estimators.UStarProtocol(
        R_max=max(cfg.R), trials=cfg.trials, u_hi_init=u_hi,
        d=cfg.d, intrusion_tol=cfg.intrusion_tol,
    )


def _u_star_rows(cfg, res: estimators.UStarResult, T: float) -> list:
    shared = (
        f"u_hat={res.u_hat!r};bisect_low={res.bisect_low!r}"
        f";bisect_high={res.bisect_high!r}"
        f";pool_ceiling={res.pool_ceiling!r}"
    )
    if res.flags:
        shared += ";flags=" + "|".join(res.flags)
    rows = []
    for point, u, est in (
        ("bracket_low", res.bracket_low, res.est_low),
        ("bracket_high", res.bracket_high, res.est_high),
    ):
        rows.append(_estimate_row(
            cfg, est, u=u, T=T, R=res.protocol.R_max,
            extra=f"point={point};{shared}",
        ))
    return rows


def _run_u_star(cfg):
    res = estimators.estimate_u_star(cfg.T, _protocol(cfg), cfg.seed)
    return _u_star_rows(cfg, res, cfg.T), {}


def _run_continuity_scan(cfg):
    scan = estimators.continuity_scan(_protocol(cfg), cfg.T_grid, cfg.seed)
    rows = []
    for T, res in zip(scan.T_grid, scan.results):
        if res is not None:
            rows.extend(_u_star_rows(cfg, res, T))
    notes = {}
    if scan.failures:
        notes["failures"] = [
            {"T": T, "error": msg} for T, msg in scan.failures
        ]
    return rows, notes


def _run_t_star_scan(cfg):
    out = estimators.t_star_scan(
        cfg.u, cfg.T_grid, _protocol(cfg), cfg.seed
    )
    scan = out["scan"]
    bracket = out["bracket"]
    tail = (
        "t_bracket=none" if bracket is None
        else f"t_bracket_low={bracket[0]!r};t_bracket_high={bracket[1]!r}"
    )
    rows = []
    for T, res in zip(scan.T_grid, scan.results):
        if res is None:
            continue
        for row in _u_star_rows(cfg, res, T):
            rows.append(replace(
                row, extra=f"{row.extra};target_u={cfg.u!r};{tail}"
            ))
    notes = {"t_bracket": bracket}
    if scan.failures:
        notes["failures"] = [
            {"T": T, "error": msg} for T, msg in scan.failures
        ]
    return rows, notes


def _run_coupling_agreement(cfg):
    R0 = cfg.R[0]
    rows = []
    for T_src in cfg.T_grid or (cfg.T,):
        parts = _map_shards(
            lambda start, count, T_src=T_src: estimators.coupling_agreement(
                cfg.u, cfg.T, T_src, R0, count, cfg.seed,
                d=cfg.d, intrusion_tol=cfg.intrusion_tol, start=start,
            ).successes,
            shard_ranges(cfg.trials, cfg.shards),
        )
        est = estimators.make_estimate(sum(parts), cfg.trials)
        rows.append(_estimate_row(
            cfg, est, T=T_src, R=R0, extra=f"T_base={cfg.T!r}"
        ))
    return rows, {}


def _run_strong_percolation(cfg):
    rows = []
    for R in cfg.R:
        parts = _map_shards(
            lambda start, count, R=R: estimators.strong_percolation_frequency(
                cfg.u, cfg.T, R, count, cfg.seed,
                d=cfg.d, intrusion_tol=cfg.intrusion_tol, start=start,
            ).successes,
            shard_ranges(cfg.trials, cfg.shards),
        )
        est = estimators.make_estimate(sum(parts), cfg.trials)
        rows.append(_estimate_row(cfg, est, R=R))
    return rows, {}


def _run_xi_frequency(cfg):
    from .exploration import gamma_theta

    R_out = max(cfg.R)
    radii = sorted(cfg.R)

    def shard(start, count):
        freqs = gamma_theta(
            R_out, cfg.L, cfg.eps, cfg.u, cfg.T, radii, count, cfg.seed,
            d=cfg.d, start=start,
        )
        return {r: round(freqs[r] * count) for r in radii}

    parts = _map_shards(shard, shard_ranges(cfg.trials, cfg.shards))
    rows = []
    for r in radii:
        total = sum(p[r] for p in parts)
        est = estimators.make_estimate(total, cfg.trials)
        rows.append(_estimate_row(
            cfg, est, R=r, L=cfg.L, eps=cfg.eps,
            extra=f"R_window={R_out}",
        ))
    return rows, {}


def _run_osss(cfg):
    res = osss_check(
        cfg.R[0], cfg.L, cfg.eps, cfg.u, cfg.T, cfg.trials, cfg.seed,
        d=cfg.d,
    )
    n_inf = res["influence_trials"]
    successes = round(res["theta_hat"] * n_inf)
    est = estimators.make_estimate(successes, n_inf)
    extra = (
        f"var_hat={res['var_hat']!r};rhs={res['rhs']!r}"
        f";sigma={res['sigma']!r};holds={int(res['holds'])}"
        f";influence_trials={n_inf}"
    )
    row = _estimate_row(
        cfg, est, R=cfg.R[0], L=cfg.L, eps=cfg.eps, extra=extra
    )
    return [row], {"osss": {k: res[k] for k in
                            ("var_hat", "rhs", "sigma", "holds")}}


def _fkg_region(cfg) -> list:
    m = cfg.R[0]
    tail = (0,) * (cfg.d - 1)
    return [((k,) + tail, (k + 1,) + tail) for k in range(m)]


def _run_fkg(cfg):
    universe = fkg.build_universe(_fkg_region(cfg), cfg.L, cfg.u, cfg.T)
    res = fkg.fkg_check(universe, pair_budget=cfg.trials, seed=cfg.seed)
    first = universe.edges[0]
    p_edge = fkg.exact_expectation(universe, lambda es: first in es)
    extra = (
        f"min_cov={res['min_cov']!r};mode={res['mode']}"
        f";edge_count={res['edge_count']};paths={universe.n_paths}"
        f";edge_expectation={p_edge!r}"
    )
    row = _exact_row(
        cfg,
        value=res["passing"] / res["pairs"],
        trials=res["pairs"],
        successes=res["passing"],
        R=cfg.R[0], L=cfg.L, extra=extra,
    )
    return [row], {"fkg": {"min_cov": res["min_cov"], "holds": res["holds"]}}


def _run_revealment(cfg):
    R, L = cfg.R[0], cfg.L
    probe = Coding(cfg.d, R, L, u=cfg.u, T=cfg.T, eps=cfg.eps, seed=0)
    n_dump = min(10, cfg.trials) if cfg.dump_traces else 0

    def shard(start, count):
        v_counts = np.zeros(probe.v_window.n_vertices, dtype=np.int64)
        e_counts = np.zeros(probe.e_window.n_edge_slots, dtype=np.int64)
        dumped = []
        for i in range(start, start + count):
            coding = Coding(
                cfg.d, R, L, u=cfg.u, T=cfg.T, eps=cfg.eps,
                seed=cfg.seed, prefix=(i,),
            )
            trace = run_algorithm_T(
                R, L, cfg.eps, cfg.u, cfg.T, cfg.seed, d=cfg.d,
                coding=coding,
            )
            if trace.revealed_vertices:
                vids = probe.v_window.vertex_ids(
                    np.asarray(trace.revealed_vertices, dtype=np.int64)
                )
                v_counts[vids] += 1
            for e in trace.revealed_edges:
                e_counts[probe.e_window.edge_slot_of(canonical_edge(*e))] \
                    += 1
            if i < n_dump:
                dumped.append((i, trace.dump_lines()))
        return v_counts, e_counts, dumped

    parts = _map_shards(shard, shard_ranges(cfg.trials, cfg.shards))
    v_counts = sum(p[0] for p in parts)
    e_counts = sum(p[1] for p in parts)
    dumped = sorted(
        (item for p in parts for item in p[2]), key=lambda kv: kv[0]
    )

    notes = {}
    if n_dump and dumped:
        blocks = ["\n".join(lines) for _, lines in dumped]
        with open(cfg.dump_traces, "w", encoding="utf-8") as fh:
            fh.write("\n\n".join(blocks) + "\n")
        notes["trace_file"] = cfg.dump_traces
        notes["traces"] = len(dumped)

    rows = []
    for kind, counts, window in (
        ("vertex", v_counts, probe.v_window),
        ("edge", e_counts, probe.e_window),
    ):
        top = int(counts.max())
        at = int(np.argmax(counts))
        if kind == "vertex":
            coords = window.vertex_coords(np.asarray([at]))[0]
        else:
            coords = window.vertex_coords(np.asarray([at // cfg.d]))[0]
        where = "|".join(str(int(c)) for c in coords)
        est = estimators.make_estimate(top, cfg.trials)
        rows.append(_estimate_row(
            cfg, est, R=R, L=L, eps=cfg.eps,
            extra=f"kind={kind};argmax={where}",
        ))
    return rows, notes


def _run_tree_enumeration(cfg):
    # K0 = 1 is degenerate (the concentric box touches its own half-scale
    # shell, inflating the second descendant set); default to 2
    ks = renorm.KScales(K0=cfg.L or 2, k0=cfg.R[0])
    x = (0,) * cfg.d
    counts = {
        0: len(renorm.enumerate_trees(0, x, ks)),
        1: len(renorm.enumerate_trees(1, x, ks)),
    }
    notes = {}
    try:
        counts[2] = len(renorm.enumerate_trees(2, x, ks))
    except renorm.RenormError as exc:
        notes["n2_skipped"] = str(exc)
    c_min = renorm.tree_count_bound_check(counts, ks.k0, cfg.d)
    rows = []
    for n in sorted(counts):
        if n == 0:
            continue
        bound = (c_min * ks.k0 ** (2 * (cfg.d - 1))) ** (2**n)
        ratio = counts[n] / bound if bound > 0 else 1.0
        rows.append(_exact_row(
            cfg,
            value=min(ratio, 1.0),
            trials=max(counts[n], 1),
            successes=counts[n],
            R=ks.k0, L=ks.K0,
            extra=f"n={n};count={counts[n]};C={c_min!r}",
        ))
    notes.update({"tree_counts": counts, "C": c_min})
    return rows, notes


def _run_j_scales(cfg):
    js = renorm.JScales(J1=cfg.u, b=cfg.t, k_max=cfg.L)
    upper = math.exp(renorm.zeta(cfg.t))
    rows = []
    for k in range(1, cfg.L + 1):
        jk = float(js.J(k))
        base = cfg.u * 2.0 ** (k - 1)
        ratio = jk / (upper * base)
        ok = base * (1 - 1e-9) <= jk <= upper * base * (1 + 1e-9)
        rows.append(_exact_row(
            cfg,
            value=min(max(ratio, 0.0), 1.0),
            trials=1,
            successes=int(ok),
            R=0, L=k,
            extra=f"k={k};J1={cfg.u!r};b={cfg.t!r};sandwich={int(ok)}",
        ))
    return rows, {"sandwich_all": js.sandwich_holds()}


# ---------------------------------------------------------------------------
# registry


@dataclass(frozen=True)
class Experiment:
    name: str
    summary: str
    runner: object
    shardable: bool = True
    needs: tuple = ()
    window_radius: object = None
    check: object = None
    # pure-combinatorics experiments accept d = 1; soup experiments need
    # the lattice model and therefore d >= 2
    min_d: int = 2


def _wr_events(cfg):
    return 2 * max(cfg.R)


def _wr_exploration(cfg):
    return max(cfg.R) + (cfg.L or 0)


def _check_positive_R(cfg):
    if not cfg.R or any(r < 1 for r in cfg.R):
        return ["R values must be >= 1"]
    return []


def _check_osss(cfg):
    issues = _check_positive_R(cfg) + _check_exploration(cfg)
    if cfg.R and max(cfg.R) > 6:
        issues.append("osss joint Monte Carlo is guarded to R <= 6")
    if cfg.L is not None and cfg.L > 2:
        issues.append("osss joint Monte Carlo is guarded to L <= 2")
    return issues


def _check_exploration(cfg):
    issues = []
    if cfg.L is not None and cfg.L < 1:
        issues.append("L must be >= 1")
    if cfg.eps is not None and not 0.0 <= cfg.eps <= 1.0:
        issues.append("eps must lie in [0, 1]")
    return issues


def _check_fkg(cfg):
    issues = _check_positive_R(cfg)
    if issues:
        return issues
    try:
        fkg.build_universe(_fkg_region(cfg), cfg.L, 0.0, cfg.T)
    except ValueError as exc:
        issues.append(str(exc))
    return issues


def _check_trees(cfg):
    issues = []
    if cfg.R[0] < 2:
        issues.append("k0 (first R value) must be >= 2")
    if cfg.L is not None and cfg.L < 1:
        issues.append("K0 (L value) must be >= 1")
    return issues


def _check_j_scales(cfg):
    issues = []
    if cfg.t is None or not 1.0 < cfg.t <= 2.0:
        issues.append("b (t value) must lie in (1, 2]")
    if cfg.u <= 0:
        issues.append("J1 (u value) must be positive")
    if cfg.L is None or cfg.L < 1:
        issues.append("k_max (L value) must be >= 1")
    return issues


def _check_truncation(cfg):
    issues = _check_positive_R(cfg)
    if cfg.L is None or cfg.L < 2:
        issues.append("L (largest truncation) must be >= 2")
    return issues


REGISTRY = {
    exp.name: exp
    for exp in (
        Experiment(
            "length-law",
            "fiber length histogram per T (geometric law)",
            _run_length_law,
        ),
        Experiment(
            "edge-density",
            "fixed-edge traversal frequency vs the exact enclosure",
            _run_edge_density,
            window_radius=lambda cfg: 2,
        ),
        Experiment(
            "truncation-decay",
            "frequency that the L-truncation changes the window trace",
            _run_truncation_decay,
            needs=("L",),
            check=_check_truncation,
            window_radius=lambda cfg: cfg.R[0] if cfg.R else 0,
        ),
        Experiment(
            "theta-curve",
            "crossing probability over a u grid from one decorated pool",
            _run_theta_curve,
            needs=("u_grid",),
            check=_check_positive_R,
            window_radius=_wr_events,
        ),
        Experiment(
            "u-star-bisection",
            "operational critical intensity at the largest R",
            _run_u_star,
            shardable=False,
            check=_check_positive_R,
            window_radius=_wr_events,
        ),
        Experiment(
            "continuity-scan",
            "critical intensity along a T grid with straddle brackets",
            _run_continuity_scan,
            shardable=False,
            needs=("T_grid",),
            check=_check_positive_R,
            window_radius=_wr_events,
        ),
        Experiment(
            "t-star-scan",
            "bracket the T where the critical intensity crosses u",
            _run_t_star_scan,
            shardable=False,
            needs=("T_grid",),
            check=_check_positive_R,
            window_radius=_wr_events,
        ),
        Experiment(
            "coupling-agreement",
            "window agreement of the shortened larger-T sample",
            _run_coupling_agreement,
            needs=("T_grid",),
            check=_check_positive_R,
            window_radius=lambda cfg: cfg.R[0] if cfg.R else 0,
        ),
        Experiment(
            "strong-percolation",
            "existence and uniqueness event frequency per R",
            _run_strong_percolation,
            check=_check_positive_R,
            window_radius=_wr_events,
        ),
        Experiment(
            "xi-frequency",
            "noisy-soup origin-to-sphere frequency per radius",
            _run_xi_frequency,
            needs=("L", "eps"),
            check=lambda cfg: _check_positive_R(cfg)
            + _check_exploration(cfg),
            window_radius=_wr_exploration,
        ),
        Experiment(
            "osss",
            "variance vs revealment-weighted influence sum",
            _run_osss,
            shardable=False,
            needs=("L", "eps"),
            check=_check_osss,
            window_radius=_wr_exploration,
        ),
        Experiment(
            "fkg",
            "exact monotone-pair covariances on an edge-chain universe",
            _run_fkg,
            needs=("L",),
            check=_check_fkg,
        ),
        Experiment(
            "revealment",
            "per-component sampling frequency of the exploration run",
            _run_revealment,
            needs=("L", "eps"),
            check=lambda cfg: _check_positive_R(cfg)
            + _check_exploration(cfg),
            window_radius=_wr_exploration,
        ),
        Experiment(
            "tree-enumeration",
            "admissible descendant trees vs the counting bound",
            _run_tree_enumeration,
            check=_check_trees,
            min_d=1,
        ),
        Experiment(
            "j-scales",
            "doubling recursion values vs the sandwich envelope",
            _run_j_scales,
            check=_check_j_scales,
            min_d=1,
        ),
    )
}


def list_experiments() -> list:
    """(name, summary) pairs, registry order."""
    return [(e.name, e.summary) for e in REGISTRY.values()]


# ---------------------------------------------------------------------------
# validation and execution


def validate(cfg: ExperimentConfig) -> dict:
    """{"errors": [...], "warnings": [...]}; empty errors means runnable."""
    errors = []
    warnings_ = []
    if not cfg.experiment:
        errors.append("no experiment named")
    elif cfg.experiment not in REGISTRY:
        errors.append(f"unknown experiment {cfg.experiment!r}")
    min_d = REGISTRY[cfg.experiment].min_d \
        if cfg.experiment in REGISTRY else 2
    if cfg.d < min_d:
        errors.append(f"d must be >= {min_d}")
    elif cfg.d == 2 and min_d == 2:
        warnings_.append(
            "d=2 is outside the supported theory range (d >= 3)"
        )
    if not math.isfinite(cfg.u) or cfg.u < 0:
        errors.append("u must be finite and >= 0")
    if not math.isfinite(cfg.T) or cfg.T <= 0:
        errors.append("T must be finite and > 0")
    if any(not math.isfinite(x) or x < 0 for x in cfg.u_grid):
        errors.append("u_grid values must be finite and >= 0")
    if any(not math.isfinite(x) or x <= 0 for x in cfg.T_grid):
        errors.append("T_grid values must be finite and > 0")
    if any(r < 0 for r in cfg.R):
        errors.append("R values must be >= 0")
    if cfg.trials < 0:
        errors.append("trials must be >= 0")
    if not 0 <= cfg.seed < 2**64:
        errors.append("seed must be a 64-bit unsigned integer")
    if cfg.shards < 1:
        errors.append("shards must be >= 1")
    if cfg.intrusion_tol <= 0:
        errors.append("intrusion_tol must be > 0")
    if not cfg.output:
        errors.append("output path is empty")

    exp = REGISTRY.get(cfg.experiment)
    if exp is not None and not errors:
        for name in exp.needs:
            value = getattr(cfg, name)
            if value is None or (isinstance(value, tuple) and not value):
                errors.append(f"experiment {exp.name} requires {name}")
        if not exp.shardable and cfg.shards != 1:
            errors.append(
                f"experiment {exp.name} does not shard; set shards = 1"
            )
        if not errors and exp.check is not None:
            errors.extend(exp.check(cfg))
        if not errors and exp.window_radius is not None:
            r = exp.window_radius(cfg)
            if (2 * r + 1) ** cfg.d > MAX_WINDOW_VERTICES:
                errors.append(
                    f"R set needs a radius-{r} window with more than "
                    f"{MAX_WINDOW_VERTICES} vertices; window capacity "
                    "exceeded"
                )
    return {"errors": errors, "warnings": warnings_}


def run(cfg: ExperimentConfig) -> tuple:
    """Execute a validated config; returns (rows, manifest dict)."""
    diag = validate(cfg)
    if diag["errors"]:
        raise ConfigError("; ".join(diag["errors"]))
    started = time.time()
    if cfg.trials == 0:
        rows, notes = [], {"skipped": "trials=0"}
    else:
        rows, notes = REGISTRY[cfg.experiment].runner(cfg)
    manifest = {
        "schema": 1,
        "experiment": cfg.experiment,
        "config_ini": config_to_ini(cfg),
        "config_hash": config_hash(cfg),
        "code_version": __version__,
        "wall_clock_s": round(time.time() - started, 6),
        "created_utc": time.strftime(
            "%Y-%m-%dT%H:%M:%SZ", time.gmtime(started)
        ),
        "shards": [
            {"shard": i, "start": s, "trials": c}
            for i, (s, c) in enumerate(shard_ranges(cfg.trials, cfg.shards))
        ],
        "rows": len(rows),
        "incomplete_shards": [],
        "warnings": diag["warnings"],
        "notes": notes,
    }
    return rows, manifest


def _jsonable(obj):
    """Plain-Python view of runner notes (numpy scalars, tuples, ...)."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def run_to_files(cfg: ExperimentConfig) -> tuple:
    """Run and write the CSV plus its manifest; returns both paths."""
    rows, manifest = run(cfg)
    csvio.write_rows(cfg.output, rows)
    manifest_path = cfg.output + ".manifest.json"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(manifest), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return cfg.output, manifest_path, len(rows)
