#!/usr/bin/env python3
"""Throughput comparison of the jitted and pure-numpy kernel twins.

Spawns one worker subprocess per backend (the backend is fixed at import
time by FRILAB_BACKEND), feeds both the same pre-drawn arrays, checks the
outputs hash identically, and prints a per-kernel table.

    python3 scripts/benchmark_backends.py [--scale N] [--repeats K]
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import subprocess
import sys
import time

import numpy as np


def _inputs(scale: int) -> dict:
    """Deterministic workload: a soup-sized batch of walks in a window."""
    rng = np.random.default_rng(0)
    d, radius = 3, 12
    n_walks = 20_000 * scale
    side = 2 * radius + 1
    starts = rng.integers(-radius - 6, radius + 7, size=(n_walks, d))
    lengths = rng.geometric(0.5, size=n_walks) - 1
    dirs = rng.integers(0, 2 * d, size=int(lengths.sum()), dtype=np.uint8)
    strides = np.array([side * side, side, 1], dtype=np.int64)
    center = np.zeros(d, dtype=np.int64)
    return {
        "d": d,
        "radius": radius,
        "starts": starts.astype(np.int64),
        "lengths": lengths.astype(np.int64),
        "dirs": dirs,
        "center": center,
        "strides": strides,
        "n_vertices": side**d,
    }


def _digest(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()[:16]


def _time(fn, repeats: int) -> float:
    fn()  # warmup; includes jit compilation on the numba side
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def worker(scale: int, repeats: int) -> dict:
    from frilab import kernels
    from frilab.backend import active_backend

    w = _inputs(scale)
    results = {}

    def bench(name, fn):
        out = fn()
        results[name] = {
            "best_s": _time(fn, repeats),
            "hash": _digest(*out) if isinstance(out, tuple) else _digest(out),
        }

    bench(
        "walk_edge_events",
        lambda: kernels.walk_edge_events(
            w["starts"], w["lengths"], w["dirs"], w["center"], w["radius"],
            w["strides"],
        ),
    )
    bench(
        "walk_vertex_visits",
        lambda: kernels.walk_vertex_visits(
            w["starts"], w["lengths"], w["dirs"], w["center"], w["radius"],
            w["strides"],
        ),
    )

    _, slots = kernels.walk_edge_events(
        w["starts"], w["lengths"], w["dirs"], w["center"], w["radius"],
        w["strides"],
    )
    slots = np.unique(slots)
    eu, ev = slots // w["d"], slots // w["d"] + w["strides"][slots % w["d"]]
    n = int(w["n_vertices"])
    bench("components_labels", lambda: kernels.components_labels(n, eu, ev))

    # label-pool shape: edges grouped into walk segments, origin vs shell
    m = eu.shape[0]
    offsets = np.linspace(0, m, num=max(m // 40, 2), dtype=np.int64)
    src = np.array([n // 2], dtype=np.int64)
    dst = np.arange(0, n, 97, dtype=np.int64)
    bench(
        "first_connection_index",
        lambda: kernels.first_connection_index(n, eu, ev, offsets, src, dst),
    )

    return {"backend": active_backend(), "results": results}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scale", type=int, default=1)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--worker", action="store_true",
                        help=argparse.SUPPRESS)
    args = parser.parse_args()

    if args.worker:
        print(json.dumps(worker(args.scale, args.repeats)))
        return 0

    reports = {}
    for backend in ("numba", "numpy"):
        env = dict(os.environ, FRILAB_BACKEND=backend)
        proc = subprocess.run(
            [sys.executable, os.path.abspath(__file__), "--worker",
             "--scale", str(args.scale), "--repeats", str(args.repeats)],
            env=env, capture_output=True, text=True,
        )
        if proc.returncode != 0:
            sys.stderr.write(proc.stderr)
            return 1
        reports[backend] = json.loads(proc.stdout.strip().splitlines()[-1])

    print(f"{'kernel':<24} {'numba':>10} {'numpy':>10} {'speedup':>8}")
    agree = True
    for name in reports["numba"]["results"]:
        a = reports["numba"]["results"][name]
        b = reports["numpy"]["results"][name]
        same = a["hash"] == b["hash"]
        agree &= same
        ratio = b["best_s"] / a["best_s"] if a["best_s"] > 0 else float("inf")
        mark = "" if same else "  OUTPUT MISMATCH"
        print(
            f"{name:<24} {a['best_s'] * 1e3:>8.2f}ms {b['best_s'] * 1e3:>8.2f}ms"
            f" {ratio:>7.1f}x{mark}"
        )
    if not agree:
        print("backends disagree; see hashes above", file=sys.stderr)
        return 1
    print("outputs bit-identical across backends")
    return 0


if __name__ == "__main__":
    sys.exit(main())
