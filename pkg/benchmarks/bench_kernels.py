#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Imports both backends directly (independent of the EDASCHED_NO_NUMBA
dispatch), checks that they agree bitwise, and reports timings. The first
numba call includes JIT compilation; a warm-up round is run before timing.
"""
from __future__ import annotations

import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from edasched import _kernels_numpy as np_impl  # noqa: E402
from edasched.core import all_permutations  # noqa: E402

try:
    from edasched import _kernels_numba as nb_impl
except ImportError:
    nb_impl = None


def timed(fn, *args, repeats=3):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return out, best


def main() -> int:
    rng = np.random.default_rng(7)
    n = 8
    perms = all_permutations(n)
    r = rng.uniform(0, 10, n)
    p = rng.uniform(0.5, 3, n)
    q = rng.uniform(0, 10, n)
    Q = rng.uniform(0, 10, (256, n))

    cases = [
        ("lateness_for_perms (8! perms)", "lateness_for_perms", (r, p, q, perms)),
        ("lateness_matrix (256 x 8!)", "lateness_matrix", (r, p, Q, perms)),
        ("min_lateness_for_deliveries (256 x 8!)", "min_lateness_for_deliveries", (r, p, Q, perms)),
    ]

    print(f"{'kernel':45s} {'numpy':>10s} {'numba':>10s} {'speedup':>8s}")
    for label, name, args in cases:
        np_fn = getattr(np_impl, name)
        np_out, np_t = timed(np_fn, *args)
        if nb_impl is None:
            print(f"{label:45s} {np_t * 1e3:9.2f}ms   (numba unavailable)")
            continue
        nb_fn = getattr(nb_impl, name)
        nb_fn(*args)  # warm-up: JIT compile
        nb_out, nb_t = timed(nb_fn, *args)
        if isinstance(np_out, tuple):
            same = all(np.array_equal(a, b) for a, b in zip(np_out, nb_out))
        else:
            same = np.array_equal(np_out, nb_out)
        if not same:
            print(f"{label:45s} BACKEND MISMATCH")
            return 1
        print(f"{label:45s} {np_t * 1e3:9.2f}ms {nb_t * 1e3:9.2f}ms {np_t / nb_t:7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
