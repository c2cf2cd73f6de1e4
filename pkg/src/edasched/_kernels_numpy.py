"""Pure-numpy implementations of the schedule-evaluation kernels.

Fallback path used when numba is unavailable or disabled via
EDASCHED_NO_NUMBA=1; dispatch lives in edasched.kernels. Both backends
must produce bitwise-identical results (same floating-point operation
order), which the test suite asserts.
"""
from __future__ import annotations

import numpy as np

# Block size (array elements) for batched evaluation; keeps peak memory
# around block * 8 bytes * small constant.
_BLOCK_ELEMS = 1 << 22


def completion_times_for_perms(releases, procs, perms):
    """Processing-completion time of every position for each permutation.

    perms is (P, n) integer; entry [k, i] is the time at which the job in
    position i of permutation k finishes processing. Delivery times do not
    enter: completion times depend on releases and processing times only.
    """
    r = releases[perms]
    p = procs[perms]
    n = perms.shape[1]
    comp = np.empty_like(r)
    comp[:, 0] = r[:, 0] + p[:, 0]
    for i in range(1, n):
        comp[:, i] = np.maximum(comp[:, i - 1], r[:, i]) + p[:, i]
    return comp


def lateness_for_perms(releases, procs, delivery, perms):
    """Maximal lateness of one instance under each permutation row."""
    comp = completion_times_for_perms(releases, procs, perms)
    return np.max(comp + delivery[perms], axis=1)


def lateness_matrix(releases, procs, deliveries, perms):
    """Maximal lateness for every (delivery row, permutation) pair.

    deliveries is (B, n); returns (B, P). Completion times are shared
    across rows because they are delivery-independent.
    """
    comp = completion_times_for_perms(releases, procs, perms)
    return np.max(comp[None, :, :] + deliveries[:, perms], axis=2)


def min_lateness_for_deliveries(releases, procs, deliveries, perms):
    """Minimal maximal lateness per delivery row over a fixed permutation set.

    Returns (values, perm_indices); the index is the first row of `perms`
    attaining the minimum, so passing permutations in lexicographic order
    yields the lexicographically-first optimum.
    """
    comp = completion_times_for_perms(releases, procs, perms)
    B = deliveries.shape[0]
    P, n = perms.shape
    vals = np.empty(B)
    idxs = np.empty(B, dtype=np.int64)
    rows = max(1, _BLOCK_ELEMS // (P * n))
    for b0 in range(0, B, rows):
        d = deliveries[b0:b0 + rows]
        lam = np.max(comp[None, :, :] + d[:, perms], axis=2)
        vals[b0:b0 + rows] = lam.min(axis=1)
        idxs[b0:b0 + rows] = lam.argmin(axis=1)
    return vals, idxs
