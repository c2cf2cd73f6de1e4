"""numba @njit implementations of the schedule-evaluation kernels.

Same contracts as edasched._kernels_numpy; no fastmath so that results
stay bitwise-identical to the numpy path.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def completion_times_for_perms(releases, procs, perms):
    P, n = perms.shape
    comp = np.empty((P, n))
    for k in range(P):
        j = perms[k, 0]
        c = releases[j] + procs[j]
        comp[k, 0] = c
        for i in range(1, n):
            j = perms[k, i]
            rj = releases[j]
            base = c if c > rj else rj
            c = base + procs[j]
            comp[k, i] = c
    return comp


@njit(cache=True)
def lateness_for_perms(releases, procs, delivery, perms):
    P, n = perms.shape
    out = np.empty(P)
    for k in range(P):
        j = perms[k, 0]
        c = releases[j] + procs[j]
        m = c + delivery[j]
        for i in range(1, n):
            j = perms[k, i]
            rj = releases[j]
            base = c if c > rj else rj
            c = base + procs[j]
            lam = c + delivery[j]
            if lam > m:
                m = lam
        out[k] = m
    return out


@njit(cache=True)
def lateness_matrix(releases, procs, deliveries, perms):
    comp = completion_times_for_perms(releases, procs, perms)
    B = deliveries.shape[0]
    P, n = perms.shape
    out = np.empty((B, P))
    for b in range(B):
        for k in range(P):
            m = comp[k, 0] + deliveries[b, perms[k, 0]]
            for i in range(1, n):
                lam = comp[k, i] + deliveries[b, perms[k, i]]
                if lam > m:
                    m = lam
            out[b, k] = m
    return out


@njit(cache=True)
def min_lateness_for_deliveries(releases, procs, deliveries, perms):
    comp = completion_times_for_perms(releases, procs, perms)
    B = deliveries.shape[0]
    P, n = perms.shape
    vals = np.empty(B)
    idxs = np.empty(B, dtype=np.int64)
    for b in range(B):
        best = np.inf
        bi = 0
        for k in range(P):
            m = comp[k, 0] + deliveries[b, perms[k, 0]]
            for i in range(1, n):
                lam = comp[k, i] + deliveries[b, perms[k, i]]
                if lam > m:
                    m = lam
            if m < best:
                best = m
                bi = k
        vals[b] = best
        idxs[b] = bi
    return vals, idxs
