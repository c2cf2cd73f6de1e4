"""Deterministic single-machine scheduling semantics.

Jobs are triples (release, processing, delivery): a job may start processing
at or after its release, jobs are processed one at a time without preemption,
and each job ships for its delivery duration immediately after processing
(deliveries overlap freely). The cost of a processing order is its maximal
lateness: the time by which every job has been delivered. This module
provides schedule evaluation, exact optimization at desk scale (full
enumeration and a Carlier-style branch and bound), and a certified greedy
fallback for larger instances.

All operations are pure functions of immutable inputs and are safe to call
concurrently on shared data.
"""
from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels

# Configuration constants (overridable per call).
ENUMERATION_CAP = 10
BRANCH_AND_BOUND_CAP = 30
_NODE_BUDGET = 2_000_000
_PERM_CHUNK = 40_320


class ValidationError(ValueError):
    """Invalid argument: malformed vector, bad permutation, bad parameter."""


class CapacityError(RuntimeError):
    """Instance exceeds a configured solver cap."""


def as_delivery_vector(q, n: Optional[int] = None, bound: Optional[float] = None) -> np.ndarray:
    """Validate and normalize a delivery-times vector to a float64 copy.

    Coordinates must be non-negative and, when `bound` is given, at most
    `bound`. When `n` is given the length must match.
    """
    arr = np.ascontiguousarray(np.asarray(q, dtype=np.float64))
    if arr.ndim != 1:
        raise ValidationError(f"delivery vector must be 1-D, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise ValidationError(f"delivery vector has length {arr.shape[0]}, expected {n}")
    if arr.size and arr.min() < 0.0:
        raise ValidationError("delivery times must be non-negative")
    if bound is not None and arr.size and arr.max() > bound:
        raise ValidationError(f"delivery times must not exceed the bound {bound}")
    return arr


@dataclass(frozen=True)
class StaticJobs:
    """Release and processing times shared by every instance of one problem.

    Delivery times vary across instances; releases and processings are fixed,
    so an instance is fully determined by its delivery vector.
    """

    releases: np.ndarray
    processings: np.ndarray

    def __post_init__(self):
        r = np.ascontiguousarray(np.asarray(self.releases, dtype=np.float64))
        p = np.ascontiguousarray(np.asarray(self.processings, dtype=np.float64))
        if r.ndim != 1 or p.ndim != 1 or r.shape != p.shape:
            raise ValidationError("releases and processings must be 1-D vectors of equal length")
        if r.shape[0] < 1:
            raise ValidationError("need at least one job")
        if r.min() < 0.0:
            raise ValidationError("release times must be non-negative")
        if p.min() <= 0.0:
            raise ValidationError("processing times must be positive")
        object.__setattr__(self, "releases", r)
        object.__setattr__(self, "processings", p)

    @property
    def n(self) -> int:
        return self.releases.shape[0]


@dataclass(frozen=True)
class Instance:
    """One scheduling instance: shared statics plus a delivery vector."""

    statics: StaticJobs
    delivery: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "delivery", as_delivery_vector(self.delivery, n=self.statics.n))

    @property
    def n(self) -> int:
        return self.statics.n

    @property
    def releases(self) -> np.ndarray:
        return self.statics.releases

    @property
    def processings(self) -> np.ndarray:
        return self.statics.processings


@dataclass
class Schedule:
    """A processing order with its evaluation artifacts."""

    perm: np.ndarray
    start_times: Optional[np.ndarray] = None
    max_lateness: Optional[float] = None
    critical_index: Optional[int] = None


@dataclass
class SolveResult:
    """Solver output: a schedule, its value, and the certified ratio.

    `certified_ratio` is an r >= 1 with value <= r * optimum; exact solvers
    certify r = 1. `certificate_met` is False only when a caller requested a
    tighter ratio than the dispatched solver can certify.
    """

    schedule: Schedule
    value: float
    certified_ratio: float
    exact: bool
    certificate_met: bool = True


def _check_perm(perm, n: int) -> np.ndarray:
    arr = np.asarray(perm, dtype=np.int64)
    if arr.ndim != 1 or arr.shape[0] != n:
        raise ValidationError(f"permutation has shape {arr.shape}, expected ({n},)")
    seen = np.zeros(n, dtype=bool)
    for j in arr:
        if j < 0 or j >= n or seen[j]:
            raise ValidationError("not a permutation of the job indices")
        seen[j] = True
    return arr


def starting_times(instance: Instance, perm) -> np.ndarray:
    """Start times under a processing order.

    s[0] is the first job's release; each later job starts when the machine
    frees up or at its own release, whichever is later. Independent of the
    delivery vector.
    """
    p_arr = _check_perm(perm, instance.n)
    r = instance.releases
    p = instance.processings
    n = instance.n
    s = np.empty(n)
    s[0] = r[p_arr[0]]
    c = s[0] + p[p_arr[0]]
    for i in range(1, n):
        j = p_arr[i]
        s[i] = c if c > r[j] else r[j]
        c = s[i] + p[j]
    return s


def evaluate(instance: Instance, perm) -> Schedule:
    """Full evaluation: start times, maximal lateness, first critical position."""
    p_arr = _check_perm(perm, instance.n)
    s = starting_times(instance, p_arr)
    lateness = (s + instance.processings[p_arr]) + instance.delivery[p_arr]
    crit = int(np.argmax(lateness))
    return Schedule(
        perm=p_arr,
        start_times=s,
        max_lateness=float(lateness[crit]),
        critical_index=crit,
    )


def max_lateness(instance: Instance, perm) -> tuple[float, int]:
    """Maximal lateness of a schedule and the first position attaining it."""
    sched = evaluate(instance, perm)
    return sched.max_lateness, sched.critical_index


def infinity_distance(a, b) -> float:
    """Largest absolute coordinate difference between two delivery vectors."""
    av = np.asarray(a, dtype=np.float64)
    bv = np.asarray(b, dtype=np.float64)
    if av.shape != bv.shape:
        raise ValidationError(f"length mismatch: {av.shape} vs {bv.shape}")
    return float(np.max(np.abs(av - bv)))


def _perm_chunks(n: int, chunk: int = _PERM_CHUNK):
    it = itertools.permutations(range(n))
    while True:
        block = list(itertools.islice(it, chunk))
        if not block:
            return
        yield np.asarray(block, dtype=np.int64)


def all_permutations(n: int) -> np.ndarray:
    """All permutations of 0..n-1 in lexicographic order, as an (n!, n) array."""
    return np.asarray(list(itertools.permutations(range(n))), dtype=np.int64)


def brute_force_optimum(instance: Instance, enum_cap: Optional[int] = None) -> SolveResult:
    """Minimal maximal lateness by full enumeration.

    Returns the lexicographically-first optimal permutation. Refuses
    instances above the enumeration cap (default ENUMERATION_CAP).
    """
    cap = ENUMERATION_CAP if enum_cap is None else enum_cap
    n = instance.n
    if n > cap:
        raise CapacityError(f"brute force limited to n <= {cap} jobs, got {n}")
    r, p, q = instance.releases, instance.processings, instance.delivery
    best_val = np.inf
    best_perm = None
    for perms in _perm_chunks(n):
        vals = kernels.lateness_for_perms(r, p, q, perms)
        k = int(np.argmin(vals))
        if vals[k] < best_val:
            best_val = float(vals[k])
            best_perm = perms[k].copy()
    sched = evaluate(instance, best_perm)
    return SolveResult(schedule=sched, value=sched.max_lateness, certified_ratio=1.0, exact=True)


def _schrage_order(r: np.ndarray, p: np.ndarray, q: np.ndarray) -> tuple[list[int], list[float]]:
    """Greedy order: among released jobs pick the largest delivery time
    (ties to the smaller index); idle until the earliest release when none
    is available. Returns (perm, start_times)."""
    n = r.shape[0]
    by_release = sorted(range(n), key=lambda j: (r[j], j))
    ready: list[tuple[float, int]] = []
    perm: list[int] = []
    starts: list[float] = []
    t = -np.inf
    i = 0
    while len(perm) < n:
        if not ready:
            t = max(t, r[by_release[i]])
        while i < n and r[by_release[i]] <= t:
            j = by_release[i]
            heapq.heappush(ready, (-q[j], j))
            i += 1
        _, j = heapq.heappop(ready)
        perm.append(j)
        starts.append(t)
        t = t + p[j]
    return perm, starts


def schrage_heuristic(instance: Instance) -> SolveResult:
    """Largest-delivery-time-first greedy schedule, certified within ratio 2."""
    perm, _ = _schrage_order(instance.releases, instance.processings, instance.delivery)
    sched = evaluate(instance, perm)
    return SolveResult(schedule=sched, value=sched.max_lateness, certified_ratio=2.0, exact=False)


def preemptive_bound(r: np.ndarray, p: np.ndarray, q: np.ndarray) -> float:
    """Optimal maximal lateness when preemption is allowed; a lower bound
    for the non-preemptive optimum. Runs largest-remaining-delivery-first
    with preemption at releases."""
    n = r.shape[0]
    order = np.argsort(r, kind="stable")
    rem = p.copy()
    ready: list[tuple[float, int]] = []
    bound = -np.inf
    t = 0.0
    i = 0
    while i < n or ready:
        if not ready:
            t = max(t, float(r[order[i]]))
        while i < n and r[order[i]] <= t:
            j = int(order[i])
            heapq.heappush(ready, (-q[j], j))
            i += 1
        _, j = heapq.heappop(ready)
        if i < n and r[order[i]] < t + rem[j]:
            nxt = float(r[order[i]])
            rem[j] -= nxt - t
            t = nxt
            heapq.heappush(ready, (-q[j], j))
        else:
            t = t + rem[j]
            rem[j] = 0.0
            done = t + q[j]
            if done > bound:
                bound = done
    return float(bound)


def _perm_value(r, p, q, perm: Sequence[int]) -> float:
    c = r[perm[0]] + p[perm[0]]
    m = c + q[perm[0]]
    for i in range(1, len(perm)):
        j = perm[i]
        base = c if c > r[j] else r[j]
        c = base + p[j]
        lam = c + q[j]
        if lam > m:
            m = lam
    return float(m)


def exact_branch_and_bound(
    instance: Instance,
    bb_cap: Optional[int] = None,
    node_budget: int = _NODE_BUDGET,
) -> SolveResult:
    """Exact optimum via branch and bound on critical-job analysis.

    Each node is a modified instance (raised releases/delivery times encoding
    precedence decisions). Upper bounds come from the greedy schedule of the
    node, lower bounds from the preemptive relaxation; branching fixes the
    critical job of the node's greedy schedule before or after the critical
    set that follows it.
    """
    cap = BRANCH_AND_BOUND_CAP if bb_cap is None else bb_cap
    n = instance.n
    if n > cap:
        raise CapacityError(f"branch and bound limited to n <= {cap} jobs, got {n}")
    r0, p0, q0 = instance.releases, instance.processings, instance.delivery

    best_val = np.inf
    best_perm: Optional[list[int]] = None

    counter = itertools.count()
    root_lb = preemptive_bound(r0, p0, q0)
    heap = [(root_lb, next(counter), r0.copy(), q0.copy())]
    nodes = 0
    while heap:
        lb, _, r, q = heapq.heappop(heap)
        if lb >= best_val:
            break  # best-first: no remaining node can improve
        nodes += 1
        if nodes > node_budget:
            raise CapacityError(f"branch and bound exceeded its node budget ({node_budget})")

        perm, starts = _schrage_order(r, p0, q)
        val_orig = _perm_value(r0, p0, q0, perm)
        if val_orig < best_val:
            best_val = val_orig
            best_perm = perm

        # Critical analysis on the node's own data.
        lateness = [starts[i] + p0[perm[i]] + q[perm[i]] for i in range(n)]
        b_pos = max(range(n), key=lambda i: (lateness[i], -i))  # first position attaining the max
        a_pos = b_pos
        while a_pos > 0 and starts[a_pos] == starts[a_pos - 1] + p0[perm[a_pos - 1]]:
            a_pos -= 1
        qb = q[perm[b_pos]]
        c_pos = -1
        for i in range(b_pos - 1, a_pos - 1, -1):
            if q[perm[i]] < qb:
                c_pos = i
                break
        if c_pos < 0:
            continue  # the node's greedy schedule is optimal for the node

        crit_jobs = [perm[i] for i in range(c_pos + 1, b_pos + 1)]
        c_job = perm[c_pos]
        sum_p = float(np.sum(p0[crit_jobs]))
        min_r = float(np.min(r[crit_jobs]))
        min_q = float(np.min(q[crit_jobs]))

        # Child 1: the critical job is processed before the whole critical set.
        q1 = q.copy()
        q1[c_job] = max(q1[c_job], sum_p + min_q)
        lb1 = max(lb, preemptive_bound(r, p0, q1))
        if lb1 < best_val:
            heapq.heappush(heap, (lb1, next(counter), r.copy(), q1))

        # Child 2: the critical job is processed after the whole critical set.
        r2 = r.copy()
        r2[c_job] = max(r2[c_job], min_r + sum_p)
        lb2 = max(lb, preemptive_bound(r2, p0, q))
        if lb2 < best_val:
            heapq.heappush(heap, (lb2, next(counter), r2, q.copy()))

    sched = evaluate(instance, best_perm)
    return SolveResult(schedule=sched, value=sched.max_lateness, certified_ratio=1.0, exact=True)


def approx_scheduler(
    instance: Instance,
    target_ratio: float,
    bb_cap: Optional[int] = None,
) -> SolveResult:
    """Schedule builder with a certified approximation ratio.

    Dispatches to the exact branch and bound when the instance is small
    enough (ratio 1, always within any target >= 1) and to the greedy
    heuristic (ratio 2) beyond; when the target is tighter than the
    certificate the result is flagged via `certificate_met=False`.
    """
    if target_ratio < 1.0:
        raise ValidationError(f"target ratio must be >= 1, got {target_ratio}")
    cap = BRANCH_AND_BOUND_CAP if bb_cap is None else bb_cap
    if instance.n <= cap:
        return exact_branch_and_bound(instance, bb_cap=cap)
    result = schrage_heuristic(instance)
    result.certificate_met = target_ratio >= result.certified_ratio
    return result


def make_scheduler(
    statics: StaticJobs,
    target_ratio: float = 2.0,
    bb_cap: Optional[int] = None,
) -> Callable[[np.ndarray], SolveResult]:
    """Bind statics and caps into a delivery-vector -> SolveResult callable."""

    def scheduler(delivery: np.ndarray) -> SolveResult:
        return approx_scheduler(Instance(statics, delivery), target_ratio, bb_cap=bb_cap)

    scheduler.statics = statics  # type: ignore[attr-defined]
    return scheduler
