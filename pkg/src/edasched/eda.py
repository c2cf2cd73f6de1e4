"""Sampling-driven search over delivery-time vectors.

The population holds one counter individual (a multiset of every vector
ever sampled, with multiplicities) and a growing collection of regular
individuals (sequences of pairwise-close distinct vectors, each tracking
one concentration region). After training, every regular individual is
finalized: its members are weighted by observed multiplicity, the weighted
mean induces an instance, and a schedule built for that instance becomes
the robust schedule served to nearby queries.

Duplicate detection is bitwise on float64 coordinates, which is meaningful
because samplers quantize to a grid upstream.

Training is sequential by contract (each step depends on the population it
receives). Finalization of distinct regular individuals is independent;
results are ordered by regular-individual index. Finalized populations are
immutable and queries are read-only, so any number of callers may query
concurrently.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import (
    Schedule,
    SolveResult,
    StaticJobs,
    ValidationError,
    as_delivery_vector,
)


class RegularIndividual:
    """Ordered sequence of distinct delivery vectors, pairwise within eps.

    Tracks coordinate-wise lows/highs so the acceptance test for a new
    vector is O(n): a candidate is within eps of every member iff it is
    within eps of both envelope corners, and the members are pairwise
    within eps iff the envelope spans at most eps per coordinate.
    """

    __slots__ = ("members", "_keys", "_lo", "_hi")

    def __init__(self, first: np.ndarray):
        vec = np.ascontiguousarray(first, dtype=np.float64)
        self.members: list[np.ndarray] = [vec]
        self._keys = {vec.tobytes()}
        self._lo = vec.copy()
        self._hi = vec.copy()

    def __len__(self) -> int:
        return len(self.members)

    @property
    def n(self) -> int:
        return self.members[0].shape[0]

    def contains(self, q: np.ndarray) -> bool:
        return q.tobytes() in self._keys

    def member_matrix(self) -> np.ndarray:
        return np.asarray(self.members)

    def span(self) -> float:
        """Largest pairwise distance between members (envelope width)."""
        return float(np.max(self._hi - self._lo))


class CounterIndividual:
    """Every sampled vector with its multiplicity; total counts all samples."""

    __slots__ = ("vectors", "counts", "total", "_index")

    def __init__(self, first: np.ndarray):
        vec = np.ascontiguousarray(first, dtype=np.float64)
        self.vectors: list[np.ndarray] = [vec]
        self.counts: list[int] = [1]
        self.total: int = 1
        self._index: dict[bytes, int] = {vec.tobytes(): 0}

    def __len__(self) -> int:
        return len(self.vectors)

    @property
    def n(self) -> int:
        return self.vectors[0].shape[0]

    def count_of(self, q: np.ndarray) -> Optional[int]:
        idx = self._index.get(q.tobytes())
        return None if idx is None else self.counts[idx]


@dataclass
class FinalIndividual:
    """A finalized regular individual.

    `weights` are multiplicities normalized by their sum (`n_samples`), the
    mean is the weight-weighted member average, and `event_prob` estimates
    how often sampling lands on one of the members (n_samples / total).
    `value` is the schedule's maximal lateness on the instance induced by
    the mean.
    """

    members: np.ndarray
    counts: np.ndarray
    weights: np.ndarray
    mean: np.ndarray
    schedule: Schedule
    value: float
    certified_ratio: float
    exact: bool
    n_samples: int
    total: int
    event_prob: float


@dataclass
class Population:
    """Training state: one counter plus regular individuals; finals after
    finalization. `eps` is the closeness radius used throughout the run."""

    counter: CounterIndividual
    regulars: list[RegularIndividual]
    eps: float
    generation: int = 0
    finals: Optional[list[FinalIndividual]] = None
    statics: Optional[StaticJobs] = None

    @property
    def finalized(self) -> bool:
        return self.finals is not None

    def mean_matrix(self) -> np.ndarray:
        if not self.finalized:
            raise ValidationError("population is not finalized")
        return np.asarray([fi.mean for fi in self.finals])


def init_regular(q) -> RegularIndividual:
    """New regular individual holding exactly the given vector."""
    return RegularIndividual(as_delivery_vector(q))


def init_counter(q) -> CounterIndividual:
    """New counter individual with one entry of multiplicity 1."""
    return CounterIndividual(as_delivery_vector(q))


def mutate_regular(ind: RegularIndividual, q: np.ndarray, eps: float) -> bool:
    """Try to absorb a vector; True iff it was appended.

    Rejected (False, individual unchanged) when the vector already is a
    member bitwise, or when any member is farther than eps from it.
    """
    if q.shape != (ind.n,):
        raise ValidationError(f"vector has shape {q.shape}, expected ({ind.n},)")
    if ind.contains(q):
        return False
    if np.max(ind._hi - q) > eps or np.max(q - ind._lo) > eps:
        return False
    vec = np.ascontiguousarray(q, dtype=np.float64)
    ind.members.append(vec)
    ind._keys.add(vec.tobytes())
    np.minimum(ind._lo, vec, out=ind._lo)
    np.maximum(ind._hi, vec, out=ind._hi)
    return True


def mutate_counter(counter: CounterIndividual, q: np.ndarray) -> bool:
    """Record one observation; True iff the vector was never seen before.

    The total increments either way.
    """
    if q.shape != (counter.n,):
        raise ValidationError(f"vector has shape {q.shape}, expected ({counter.n},)")
    key = q.tobytes()
    idx = counter._index.get(key)
    counter.total += 1
    if idx is not None:
        counter.counts[idx] += 1
        return False
    vec = np.ascontiguousarray(q, dtype=np.float64)
    counter._index[key] = len(counter.vectors)
    counter.vectors.append(vec)
    counter.counts.append(1)
    return True


def step(pop: Population, q, eps: float) -> Population:
    """Feed one sample through the population (in place; returns pop).

    The counter always records the sample; every regular individual gets a
    chance to absorb it. A new regular individual is opened only for a
    vector that no regular absorbed and that is not already a member of
    any regular — equivalently, only first-sighted vectors left stranded
    can open one.
    """
    if pop.finalized:
        raise ValidationError("population is already finalized")
    vec = as_delivery_vector(q, n=pop.counter.n)
    mutate_counter(pop.counter, vec)
    absorbed = False
    already_member = False
    for reg in pop.regulars:
        if reg.contains(vec):
            already_member = True
        if mutate_regular(reg, vec, eps):
            absorbed = True
    if not absorbed and not already_member:
        pop.regulars.append(RegularIndividual(vec))
    pop.generation += 1
    return pop


def finalize_regular(
    reg: RegularIndividual,
    counter: CounterIndividual,
    scheduler: Callable[[np.ndarray], SolveResult],
    eps: float,
) -> FinalIndividual:
    """Turn a regular individual into a robust-schedule carrier.

    Members are weighted by their recorded multiplicities; the weighted
    mean induces the instance handed to the scheduler.
    """
    counts = []
    for m in reg.members:
        c = counter.count_of(m)
        if c is None:
            raise RuntimeError("regular-individual member missing from the counter (bug)")
        counts.append(c)
    counts_arr = np.asarray(counts, dtype=np.int64)
    n_samples = int(counts_arr.sum())
    weights = counts_arr / n_samples
    members = reg.member_matrix()
    mean = np.ascontiguousarray(np.sum(weights[:, None] * members, axis=0))
    result = scheduler(mean)
    return FinalIndividual(
        members=members,
        counts=counts_arr,
        weights=weights,
        mean=mean,
        schedule=result.schedule,
        value=result.value,
        certified_ratio=result.certified_ratio,
        exact=result.exact,
        n_samples=n_samples,
        total=counter.total,
        event_prob=n_samples / counter.total,
    )


def finalize_population(
    pop: Population,
    scheduler: Callable[[np.ndarray], SolveResult],
) -> Population:
    """Finalize every regular individual, in index order (in place)."""
    if pop.finalized:
        raise ValidationError("population is already finalized")
    pop.finals = [finalize_regular(reg, pop.counter, scheduler, pop.eps) for reg in pop.regulars]
    return pop


def run_eda(
    sampler: Callable[[np.random.Generator], np.ndarray],
    T: int,
    eps: float,
    scheduler: Callable[[np.ndarray], SolveResult],
    seed: int,
    statics: Optional[StaticJobs] = None,
    on_step: Optional[Callable[[Population], None]] = None,
) -> Population:
    """Full training run: initialize, step T times, finalize.

    Consumes T + 1 samples in total and is deterministic given the seed.
    `on_step` (when given) is called after initialization and after every
    step — used by invariant sweeps.
    """
    if T < 1:
        raise ValidationError(f"T must be >= 1, got {T}")
    if eps <= 0.0:
        raise ValidationError(f"eps must be positive, got {eps}")
    rng = np.random.default_rng(seed)
    first = as_delivery_vector(sampler(rng))
    pop = Population(
        counter=CounterIndividual(first),
        regulars=[RegularIndividual(first)],
        eps=float(eps),
        generation=0,
        statics=statics,
    )
    if on_step is not None:
        on_step(pop)
    dim = first.shape[0]
    for _ in range(T):
        q = sampler(rng)
        if np.asarray(q).shape != (dim,):
            raise ValidationError(
                f"sampler produced a vector of shape {np.asarray(q).shape}, expected ({dim},)"
            )
        step(pop, q, eps)
        if on_step is not None:
            on_step(pop)
    return finalize_population(pop, scheduler)


def query_robust_schedule(
    pop: Population, q, eps: float
) -> Optional[tuple[FinalIndividual, Schedule]]:
    """Nearest final individual within eps of the query vector, by linear
    scan over the stored means; ties go to the lower index. None when no
    individual qualifies."""
    if not pop.finalized:
        raise ValidationError("population is not finalized")
    vec = as_delivery_vector(q, n=pop.counter.n)
    best: Optional[FinalIndividual] = None
    best_dist = np.inf
    for fi in pop.finals:
        d = float(np.max(np.abs(fi.mean - vec)))
        if d < best_dist:
            best_dist = d
            best = fi
    if best is None or best_dist > eps:
        return None
    return best, best.schedule


# ---------------------------------------------------------------------------
# Invariant sweeps: full recomputation, no trust in incremental state.

def population_invariant_violations(pop: Population) -> list[str]:
    """Every invariant violation in the population, as human-readable strings.

    Recomputes everything from the raw members/counts (the incremental
    envelope state is only cross-checked, never trusted).
    """
    bad: list[str] = []
    eps = pop.eps
    counter = pop.counter

    if len(counter.vectors) != len(counter.counts):
        bad.append("counter: vectors/counts length mismatch")
    if len({v.tobytes() for v in counter.vectors}) != len(counter.vectors):
        bad.append("counter: duplicate vectors")
    if sum(counter.counts) != counter.total:
        bad.append(f"counter: total {counter.total} != sum of counts {sum(counter.counts)}")
    if any(c < 1 for c in counter.counts):
        bad.append("counter: non-positive count")

    for ri, reg in enumerate(pop.regulars):
        mm = reg.member_matrix()
        if len({m.tobytes() for m in reg.members}) != len(reg.members):
            bad.append(f"regular[{ri}]: duplicate members")
        span = float(np.max(mm.max(axis=0) - mm.min(axis=0)))
        if span > eps:
            bad.append(f"regular[{ri}]: pairwise distance {span} exceeds eps {eps}")
        if not np.array_equal(mm.min(axis=0), reg._lo) or not np.array_equal(mm.max(axis=0), reg._hi):
            bad.append(f"regular[{ri}]: stale envelope state")
        for m in reg.members:
            if counter.count_of(m) is None:
                bad.append(f"regular[{ri}]: member missing from counter")
                break

    if pop.finalized:
        for fi_idx, fi in enumerate(pop.finals):
            w = fi.weights
            if abs(float(w.sum()) - 1.0) > 1e-12:
                bad.append(f"final[{fi_idx}]: weights sum to {w.sum()!r}")
            if np.any(w <= 0.0) or np.any(w > 1.0):
                bad.append(f"final[{fi_idx}]: weight outside (0, 1]")
            recomputed = np.sum(w[:, None] * fi.members, axis=0)
            if not np.array_equal(recomputed, fi.mean):
                bad.append(f"final[{fi_idx}]: mean does not match weighted member average")
            slack = np.max(np.abs(fi.members - fi.mean), axis=1) - (1.0 - w) * eps
            if float(np.max(slack)) > 1e-12:
                bad.append(f"final[{fi_idx}]: member farther from mean than (1 - weight) * eps")
            if not 0.0 < fi.event_prob <= 1.0:
                bad.append(f"final[{fi_idx}]: event_prob {fi.event_prob} outside (0, 1]")
            if fi.n_samples != int(fi.counts.sum()):
                bad.append(f"final[{fi_idx}]: n_samples != sum of counts")
    return bad
