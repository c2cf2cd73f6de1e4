"""Bound formulas, ground-truth verification, and Monte Carlo campaigns.

The bound formulas tie together the configured growth exponents (event
count, delivery bound, sample target) into a required training length, a
failure-probability bound for training runs of that length, and an
approximation-ratio guarantee for answered queries. `verify_run` scores a
finalized population against the mixture that produced it; `run_campaign`
repeats the whole pipeline over seeded replications and aggregates.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .core import (
    ENUMERATION_CAP,
    StaticJobs,
    ValidationError,
    all_permutations,
    make_scheduler,
)
from .distributions import (
    CubeMixture,
    build_cube_mixture,
    make_sampler,
    sample,
    true_conditional_mean,
    true_event_probability,
)
from .eda import (
    Population,
    population_invariant_violations,
    query_robust_schedule,
    run_eda,
)

#: Unbounded sentinel returned by approx_ratio_bound when no guarantee holds.
NO_GUARANTEE = math.inf

#: Logged in every campaign report header: how the second failure term is
#: computed (the vector concentration bound at the configured sample target
#: and delivery bound, which gives exponent -2*delta^2*n^l/const2^2).
FAILURE_BOUND_NOTE = (
    "second failure term = 2*n*exp(-2*delta^2*n^l/const2^2): the vector "
    "concentration bound evaluated at k = n^(2d+l) samples and delivery "
    "bound M = const2*n^d"
)


@dataclass(frozen=True)
class TheoryConstants:
    """Parameters feeding the runtime and failure-probability formulas.

    n      problem size (jobs = vector dimension)
    c      growth exponent of the event count: f(n) <= const1 * n^c
    d      growth exponent of the delivery bound: M_n <= const2 * n^d
    l      sample-target exponent: k = n^(2d+l) samples per event
    alpha  undercount slack in (0, 1); larger -> longer runs, smaller risk
    delta  tolerated local-average estimation error
    eps    concentration-cube side / query radius
    const  event-probability floor scale: min prob >= const / f(n)
    """

    n: int
    c: float
    d: float
    l: float
    alpha: float
    delta: float
    eps: float
    const: float
    const1: float
    const2: float

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError(f"n must be >= 1, got {self.n}")
        if self.c < 0 or self.d < 0:
            raise ValidationError("exponents c and d must be >= 0")
        if self.l <= 0:
            raise ValidationError(f"l must be positive, got {self.l}")
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.delta <= 0 or self.eps <= 0:
            raise ValidationError("delta and eps must be positive")
        if self.const <= 0 or self.const1 <= 0 or self.const2 <= 0:
            raise ValidationError("const, const1 and const2 must be positive")

    @property
    def event_count_bound(self) -> float:
        """Upper bound on the number of concentration events, const1 * n^c."""
        return self.const1 * self.n ** self.c

    @property
    def delivery_bound(self) -> float:
        """Upper bound on delivery times, const2 * n^d."""
        return self.const2 * self.n ** self.d

    @property
    def sample_target(self) -> float:
        """Per-event sample count the run is dimensioned for, n^(2d+l)."""
        return self.n ** (2.0 * self.d + self.l)


def required_runtime(tc: TheoryConstants) -> int:
    """Training length sufficient for the failure bound:
    ceil(const1 / ((1-alpha)*const) * n^(2d+l+c))."""
    raw = tc.const1 / ((1.0 - tc.alpha) * tc.const) * tc.n ** (2.0 * tc.d + tc.l + tc.c)
    return int(math.ceil(raw))


def hoeffding_failure_bound(n: int, k: float, delta: float, M: float) -> float:
    """Probability bound 2n*exp(-2k*delta^2/M^2) that the coordinate-wise
    sample mean of k i.i.d. vectors bounded by M misses the true mean by
    at least delta in the max-coordinate norm. The raw value is returned;
    clamp to [0, 1] when consuming it as a probability."""
    if k < 0:
        raise ValidationError(f"k must be >= 0, got {k}")
    if delta <= 0 or M <= 0:
        raise ValidationError("delta and M must be positive")
    return 2.0 * n * math.exp(-2.0 * k * delta * delta / (M * M))


def chernoff_undercount_bound(k: float, alpha: float) -> float:
    """Probability bound exp(-k*alpha^2/(2*(1-alpha))) that a binomial
    dimensioned to mean k/(1-alpha) stays below k."""
    if k < 0:
        raise ValidationError(f"k must be >= 0, got {k}")
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must be in (0, 1), got {alpha}")
    return math.exp(-k * alpha * alpha / (2.0 * (1.0 - alpha)))


def training_failure_bound(tc: TheoryConstants) -> float:
    """Bound on the probability that a run of required_runtime(tc) leaves
    some event uncovered or estimates some local average off by delta.

    Composed as event_count_bound * undercount bound at the sample target,
    plus the vector concentration bound at that target (see
    FAILURE_BOUND_NOTE). May exceed 1 for small n; report writers flag that
    as vacuous rather than clamping."""
    k = tc.sample_target
    term1 = tc.event_count_bound * chernoff_undercount_bound(k, tc.alpha)
    term2 = hoeffding_failure_bound(tc.n, k, tc.delta, tc.delivery_bound)
    return term1 + term2


def approx_ratio_bound(J_bar_max: float, cert_ratio: float, eps: float, delta: float) -> float:
    """Worst-case ratio (measured lateness / optimum) certified for any
    instance whose delivery vector is within eps + delta of the schedule's
    home vector: (J + eps + delta) / (J/r - eps - delta).

    Returns NO_GUARANTEE (inf) when the denominator is not positive."""
    if cert_ratio < 1.0:
        raise ValidationError(f"certified ratio must be >= 1, got {cert_ratio}")
    denom = (1.0 / cert_ratio) * J_bar_max - eps - delta
    if denom <= 0.0:
        return NO_GUARANTEE
    return (J_bar_max + eps + delta) / denom


def estimate_cond_distribution(fi) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of the discrete distribution a final individual
    carries (members weighted by their multiplicities)."""
    centered = fi.members - fi.mean
    # weighted sum of outer products; each outer product is bitwise
    # symmetric, so the sum is too
    outer = centered[:, :, None] * centered[:, None, :]
    cov = np.sum(fi.weights[:, None, None] * outer, axis=0)
    return fi.mean.copy(), cov


@dataclass
class VerificationReport:
    """Scorecard of one finalized population against its ground truth."""

    uncovered_events: list[int]
    mean_errors: dict[int, float]
    mean_error_threshold: float
    coverage_rate: float
    event_prob_errors: dict[int, float]
    event_true_probs: dict[int, float]
    event_sample_counts: dict[int, int]
    n_fresh: int
    n_answered: int
    n_ratio_checked: int
    ratio_violations: int
    max_ratio: float
    ratio_bound_at_max: float

    @property
    def any_event_uncovered(self) -> bool:
        return bool(self.uncovered_events)

    @property
    def any_mean_error_large(self) -> bool:
        return any(e >= self.mean_error_threshold for e in self.mean_errors.values())

    @property
    def max_mean_error(self) -> float:
        return max(self.mean_errors.values()) if self.mean_errors else math.nan

    @property
    def max_prob_error(self) -> float:
        return max(self.event_prob_errors.values()) if self.event_prob_errors else math.nan


def _event_of_members(members: np.ndarray, mixture: CubeMixture) -> Optional[int]:
    """Common smallest-index cube of all member vectors, or None."""
    inside = np.all(
        (members[:, None, :] >= mixture.lows[None, :, :])
        & (members[:, None, :] <= mixture.highs[None, :, :]),
        axis=2,
    )
    any_hit = inside.any(axis=1)
    if not any_hit.all():
        return None
    first = inside.argmax(axis=1)
    if np.all(first == first[0]):
        return int(first[0])
    return None


def verify_run(
    pop: Population,
    mixture: CubeMixture,
    tc: TheoryConstants,
    m_fresh: int,
    rng: np.random.Generator,
    enum_cap: Optional[int] = None,
) -> VerificationReport:
    """Score a finalized population against the mixture that trained it.

    Checks event coverage (does every cube own a final individual whose
    members all lie inside it), local-average estimation errors against the
    exact conditional means, event-probability estimates, and — for fresh
    samples answered by the query — measured approximation ratios against
    the certified bound (exact optima by brute force, so only when the
    dimension is within the enumeration cap).
    """
    if not pop.finalized:
        raise ValidationError("population is not finalized")
    if pop.counter.n != mixture.n:
        raise ValidationError(
            f"population dimension {pop.counter.n} != mixture dimension {mixture.n}"
        )
    if pop.statics is None:
        raise ValidationError("population carries no statics; cannot evaluate schedules")
    cap = ENUMERATION_CAP if enum_cap is None else enum_cap

    correspondence: dict[int, list[int]] = {}
    for fi_idx, fi in enumerate(pop.finals):
        ev = _event_of_members(fi.members, mixture)
        if ev is not None:
            correspondence.setdefault(ev, []).append(fi_idx)
    uncovered = [j for j in range(mixture.f) if j not in correspondence]

    mean_errors: dict[int, float] = {}
    event_prob_errors: dict[int, float] = {}
    event_true_probs: dict[int, float] = {}
    event_sample_counts: dict[int, int] = {}
    for ev, fi_idxs in sorted(correspondence.items()):
        mu = true_conditional_mean(mixture, ev)
        mean_errors[ev] = max(
            float(np.max(np.abs(pop.finals[i].mean - mu))) for i in fi_idxs
        )
        main = max(fi_idxs, key=lambda i: pop.finals[i].n_samples)
        true_p = true_event_probability(mixture, ev)
        event_true_probs[ev] = true_p
        event_prob_errors[ev] = abs(pop.finals[main].event_prob - true_p)
        event_sample_counts[ev] = pop.finals[main].n_samples

    # Fresh-sample coverage and ratio soundness.
    final_index = {id(fi): i for i, fi in enumerate(pop.finals)}
    answered_by_final: dict[int, list[np.ndarray]] = {}
    n_answered = 0
    for _ in range(m_fresh):
        q, _comp = sample(mixture, rng)
        hit = query_robust_schedule(pop, q, tc.eps)
        if hit is None:
            continue
        n_answered += 1
        answered_by_final.setdefault(final_index[id(hit[0])], []).append(q)
    coverage_rate = n_answered / m_fresh if m_fresh else 0.0

    n_checked = 0
    ratio_violations = 0
    max_ratio = math.nan
    bound_at_max = math.nan
    if answered_by_final and mixture.n <= cap:
        r = pop.statics.releases
        p = pop.statics.processings
        perms = all_permutations(mixture.n)
        for fi_idx in sorted(answered_by_final):
            fi = pop.finals[fi_idx]
            Q = np.asarray(answered_by_final[fi_idx])
            opt_vals, _ = kernels.min_lateness_for_deliveries(r, p, Q, perms)
            perm_row = fi.schedule.perm.reshape(1, -1)
            sched_vals = kernels.lateness_matrix(r, p, Q, perm_row)[:, 0]
            bound = approx_ratio_bound(fi.value, fi.certified_ratio, tc.eps, tc.delta)
            ratios = sched_vals / opt_vals
            n_checked += ratios.shape[0]
            ratio_violations += int(np.sum(ratios > bound))
            k = int(np.argmax(ratios))
            if math.isnan(max_ratio) or ratios[k] > max_ratio:
                max_ratio = float(ratios[k])
                bound_at_max = bound

    return VerificationReport(
        uncovered_events=uncovered,
        mean_errors=mean_errors,
        mean_error_threshold=tc.delta,
        coverage_rate=coverage_rate,
        event_prob_errors=event_prob_errors,
        event_true_probs=event_true_probs,
        event_sample_counts=event_sample_counts,
        n_fresh=m_fresh,
        n_answered=n_answered,
        n_ratio_checked=n_checked,
        ratio_violations=ratio_violations,
        max_ratio=max_ratio,
        ratio_bound_at_max=bound_at_max,
    )


def default_statics(
    n: int,
    release_max: float,
    proc_min: float,
    proc_max: float,
    seed: int,
) -> StaticJobs:
    """Seeded random statics for campaigns and CLI defaults."""
    rng = np.random.default_rng(seed)
    return StaticJobs(
        releases=rng.uniform(0.0, release_max, n),
        processings=rng.uniform(proc_min, proc_max, n),
    )


@dataclass
class CampaignConfig:
    """Everything a replicated train-and-verify campaign needs.

    Mixture geometry and theory constants share n, eps and const. Unset
    statics ranges default to release_max = bound, processings in
    [0.05, 0.2] * bound. `sweep_invariants` recomputes and counts every
    population invariant after every step (slow; meant for small runs).
    """

    n: int
    events: int
    eps: float
    bound: float
    const: float
    alpha: float
    delta: float
    l: float
    c: float
    d: float
    const1: float
    const2: float
    replications: int
    master_seed: int
    tail_mass: float = 0.02
    law: str = "uniform"
    grid: object = "auto"
    separated: bool = True
    sigma: Optional[float] = None
    m_fresh: int = 10_000
    t_override: Optional[int] = None
    sample_cap: Optional[int] = None
    target_ratio: float = 2.0
    enum_cap: Optional[int] = None
    bb_cap: Optional[int] = None
    release_max: Optional[float] = None
    proc_min: Optional[float] = None
    proc_max: Optional[float] = None
    vary_mixture: bool = True
    sweep_invariants: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.replications < 1:
            raise ValidationError("need at least one replication")
        if self.t_override is not None and self.t_override < 1:
            raise ValidationError("t_override must be >= 1 when given")
        if self.master_seed is None:
            raise ValidationError("a master seed is mandatory")

    def theory(self) -> TheoryConstants:
        return TheoryConstants(
            n=self.n, c=self.c, d=self.d, l=self.l, alpha=self.alpha,
            delta=self.delta, eps=self.eps, const=self.const,
            const1=self.const1, const2=self.const2,
        )

    def training_length(self) -> int:
        T = self.t_override if self.t_override is not None else required_runtime(self.theory())
        if self.sample_cap is not None:
            T = min(T, self.sample_cap)
        return T


#: CSV schema of one campaign row, in order.
CAMPAIGN_COLUMNS = (
    "replication", "seed", "T", "u1", "u2", "coverage_rate", "max_mean_err",
    "max_prob_err", "max_ratio", "ratio_bound", "theory_bound", "vacuous_flag",
)


@dataclass
class CampaignRow:
    replication: int
    seed: int
    T: int
    u1: int
    u2: int
    coverage_rate: float
    max_mean_err: float
    max_prob_err: float
    max_ratio: float
    ratio_bound: float
    theory_bound: float
    vacuous_flag: int

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, c) for c in CAMPAIGN_COLUMNS)


@dataclass
class CampaignResult:
    rows: list[CampaignRow]
    reports: list[VerificationReport]
    aggregate: dict
    sweep_violations: list[int] = field(default_factory=list)
    note: str = FAILURE_BOUND_NOTE


def _derived_seed(master_seed: int, replication: int, salt: int) -> int:
    return int(np.random.SeedSequence([master_seed, replication, salt]).generate_state(1)[0])


def _run_replication(cfg: CampaignConfig, rep: int) -> tuple[CampaignRow, VerificationReport, int]:
    tc = cfg.theory()
    mix_seed = _derived_seed(cfg.master_seed, rep if cfg.vary_mixture else 0, 0)
    run_seed = _derived_seed(cfg.master_seed, rep, 1)
    statics_seed = _derived_seed(cfg.master_seed, rep, 2)

    mixture = build_cube_mixture(
        n=cfg.n, f=cfg.events, eps=cfg.eps, M=cfg.bound, const=cfg.const,
        tail_mass=cfg.tail_mass, law=cfg.law, grid=cfg.grid, seed=mix_seed,
        separated=cfg.separated, sigma=cfg.sigma,
    )
    release_max = cfg.bound if cfg.release_max is None else cfg.release_max
    proc_min = 0.05 * cfg.bound if cfg.proc_min is None else cfg.proc_min
    proc_max = 0.2 * cfg.bound if cfg.proc_max is None else cfg.proc_max
    statics = default_statics(cfg.n, release_max, proc_min, proc_max, statics_seed)
    scheduler = make_scheduler(statics, cfg.target_ratio, bb_cap=cfg.bb_cap)

    violations = 0
    on_step = None
    if cfg.sweep_invariants:
        def on_step(pop):  # noqa: ANN001
            nonlocal violations
            violations += len(population_invariant_violations(pop))

    T = cfg.training_length()
    pop = run_eda(
        make_sampler(mixture), T, cfg.eps, scheduler, run_seed,
        statics=statics, on_step=on_step,
    )
    if cfg.sweep_invariants:
        violations += len(population_invariant_violations(pop))

    fresh_rng = np.random.default_rng(np.random.SeedSequence([cfg.master_seed, rep, 3]))
    report = verify_run(pop, mixture, tc, cfg.m_fresh, fresh_rng, enum_cap=cfg.enum_cap)

    bound = training_failure_bound(tc)
    row = CampaignRow(
        replication=rep,
        seed=run_seed,
        T=T,
        u1=int(report.any_event_uncovered),
        u2=int(report.any_mean_error_large),
        coverage_rate=report.coverage_rate,
        max_mean_err=report.max_mean_error,
        max_prob_err=report.max_prob_error,
        max_ratio=report.max_ratio,
        ratio_bound=report.ratio_bound_at_max,
        theory_bound=bound,
        vacuous_flag=int(bound >= 1.0),
    )
    return row, report, violations


def run_campaign(cfg: CampaignConfig) -> CampaignResult:
    """Replicated pipeline: build mixture, train, verify; fold results in
    replication order. Replications are independent (per-replication RNG
    streams derived from the master seed), so the outcome does not depend
    on execution order or worker count."""
    reps = range(cfg.replications)
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(lambda i: _run_replication(cfg, i), reps))
    else:
        results = [_run_replication(cfg, i) for i in reps]

    rows = [r[0] for r in results]
    reports = [r[1] for r in results]
    sweeps = [r[2] for r in results]

    failures = sum(1 for r in rows if r.u1 or r.u2)
    prob_cells = [e for rep in reports for e in rep.event_prob_errors.values()]
    aggregate = {
        "replications": cfg.replications,
        "empirical_failure_rate": failures / cfg.replications,
        "theory_bound": rows[0].theory_bound,
        "theory_bound_vacuous": bool(rows[0].vacuous_flag),
        "mean_coverage": float(np.mean([r.coverage_rate for r in rows])),
        "min_coverage": float(np.min([r.coverage_rate for r in rows])),
        "frac_all_events_covered": sum(1 for r in rows if not r.u1) / cfg.replications,
        "frac_mean_errors_ok": sum(1 for r in rows if not r.u2) / cfg.replications,
        "ratio_checks_total": int(sum(rep.n_ratio_checked for rep in reports)),
        "ratio_violations_total": int(sum(rep.ratio_violations for rep in reports)),
        "mean_abs_prob_error": float(np.mean(prob_cells)) if prob_cells else math.nan,
        "invariant_violations_total": int(sum(sweeps)),
    }
    return CampaignResult(rows=rows, reports=reports, aggregate=aggregate, sweep_violations=sweeps)
