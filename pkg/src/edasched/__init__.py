"""Robust single-machine scheduling under uncertain delivery times.

Training phase: sample delivery vectors from an unknown distribution and
grow a population whose individuals each track one high-probability region,
finalizing every region into (local average, robust schedule, estimated
probability). Practical phase: answer a fresh instance by a linear scan for
the nearest stored average within eps and return its schedule, with a
certified approximation-ratio bound.
"""

from .core import (
    BRANCH_AND_BOUND_CAP,
    ENUMERATION_CAP,
    CapacityError,
    Instance,
    Schedule,
    SolveResult,
    StaticJobs,
    ValidationError,
    approx_scheduler,
    brute_force_optimum,
    evaluate,
    exact_branch_and_bound,
    infinity_distance,
    make_scheduler,
    max_lateness,
    schrage_heuristic,
    starting_times,
)
from .distributions import (
    CubeMixture,
    build_cube_mixture,
    make_sampler,
    sample,
    true_conditional_mean,
    true_event_of,
    true_event_probability,
)
from .eda import (
    CounterIndividual,
    FinalIndividual,
    Population,
    RegularIndividual,
    finalize_population,
    finalize_regular,
    init_counter,
    init_regular,
    mutate_counter,
    mutate_regular,
    population_invariant_violations,
    query_robust_schedule,
    run_eda,
    step,
)
from .analysis import (
    NO_GUARANTEE,
    CampaignConfig,
    CampaignResult,
    TheoryConstants,
    VerificationReport,
    approx_ratio_bound,
    chernoff_undercount_bound,
    estimate_cond_distribution,
    hoeffding_failure_bound,
    required_runtime,
    run_campaign,
    training_failure_bound,
    verify_run,
)

__version__ = "0.1.0"
