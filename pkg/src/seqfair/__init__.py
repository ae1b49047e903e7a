"""Sequential fair division of limited resources under stochastic demand.

Offline solvers compute the hindsight-fair allocation (waterfilling for
filling-ratio utilities, Fisher-market dynamics for linear utilities);
online policies allocate one agent at a time; the metrics module scores
episodes against the fairness desiderata; the harness benchmarks policies
over seeded Monte-Carlo replications; the service exposes live sessions
over HTTP.
"""

from .core import (
    FAMILIES,
    FILLING_RATIO,
    LINEAR,
    AgentProfile,
    Instance,
    ResourceSpace,
    TypeDistribution,
    effective_size,
    instance_from_json,
    instance_to_json,
    make_instance,
    utility,
    validate_instance,
)
from .distributions import (
    SeededRng,
    bernoulli_preference_profiles,
    discretized_gaussian,
    fbst_profiles,
    sample_episode,
    truncated_poisson,
    two_point_uniform,
)
from .harness import (
    AggregateRow,
    ExperimentConfig,
    MetricRecord,
    derive_budget,
    export_csv,
    export_records_csv,
    load_config,
    run_experiment,
    run_replication,
)
from .metrics import (
    check_eclose,
    compute_record,
    delta_ef,
    delta_mm,
    delta_pe,
    delta_prop,
    delta_util,
    dist_l1,
    dist_max,
)
from .policies import (
    POLICY_IDS,
    STEP_POLICY_IDS,
    EpisodeResult,
    PolicyState,
    get_policy,
    initial_state,
    run_policy,
)
from .presets import PRESET_NAMES, preset_config
from .solvers import (
    EGSolution,
    TypeHistogram,
    brute_force_eg,
    offline_optimal,
    solve_eg,
    solve_eg_linear,
    waterfilling_threshold,
)

__version__ = "0.1.0"
