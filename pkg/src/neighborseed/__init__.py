"""Two-stage influence maximization under limited access.

Seed a small set of accessible users to recruit their (on average more
influential) neighbors, then seed those neighbors to trigger the cascade.
Provides independent-cascade simulation, reverse-reachable-set estimation,
coordinate-descent discount allocation, adaptive greedy policies, and a
brute-force oracle for verification.
"""

from .core import backend_name
from .graph import (
    Graph,
    fp_statistics,
    load_edge_list,
    neighborhood,
    owner_assignment,
    preferential_attachment,
    residual_subgraph,
    sample_accessible,
    write_edge_list,
)
from .seeding import (
    Action,
    DEFAULT_RATES,
    DiscountAllocation,
    DiscountRateSet,
    STAGE2_RATES,
    SeedProbFn,
    action_space,
    assign_profiles,
    eval_seed_prob,
    sample_seed_set,
    seed_set_probability,
)
from .diffusion import (
    DiffusionRealization,
    SpreadResult,
    monte_carlo_spread,
    propagate,
    sample_realization,
    spread_under_allocation,
)
from .estimator import (
    PairCoefficients,
    RRIndex,
    build_rr_index,
    default_theta,
    estimate_alloc_influence,
    estimate_influence,
    pair_coefficients,
    rebuild_for_residual,
)
from .nonadaptive import (
    CDConfig,
    TwoStageOutcome,
    baseline_cd_one_stage,
    baseline_im_greedy,
    baseline_rf,
    cd_pair_step,
    coordinate_descent,
    estimate_f,
    two_stage_cd,
)
from .adaptive import (
    PolicyConfig,
    SeedingHistory,
    baseline_ada,
    greedy_selection_gs,
    marginal_benefit,
    modified_greedy_mgs,
    run_policy,
    select_action,
)
from .oracle import CapacityError, ExactInstance

__version__ = "0.1.0"
