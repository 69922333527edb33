"""Random k-XORSAT laboratory.

Instance generation and GF(2) structure, three decimation algorithms with
their coupling, exact three-valued message passing, the analytic phase
theory, and a deterministic Monte Carlo harness comparing the two.
"""

from .formula import (
    Clause,
    FactorGraph,
    InvalidParameters,
    SubstitutionStatus,
    XorsatFormula,
    generate_random,
    neighborhood,
    substitute,
)
from .gf2 import (
    CheckSystem,
    KernelReport,
    RrefBasis,
    UnsatisfiableError,
    build_check_system,
    exact_marginal,
    null_variables,
    reduce_system,
    sample_uniform_solution,
    sparse_null_variables,
    sparse_rank,
    sparse_solve,
)
from .algorithms import (
    CoupledRun,
    Outcome,
    TrialTrace,
    compare_guided_traces,
    coupled_run,
    find_toxic_cycles,
    has_toxic_cycle,
    run_bpgd,
    run_decimation,
    run_ucp,
    shared_bits,
)
from .message_passing import (
    BpEngine,
    EdgeLayout,
    MarkSets,
    WpEngine,
    bp_marginal,
    check_bp_wp_equivalence,
    wp_run,
)
from .analytic import (
    DecimationThresholds,
    FixedPointReport,
    ModelParams,
    OutOfRegimeError,
    Thresholds,
    TrajectoryPrediction,
    conflict_rate,
    d_min,
    expected_conflicts,
    expected_conflicts_from_trajectory,
    fixed_point_map,
    free_entropy,
    free_entropy_slope,
    lambda_cond,
    lambda_cond_curve,
    nullity_prediction,
    solve_fixed_points,
    success_probability,
    tangency_roots,
    thresholds,
    thresholds_at,
    tree_mark_recursion,
    ucp_trajectory_prediction,
)
from .xnf import XnfParseError, format_xnf, read_xnf, write_xnf

__version__ = "0.1.0"
