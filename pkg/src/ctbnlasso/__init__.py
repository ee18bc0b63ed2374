"""Structure learning for binary continuous-time Bayesian networks.

The pipeline: simulate or load trajectories, reduce them to sparse
sufficient statistics, solve an L1-penalized exponential-family problem
per (node, transition) over a penalty grid, select with information
criteria, threshold, and read the surviving coefficients off as edges.
"""

from .model import (
    BetaMatrix,
    CapacityError,
    ChainAnalysis,
    CtbnModel,
    InvalidModelError,
    amalgamate,
    analyze_chain,
    dummy_encode,
    make_m1,
    make_m2,
    model_from_json_dict,
    model_to_json_dict,
    rate,
    stationary_distribution,
    true_edges,
)
from .simulate import (
    Trajectory,
    replicate,
    sample_path,
    sub_seed,
    trajectory_from_json,
    trajectory_to_json,
)
from .stats import SuffStats, extract, total_jumps
from .objective import (
    DegenerateTripleError,
    TripleKey,
    TripleProblem,
    build_triple,
    grad,
    hess_quad,
    loss,
    triple_keys,
)
from .solver import FitResult, LambdaPath, SolverConfig, fista, intercept_only, lambda_max, path, soft_threshold
from .select import SelectionResult, TripleSelection, assemble_edges, bic_select, gic_threshold, select_structure
from .theory import (
    CifReport,
    TheoremBounds,
    UndefinedBoundError,
    a_beta,
    cif_diagnostic,
    cif_report,
    martingale_residual,
    occupation_tail_bound,
    sandwich_check,
    theorem_bounds,
)
from .metrics import ExperimentReport, ExperimentSpec, RecoveryScore, run_experiment, score

__version__ = "0.1.0"
