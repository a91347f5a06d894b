"""Sandpile laboratory: stabilization, potential theory, and flood dynamics
on finite weighted graphs with a designated sink."""

from .engine import (
    StabilizationResult,
    TclResult,
    UniformThreshold,
    engine_stats,
    flood_count,
    is_recurrent,
    max_stable,
    min_to_topple,
    min_to_topple_uniform,
    point_config,
    recurrent_count,
    spanning_tree_count,
    stabilize,
    tcl_exact,
    tcl_single_site,
    uniform_config,
)
from .epicenter import (
    BoundParams,
    CentralPath,
    FloodStep,
    FloodTrace,
    PathSegment,
    classify_path,
    find_central_path_grid,
    propagate,
    single_step,
    tcl_bound,
)
from .errors import (
    InternalError,
    PreconditionError,
    ResourceLimitError,
    SandlabError,
)
from .estimators import (
    EstimateReport,
    SampleRow,
    estimate_alpha,
    estimate_hlc,
    estimate_ls,
    estimate_mv,
    estimate_op,
)
from .graph_core import (
    FamilyConstants,
    Multigraph,
    SandpileGraph,
    build_sandpile,
    gen_family,
    graph_from_json,
    graph_to_json,
    grid_sandpile,
    lattice_window,
    line_sandpile,
    load_graph,
    metric_query,
    save_graph,
    strip_sandpile,
)
from .grid_special import (
    LatticeFunction,
    PreservationCheck,
    ball_capacities,
    check_preservation_lemma,
    support_sandwich,
    symmetry_flags,
)
from .potentials import (
    DualCertificate,
    PotentialField,
    PotentialLawReport,
    analytic_toppling_bounds,
    dual_threshold_bound,
    effective_resistance,
    potential_checks,
    solve_potential,
    verify_laplacian_identity,
)

__version__ = "0.1.0"

__all__ = [
    "BoundParams",
    "CentralPath",
    "DualCertificate",
    "EstimateReport",
    "FamilyConstants",
    "FloodStep",
    "FloodTrace",
    "InternalError",
    "LatticeFunction",
    "Multigraph",
    "PathSegment",
    "PotentialField",
    "PotentialLawReport",
    "PreconditionError",
    "PreservationCheck",
    "ResourceLimitError",
    "SampleRow",
    "SandlabError",
    "SandpileGraph",
    "StabilizationResult",
    "TclResult",
    "UniformThreshold",
    "analytic_toppling_bounds",
    "ball_capacities",
    "build_sandpile",
    "check_preservation_lemma",
    "classify_path",
    "dual_threshold_bound",
    "effective_resistance",
    "engine_stats",
    "estimate_alpha",
    "estimate_hlc",
    "estimate_ls",
    "estimate_mv",
    "estimate_op",
    "find_central_path_grid",
    "flood_count",
    "gen_family",
    "graph_from_json",
    "graph_to_json",
    "grid_sandpile",
    "is_recurrent",
    "lattice_window",
    "line_sandpile",
    "load_graph",
    "max_stable",
    "metric_query",
    "min_to_topple",
    "min_to_topple_uniform",
    "point_config",
    "potential_checks",
    "propagate",
    "recurrent_count",
    "save_graph",
    "single_step",
    "solve_potential",
    "spanning_tree_count",
    "stabilize",
    "strip_sandpile",
    "support_sandwich",
    "symmetry_flags",
    "tcl_bound",
    "tcl_exact",
    "tcl_single_site",
    "uniform_config",
    "verify_laplacian_identity",
]
