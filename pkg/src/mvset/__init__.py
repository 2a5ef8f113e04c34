"""Numerical laboratory for mean value sets of divergence-form elliptic
operators: obstacle-problem solvers, free boundary extraction, blow-up
classification, and the boundary-data shift search."""

from .elliptic import (
    ChartMetric,
    CoefficientField,
    StencilOperator,
    assemble_beltrami,
    assemble_divergence,
    check_ellipticity,
)
from .errors import (
    ConfigError,
    GeometryError,
    MvsetError,
    PreconditionError,
    SolverError,
)
from .freeboundary import (
    BlowupClassification,
    classify,
    nondegeneracy,
    rescale,
    separation,
)
from .grid import Grid, NodeSet, ScalarField, ball_nodes, dilate, make_grid
from .greens import GreenFunction, compute_green, solve_linear
from .mvs import (
    MvsFamily,
    RegionDecomposition,
    ball_bounds,
    build_family,
    converse_check,
    extract_regions,
    strict_gap,
    verify_mean_value,
    volume_identity,
)
from .obstacle import (
    ObstacleSolution,
    ShiftBoundaryProblem,
    comparison_check,
    solve_lcp,
    solve_mean_value,
    solve_shift,
)
from .scenarios import build_scenario, make_laplacian, scenario_names
from .singshift import (
    ContactStatus,
    ShiftSearchResult,
    contact_status,
    find_shift,
    normalize_at_origin,
    preservation_check,
    shift_decay,
    uniqueness_scan,
)

__version__ = "0.1.0"
