"""Built-in operator scenarios and boundary-data profiles.

Scenario names are the ones accepted by the CLI config ([operator] scenario).
"""

from __future__ import annotations

import numpy as np

from .elliptic import (
    ChartMetric,
    CoefficientField,
    StencilOperator,
    assemble_beltrami,
    assemble_divergence,
)
from .errors import ConfigError
from .grid import Grid, ScalarField

_LAPLACIAN_CACHE: dict = {}


def make_laplacian(grid: Grid) -> StencilOperator:
    key = (grid.lo, grid.hi, grid.n_side)
    op = _LAPLACIAN_CACHE.get(key)
    if op is None:
        op = assemble_divergence(CoefficientField.identity(grid), grid)
        _LAPLACIAN_CACHE[key] = op
    return op


def _laplace(grid):
    return assemble_divergence(CoefficientField.identity(grid), grid)


def _smooth_c11(grid):
    c = CoefficientField.from_functions(
        grid,
        lambda x, y: 1.0 + 0.3 * np.sin(np.pi * x / 2) * np.sin(np.pi * y / 2),
        lambda x, y: 0.15 * np.sin(np.pi * x) * np.sin(np.pi * y),
        lambda x, y: 1.0 - 0.3 * np.sin(np.pi * x / 2) * np.sin(np.pi * y / 2),
    )
    return assemble_divergence(c, grid)


def _conformal(grid):
    # g = e^{2 phi} * delta with phi = 0.1 x, so Delta_g u = e^{-2 phi} Delta u.
    m = ChartMetric.from_functions(
        grid,
        lambda x, y: np.exp(0.2 * x),
        lambda x, y: 0.0 * x,
        lambda x, y: np.exp(0.2 * x),
    )
    return assemble_beltrami(m, grid)


def _diag_metric(grid):
    m = ChartMetric.from_functions(
        grid,
        lambda x, y: 4.0 + 0.0 * x,
        lambda x, y: 0.0 * x,
        lambda x, y: 1.0 + 0.0 * x,
    )
    return assemble_beltrami(m, grid)


SINGULAR_C0 = 0.3  # amplitude of the x2-dependent bulge of the engineered solution
SINGULAR_SLACK = 0.1  # complementarity slack kept on the contact column


def singular_target(grid: Grid) -> ScalarField:
    """Engineered exact solution of the singular-c11 scenario.

    Equals x^2/2 on all four box edges, vanishes exactly on the x = 0
    column, and has the pure ridge blow-up x^2/2 at the origin; the bulge
    away from the origin is what drives a genuinely nonzero, decaying
    shift S(r).
    """
    x, y = grid.coords()
    vals = x * x * (0.5 + SINGULAR_C0 * y * y * (1 - x * x) * (1 - y * y))
    return ScalarField(grid, vals)


def _singular_c11(grid):
    """Anisotropic coefficients calibrated so the engineered ridge solution
    is the exact discrete solution of the obstacle problem with data x^2/2.

    a11 is produced by a per-row flux recursion: the x-fluxes of the target
    field telescope to 1 - D_yy(target) at every off-column node, while the
    column keeps a strict complementarity slack.  a12 = 0 and a22 = 1, so the
    stencil is an M-matrix and the coefficient matrix on the column (in
    particular at the origin) is the identity.
    """
    n = grid.n_side
    if n % 2 == 0:
        raise ConfigError("singular-c11 needs an odd n_side (origin on a node)")
    if (grid.lo, grid.hi) != (-1.0, 1.0):
        raise ConfigError("singular-c11 is calibrated for the box [-1, 1]^2")
    h = grid.h
    mid = (n - 1) // 2
    W = singular_target(grid).as_matrix()

    # F = 1 - D_yy W at interior rows; the x-flux difference must equal F
    F = np.ones((n, n))
    F[:, 1:-1] = 1.0 - (W[:, 2:] - 2.0 * W[:, 1:-1] + W[:, :-2]) / (h * h)

    # flux recursion to the right of the column; sigma < 1 keeps the column
    # slack strictly positive so the contact line binds robustly
    sigma = 1.0 - SINGULAR_SLACK
    m = n - 1 - mid
    phi = np.empty((m, n))  # phi[k] = flux across the half-node mid+k+1/2
    phi[0] = 0.5 * sigma * h
    for k in range(1, m):
        phi[k] = phi[k - 1] + h * F[mid + k]
    dW = W[mid + 1:, :] - W[mid:-1, :]
    half = phi * h / dW

    # node values matching the half-node averages, anchored at 1 on the column
    a11 = np.ones((n, n))
    for k in range(m):
        a11[mid + k + 1] = 2.0 * half[k] - a11[mid + k]
    a11[:mid] = a11[mid + 1:][::-1]  # even symmetry about the column

    one = ScalarField.constant(grid, 1.0)
    zero = ScalarField.constant(grid, 0.0)
    c = CoefficientField(ScalarField(grid, a11.ravel()), zero, one)
    return assemble_divergence(c, grid)


SCENARIOS = {
    "laplace": (_laplace, "identity coefficients (5-point Laplacian)"),
    "smooth-c11": (_smooth_c11, "a = I + 0.3 sin-based smooth perturbation"),
    "conformal": (_conformal, "metric e^{2 phi} I with phi = 0.1 x"),
    "diag-metric": (_diag_metric, "constant metric diag(4, 1)"),
    "singular-c11": (
        _singular_c11,
        "near-identity coefficients preserving a degenerate contact line",
    ),
}


def scenario_names():
    return list(SCENARIOS)


def build_scenario(name: str, grid: Grid) -> StencilOperator:
    try:
        builder, _ = SCENARIOS[name]
    except KeyError:
        raise ConfigError(
            f"unknown scenario '{name}' (choose from {', '.join(SCENARIOS)})"
        ) from None
    op = builder(grid)
    op.meta["scenario"] = name
    return op


def data_ridge(grid: Grid) -> ScalarField:
    """x1^2 / 2: the 1D-in-2D profile whose contact set is the x=0 line."""
    return ScalarField.from_function(grid, lambda x, y: 0.5 * x * x)


def data_halfspace(grid: Grid) -> ScalarField:
    """max(x1, 0)^2 / 2: the half-space profile with free boundary x=0."""
    return ScalarField.from_function(grid, lambda x, y: 0.5 * np.maximum(x, 0.0) ** 2)


DATA_PROFILES = {
    "ridge": data_ridge,
    "halfspace": data_halfspace,
}
