"""Discrete divergence-form operators and chart Laplace-Beltrami operators.

Both assemble to the same weighted flux stencil

    (S u)_k = sum_j  D_i ( c^{ij} D_j u )   at node k,

where c = a for a divergence-form operator L = D_j a^{ij} D_i (node weight
rho = 1), and c^{ij} = sqrt(det g) * g^{ij}, rho = sqrt(det g) for the
Laplace-Beltrami operator, so that S u = rho * Delta_g u.

Diagonal terms use midpoint-averaged coefficients at half-nodes; the cross
term uses centered second-order mixed differences, which keeps the matrix
exactly symmetric and row sums exactly zero on interior rows.  Boundary rows
are identity rows; boundary values are applied through the right-hand side.
"""

from __future__ import annotations

import dataclasses

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import PreconditionError
from .grid import Grid, NodeSet, ScalarField


@dataclasses.dataclass(frozen=True)
class CoefficientField:
    """Symmetric coefficient matrix field a^{ij} with cached ellipticity bounds."""

    a11: ScalarField
    a12: ScalarField
    a22: ScalarField
    lambda_min: float = dataclasses.field(init=False)
    lambda_max: float = dataclasses.field(init=False)

    def __post_init__(self):
        g = self.a11.grid
        if self.a12.grid != g or self.a22.grid != g:
            raise PreconditionError("coefficient fields live on different grids")
        lam, Lam = check_ellipticity_values(
            self.a11.values, self.a12.values, self.a22.values, g
        )
        object.__setattr__(self, "lambda_min", lam)
        object.__setattr__(self, "lambda_max", Lam)

    @property
    def grid(self) -> Grid:
        return self.a11.grid

    @classmethod
    def identity(cls, grid: Grid) -> "CoefficientField":
        one = ScalarField.constant(grid, 1.0)
        zero = ScalarField.constant(grid, 0.0)
        return cls(one, zero, one)

    @classmethod
    def from_functions(cls, grid: Grid, f11, f12, f22) -> "CoefficientField":
        return cls(
            ScalarField.from_function(grid, f11),
            ScalarField.from_function(grid, f12),
            ScalarField.from_function(grid, f22),
        )


def check_ellipticity_values(a11, a12, a22, grid: Grid):
    mean = 0.5 * (a11 + a22)
    disc = np.sqrt((0.5 * (a11 - a22)) ** 2 + a12 ** 2)
    lam = mean - disc
    Lam = mean + disc
    kmin = int(np.argmin(lam))
    if lam[kmin] <= 0.0:
        raise PreconditionError(
            "coefficients not uniformly elliptic: eigenvalue "
            f"{lam[kmin]:.6g} at node {grid.ij(kmin)}"
        )
    return float(lam.min()), float(Lam.max())


def check_ellipticity(c: CoefficientField):
    """Global (min, max) eigenvalue of the coefficient matrix over all nodes."""
    return check_ellipticity_values(
        c.a11.values, c.a12.values, c.a22.values, c.grid
    )


@dataclasses.dataclass(frozen=True)
class ChartMetric:
    """Metric components in a single chart, with derived inverse and weight."""

    g11: ScalarField
    g12: ScalarField
    g22: ScalarField

    def __post_init__(self):
        g = self.g11.grid
        if self.g12.grid != g or self.g22.grid != g:
            raise PreconditionError("metric fields live on different grids")
        det = self.det()
        if det.min() <= 0.0:
            k = int(np.argmin(det))
            raise PreconditionError(
                f"metric degenerate: det g = {det.min():.6g} at node {g.ij(k)}"
            )

    @property
    def grid(self) -> Grid:
        return self.g11.grid

    def det(self) -> np.ndarray:
        return self.g11.values * self.g22.values - self.g12.values ** 2

    def weight(self) -> np.ndarray:
        """rho_g = sqrt(det g) per node."""
        return np.sqrt(self.det())

    def inverse(self):
        det = self.det()
        return self.g22.values / det, -self.g12.values / det, self.g11.values / det

    @classmethod
    def flat(cls, grid: Grid) -> "ChartMetric":
        one = ScalarField.constant(grid, 1.0)
        zero = ScalarField.constant(grid, 0.0)
        return cls(one, zero, one)

    @classmethod
    def from_functions(cls, grid: Grid, f11, f12, f22) -> "ChartMetric":
        return cls(
            ScalarField.from_function(grid, f11),
            ScalarField.from_function(grid, f12),
            ScalarField.from_function(grid, f22),
        )


class StencilOperator:
    """Assembled sparse stencil with Dirichlet boundary handling.

    Attributes
    ----------
    grid : Grid
    matrix : scipy.sparse.csr_matrix
        N x N stencil; interior rows hold the weighted operator rho*L,
        boundary rows are identity.
    rho : numpy.ndarray
        Node weight (identically 1 for flat divergence form).
    dirichlet : NodeSet
        Boundary nodes whose rows are identity rows.
    """

    def __init__(self, grid: Grid, matrix, rho, dirichlet: NodeSet, meta=None):
        self.grid = grid
        self.matrix = matrix.tocsr()
        self.rho = np.asarray(rho, dtype=float)
        self.dirichlet = dirichlet
        self.meta = dict(meta or {})
        self._interior = np.flatnonzero(~dirichlet.mask)
        self._factor = None

    @property
    def interior_indices(self) -> np.ndarray:
        return self._interior

    def apply(self, field: ScalarField) -> ScalarField:
        """Operator action L u (or Delta_g u) on interior nodes, 0 on the boundary."""
        raw = self.matrix @ field.values
        out = raw / self.rho
        out[self.dirichlet.mask] = 0.0
        return ScalarField(self.grid, out).assert_finite("operator action")

    def apply_weighted(self, values: np.ndarray) -> np.ndarray:
        """Raw stencil action rho * L u, including identity boundary rows."""
        return self.matrix @ values

    def reduced(self, indices: np.ndarray):
        """Negated operator restricted to ``indices`` (SPD for elliptic input)."""
        A = self.matrix
        return (-A[indices][:, indices]).tocsr()

    def interior_factor(self):
        """Cached sparse LU of the negated full-interior block."""
        if self._factor is None:
            M = self.reduced(self._interior).tocsc()
            self._factor = spla.splu(M)
        return self._factor


def _assemble_flux(grid: Grid, c11, c12, c22, rho, meta) -> StencilOperator:
    n = grid.n_side
    h2 = grid.h * grid.h
    C11 = c11.reshape(n, n)
    C12 = c12.reshape(n, n)
    C22 = c22.reshape(n, n)

    ii, jj = np.meshgrid(np.arange(1, n - 1), np.arange(1, n - 1), indexing="ij")
    ii = ii.ravel()
    jj = jj.ravel()
    k = ii * n + jj

    aE = 0.5 * (C11[ii, jj] + C11[ii + 1, jj]) / h2
    aW = 0.5 * (C11[ii, jj] + C11[ii - 1, jj]) / h2
    bN = 0.5 * (C22[ii, jj] + C22[ii, jj + 1]) / h2
    bS = 0.5 * (C22[ii, jj] + C22[ii, jj - 1]) / h2

    qNE = (C12[ii + 1, jj] + C12[ii, jj + 1]) / (4.0 * h2)
    qSW = (C12[ii - 1, jj] + C12[ii, jj - 1]) / (4.0 * h2)
    qNW = -(C12[ii - 1, jj] + C12[ii, jj + 1]) / (4.0 * h2)
    qSE = -(C12[ii + 1, jj] + C12[ii, jj - 1]) / (4.0 * h2)

    rows = [k, k, k, k, k, k, k, k, k]
    cols = [k, k + n, k - n, k + 1, k - 1, k + n + 1, k - n - 1, k - n + 1, k + n - 1]
    vals = [-(aE + aW + bN + bS), aE, aW, bN, bS, qNE, qSW, qNW, qSE]

    bmask = grid.boundary_mask()
    bidx = np.flatnonzero(bmask)
    rows.append(bidx)
    cols.append(bidx)
    vals.append(np.ones(bidx.size))

    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.n_nodes, grid.n_nodes),
    ).tocsr()
    return StencilOperator(grid, A, rho, NodeSet(grid, bmask), meta)


def assemble_divergence(c: CoefficientField, grid: Grid) -> StencilOperator:
    """Flux-form stencil for L = D_j a^{ij} D_i with node weight rho = 1."""
    if c.grid != grid:
        raise PreconditionError("coefficients assembled on a different grid")
    check_ellipticity(c)  # propagates the failure with the offending node
    return _assemble_flux(
        grid,
        c.a11.values,
        c.a12.values,
        c.a22.values,
        np.ones(grid.n_nodes),
        {"kind": "divergence", "coeff": c,
         "lambda": c.lambda_min, "Lambda": c.lambda_max},
    )


def assemble_beltrami(m: ChartMetric, grid: Grid) -> StencilOperator:
    """Weighted flux stencil D_i(rho_g g^{ij} D_j .) with node weight rho_g.

    Applying the stencil and dividing by rho_g discretizes Delta_g; for the
    flat metric the assembled matrix is identical to the 5-point Laplacian.
    """
    if m.grid != grid:
        raise PreconditionError("metric assembled on a different grid")
    rho = m.weight()
    gi11, gi12, gi22 = m.inverse()
    return _assemble_flux(
        grid,
        rho * gi11,
        rho * gi12,
        rho * gi22,
        rho,
        {"kind": "beltrami", "metric": m},
    )
