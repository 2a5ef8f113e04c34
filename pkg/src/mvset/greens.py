"""Dirichlet linear solves and discrete Green's functions on the box."""

from __future__ import annotations

import dataclasses

import numpy as np

from .elliptic import StencilOperator
from .errors import GeometryError, SolverError
from .grid import ScalarField


def _cg(M, b, x0=None, rtol=1e-12, maxiter=None):
    """Plain conjugate gradient for the SPD matrix M, deterministic order."""
    n = b.shape[0]
    if maxiter is None:
        maxiter = 20 * int(np.sqrt(n)) + 2000
    x = np.zeros(n) if x0 is None else x0.copy()
    r = b - M @ x
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), 0.0, 0
    target = rtol * bnorm
    rs = float(r @ r)
    if np.sqrt(rs) <= target:
        return x, np.sqrt(rs) / bnorm, 0
    p = r.copy()
    for it in range(1, maxiter + 1):
        Mp = M @ p
        alpha = rs / float(p @ Mp)
        x += alpha * p
        r -= alpha * Mp
        rs_new = float(r @ r)
        if np.sqrt(rs_new) <= target:
            return x, np.sqrt(rs_new) / bnorm, it
        p = r + (rs_new / rs) * p
        rs = rs_new
    raise SolverError(
        f"conjugate gradient: iteration cap {maxiter} exceeded, "
        f"relative residual {np.sqrt(rs) / bnorm:.3e}"
    )


def solve_linear(op: StencilOperator, rhs: ScalarField, bc: ScalarField,
                 rtol=1e-12) -> ScalarField:
    """Solve (-L) u = rhs with u = bc on the Dirichlet boundary.

    Conjugate gradient on the negated interior block; the relative residual
    of the returned solution is at most ``rtol`` (default leaves comfortable
    slack under the 1e-10 contract).
    """
    idx = op.interior_indices
    bmask = op.dirichlet.mask
    bvals = np.where(bmask, bc.values, 0.0)
    # (-A_II) u_I = rho*rhs_I + (A u_bc)_I
    b = op.rho[idx] * rhs.values[idx] + (op.matrix @ bvals)[idx]
    M = op.reduced(idx)
    x, _, _ = _cg(M, b, rtol=rtol)
    out = bvals.copy()
    out[idx] = x
    return ScalarField(op.grid, out).assert_finite("linear solve")


@dataclasses.dataclass(frozen=True)
class GreenFunction:
    """Discrete Green's function G(., x0) of the operator on the box."""

    field: ScalarField
    pole: int
    op: StencilOperator
    residual: float


def compute_green(op: StencilOperator, x0) -> GreenFunction:
    """Green's function with zero Dirichlet data and unit-mass discrete delta.

    ``x0`` may be a node index or a physical point (snapped to the nearest
    node).  The pole must sit at least 4h from the box boundary.
    """
    grid = op.grid
    pole = x0 if isinstance(x0, (int, np.integer)) else grid.snap(x0)
    if grid.index_margin(pole) < 4:
        raise GeometryError(
            f"pole {grid.ij(pole)} within 4h of the boundary; "
            "enlarge the box or move the pole"
        )
    h2 = grid.h * grid.h
    rhs = np.zeros(grid.n_nodes)
    rhs[pole] = 1.0 / (op.rho[pole] * h2)  # unit mass under the rho h^2 quadrature
    zero = ScalarField.constant(grid, 0.0)
    g = solve_linear(op, ScalarField(grid, rhs), zero)
    # applying the stencil must give -1/h^2 at the pole, 0 at other interior nodes
    raw = op.apply_weighted(g.values)
    raw[pole] += 1.0 / h2
    rel = float(np.abs(raw[op.interior_indices]).max() * h2)
    if rel > 1e-8:
        raise SolverError(f"Green residual {rel:.3e} exceeds 1e-8")
    return GreenFunction(g, int(pole), op, rel)
