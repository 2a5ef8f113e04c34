"""Obstacle problems as linear complementarity problems.

The discrete problem solved everywhere is, on the unknown node set D:

    w >= 0,   M w - c >= 0,   w .* (M w - c) = 0,

with M the negated stencil restricted to D (symmetric positive definite) and
c collecting the forcing together with the Dirichlet data contribution.
Projected SOR sweeps (lexicographic node order, exact-zero projection) are
followed by an active-set direct refinement that solves the reduced linear
system on the inactive set until the signs certify.
"""

from __future__ import annotations

import dataclasses
import warnings

import numpy as np
import scipy.sparse.linalg as spla
from numba import njit

from .elliptic import StencilOperator
from .errors import GeometryError, PreconditionError, SolverError
from .grid import NodeSet, ScalarField, ball_nodes
from .greens import GreenFunction, _cg

SQRT_PI = float(np.sqrt(np.pi))


@njit(cache=True)
def _psor_sweeps(indptr, indices, data, diag, c, w, omega, nsweeps):
    n = w.shape[0]
    for _ in range(nsweeps):
        for i in range(n):
            acc = c[i]
            for k in range(indptr[i], indptr[i + 1]):
                j = indices[k]
                if j != i:
                    acc -= data[k] * w[j]
            wi = (1.0 - omega) * w[i] + omega * acc / diag[i]
            w[i] = wi if wi > 0.0 else 0.0


@dataclasses.dataclass(frozen=True)
class ObstacleSolution:
    """Height field with certified complementarity residuals.

    ``comp_residual`` and ``pde_residual`` are relative to ``scale``
    (max(1, ||c||_inf)); ``comp_abs`` is the absolute complementarity
    residual used as comparison slack.
    """

    w: ScalarField
    active: NodeSet
    domain: NodeSet
    rim: NodeSet
    source: dict
    comp_residual: float
    pde_residual: float
    comp_abs: float
    scale: float
    iterations: int
    refine_rounds: int

    @property
    def grid(self):
        return self.w.grid


@dataclasses.dataclass(frozen=True)
class ShiftBoundaryProblem:
    """Disk problem Delta u = chi_{u>0} with data (w + t)^+ on the disk rim.

    The shift is carried in T-units of the rescaled problem; t = T r^2 is
    applied when sampling the boundary data.
    """

    w: ScalarField
    center: int
    r: float
    T: float

    @property
    def t(self) -> float:
        return self.T * self.r * self.r


def solve_lcp(op: StencilOperator, b, bc=None, domain=None, *, init="clip",
              omega=1.5, max_sweeps=None, comp_tol=1e-10, pde_tol=1e-8,
              source=None) -> ObstacleSolution:
    """Solve the LCP for the operator's negated stencil on ``domain``.

    Parameters
    ----------
    b : ScalarField or array
        LCP right-hand side in M-form (only entries on ``domain`` are used).
    bc : ScalarField or None
        Dirichlet values read on nodes outside ``domain``; must be >= 0 on the
        rim actually coupled to the domain.
    domain : NodeSet or None
        Unknown nodes; defaults to all non-Dirichlet nodes of the box.
    init : "clip" | "zero" | array
        Start from the clipped unconstrained solve, from zero, or from a
        given full-length iterate (warm start).
    """
    grid = op.grid
    bvec = b.values if isinstance(b, ScalarField) else np.asarray(b, dtype=float)
    if domain is None:
        domain = NodeSet(grid, ~op.dirichlet.mask)
    idx = domain.indices
    if idx.size == 0:
        raise PreconditionError("empty solve domain")

    A = op.matrix
    M = op.reduced(idx)
    sub = A[idx]
    rim_cols = np.setdiff1d(np.unique(sub.indices), idx, assume_unique=False)
    rim = NodeSet(grid, np.isin(np.arange(grid.n_nodes), rim_cols))
    bcvals = np.zeros(grid.n_nodes) if bc is None else np.asarray(
        bc.values if isinstance(bc, ScalarField) else bc, dtype=float)
    if rim_cols.size and bcvals[rim_cols].min() < 0.0:
        raise PreconditionError("Dirichlet data must be >= 0 on the rim")
    gvec = np.where(domain.mask, 0.0, bcvals)
    c = bvec[idx] + sub @ gvec

    if op.meta.get("m_matrix_checked") is None:
        off = M.copy()
        off.setdiag(0.0)
        if off.nnz and off.data.max() > 1e-14:
            warnings.warn(
                "stencil is not an M-matrix (positive off-diagonal entries); "
                "the comparison principle holds only approximately",
                stacklevel=2,
            )
        op.meta["m_matrix_checked"] = True

    n_dom = idx.size
    if isinstance(init, np.ndarray):
        w = np.maximum(init[idx].astype(float), 0.0)
    elif init == "zero":
        w = np.zeros(n_dom)
    elif init == "clip":
        if idx.size == op.interior_indices.size and np.array_equal(idx, op.interior_indices):
            x = op.interior_factor().solve(c)
        elif n_dom > 4000:
            x = spla.splu(M.tocsc()).solve(c)
        else:
            x, _, _ = _cg(M, c, rtol=1e-12)
        w = np.maximum(x, 0.0)
    else:
        raise PreconditionError(f"unknown init '{init}'")

    diag = M.diagonal()
    indptr, indices, data = M.indptr, M.indices, M.data
    scale = max(1.0, float(np.abs(c).max()))
    cap = max_sweeps if max_sweeps is not None else 200 * grid.n_side
    block = 25
    stall = max(2, n_dom // 2000)  # hand over to refinement once the set settles
    sweeps = 0
    prev_active = None
    while sweeps < cap:
        _psor_sweeps(indptr, indices, data, diag, c, w, omega, block)
        sweeps += block
        slack = M @ w - c
        comp = float(np.abs(np.minimum(w, slack)).max())
        active = w == 0.0
        if comp <= 1e-7 * scale:
            break
        if prev_active is not None and int(np.sum(active != prev_active)) <= stall:
            break
        prev_active = active

    def residuals(wv):
        s = M @ wv - c
        comp = float(np.abs(np.minimum(wv, s)).max())
        pos = wv > 0.0
        pde = float(np.abs(s[pos]).max()) if pos.any() else 0.0
        return s, comp, pde

    rounds = 0
    act = w == 0.0
    comp_abs = pde_abs = np.inf
    for _outer in range(4):
        for _ in range(6):
            rounds += 1
            inact = ~act
            if inact.any():
                MI = M[inact][:, inact].tocsc()
                w[inact] = spla.splu(MI).solve(c[inact])
            w[act] = 0.0
            slack = M @ w - c
            to_act = inact & (w < 0.0)
            to_inact = act & (slack < -1e-12 * scale)
            if not to_act.any() and not to_inact.any():
                break
            act = (act | to_act) & ~to_inact
        w[act] = 0.0
        np.maximum(w, 0.0, out=w)
        _, comp_abs, pde_abs = residuals(w)
        if comp_abs <= comp_tol * scale and pde_abs <= pde_tol * scale:
            break
        # re-equilibrate: the refinement can cycle when started from a bad
        # active set (warm starts far from the solution)
        _psor_sweeps(indptr, indices, data, diag, c, w, omega, 50)
        sweeps += 50
        act = w == 0.0

    comp_rel = comp_abs / scale
    pde_rel = pde_abs / scale
    if comp_rel > comp_tol or pde_rel > pde_tol:
        raise SolverError(
            f"LCP not certified after {sweeps} sweeps + {rounds} refinements: "
            f"complementarity {comp_rel:.3e}, PDE residual {pde_rel:.3e}"
        )

    full = gvec.copy()
    full[idx] = w
    wf = ScalarField(grid, full).assert_finite("obstacle solution")
    active_mask = np.zeros(grid.n_nodes, dtype=bool)
    active_mask[idx[w == 0.0]] = True
    return ObstacleSolution(
        w=wf,
        active=NodeSet(grid, active_mask),
        domain=domain,
        rim=rim,
        source=dict(source or {}),
        comp_residual=comp_rel,
        pde_residual=pde_rel,
        comp_abs=comp_abs,
        scale=scale,
        iterations=sweeps,
        refine_rounds=rounds,
    )


def solve_mean_value(op: StencilOperator, G: GreenFunction, r: float,
                     init="clip") -> ObstacleSolution:
    """Height function w_r whose positivity set is the mean value set D_r(x0).

    The forcing encodes the unit-mass discrete delta at the pole minus
    r^{-2} rho at interior nodes, with zero Dirichlet data on the box.
    """
    grid = op.grid
    if r <= 0:
        raise PreconditionError(f"radius must be positive, got {r}")
    if r / SQRT_PI < 2 * grid.h:
        raise PreconditionError(
            f"r = {r} under-resolved (noncontact radius below 2h); use a finer grid"
        )
    pole = G.pole
    b = -(r ** -2) * op.rho
    b[pole] += 1.0 / (grid.h * grid.h)
    sol = solve_lcp(
        op, b, bc=None, domain=None, init=init,
        source={"kind": "mean_value", "r": float(r), "pole": int(pole)},
    )
    omega_idx = np.flatnonzero(sol.domain.mask & (sol.w.values > 0.0))
    if omega_idx.size:
        margins = np.minimum.reduce([
            omega_idx // grid.n_side,
            omega_idx % grid.n_side,
            grid.n_side - 1 - omega_idx // grid.n_side,
            grid.n_side - 1 - omega_idx % grid.n_side,
        ])
        if margins.min() < 4:
            raise GeometryError(
                f"box too small: the mean value set for r = {r} reaches the 4h "
                "boundary margin; enlarge the box or decrease r"
            )
    return sol


def solve_shift(op_unit: StencilOperator, p: ShiftBoundaryProblem,
                init="clip") -> ObstacleSolution:
    """Classical obstacle problem on the disk with data (w + t)^+ on the rim."""
    grid = op_unit.grid
    if p.w.grid != grid:
        raise PreconditionError("field and operator grids differ")
    h = grid.h
    if 2 * p.r / h < 32:
        raise PreconditionError(
            f"disk of radius {p.r} resolved by {2 * p.r / h:.1f} < 32 nodes across"
        )
    cx, cy = grid.xy(p.center)
    if not (grid.lo + 2 * h <= cx - p.r and cx + p.r <= grid.hi - 2 * h
            and grid.lo + 2 * h <= cy - p.r and cy + p.r <= grid.hi - 2 * h):
        raise GeometryError(f"disk of radius {p.r} not inside the grid with 2h margin")
    disk = ball_nodes(grid, (cx, cy), p.r)
    data = ScalarField(grid, np.maximum(p.w.values + p.t, 0.0))
    b = -op_unit.rho  # f = 1 on the positivity set
    return solve_lcp(
        op_unit, b, bc=data, domain=disk, init=init,
        source={"kind": "shift", "r": float(p.r), "T": float(p.T)},
    )


@dataclasses.dataclass(frozen=True)
class ComparisonReport:
    eps: float
    slack: float
    lower_violation: float
    upper_violation: float

    @property
    def ok(self) -> bool:
        return self.lower_violation <= self.slack and self.upper_violation <= self.slack


def comparison_check(s1: ObstacleSolution, s2: ObstacleSolution,
                     eps=None) -> ComparisonReport:
    """Check w1 <= w2 <= w1 + eps up to solver slack (10x the residuals).

    ``eps`` defaults to the measured boundary-data gap on the common rim.
    """
    if not np.array_equal(s1.domain.mask, s2.domain.mask):
        raise PreconditionError("solutions live on different domains")
    w1 = s1.w.values
    w2 = s2.w.values
    if eps is None:
        rim = s1.rim.mask
        eps = float(max(0.0, (w2[rim] - w1[rim]).max())) if rim.any() else 0.0
    slack = 10.0 * (s1.comp_abs + s2.comp_abs)
    d = s1.domain.mask
    lower = float(max(0.0, (w1[d] - w2[d]).max()))
    upper = float(max(0.0, (w2[d] - w1[d] - eps).max()))
    return ComparisonReport(float(eps), slack, lower, upper)
