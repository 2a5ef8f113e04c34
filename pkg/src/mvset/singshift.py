"""Boundary-data shift search: put the origin on the free boundary.

For a nonnegative field w vanishing at the center node, the disk problem

    Delta u = chi_{u>0} in B_r,   u = (w + T r^2)^+ on the rim,   u >= 0

is solved while bisecting on T.  The predicate "the center is still in the
contact set of u" is monotone in T by the comparison principle, and its
transition point is the shift S(r).  All shifts are carried in T-units
(T = t / r^2); the conversion happens only when sampling boundary data.
"""

from __future__ import annotations

import dataclasses
import enum

import numpy as np

from .errors import GeometryError, PreconditionError, SolverError
from .freeboundary import BlowupClassification, classify
from .grid import ScalarField, ball_nodes, bilinear_sample
from .obstacle import ObstacleSolution, ShiftBoundaryProblem, solve_shift
from .scenarios import make_laplacian

T_UPPER = 0.25  # 1/(2n) with n = 2; no contact above this shift


class ContactStatus(enum.IntEnum):
    """Status of a node in a solution; the order matches monotonicity in T."""

    INTERIOR_CONTACT = 0
    FREE_BOUNDARY = 1
    NONCONTACT = 2

    def label(self) -> str:
        return {0: "interior-contact", 1: "free-boundary", 2: "noncontact"}[int(self)]


def contact_status(sol: ObstacleSolution, p) -> ContactStatus:
    """Trichotomy from exact zeros on the open 2h-ball around p.

    On the lattice the open 2h-ball is exactly the 3x3 node block (the
    diagonal neighbors sit at sqrt(2) h, the next ring at 2h), so membership
    is computed in index space, immune to coordinate roundoff.
    """
    grid = sol.grid
    k = p if isinstance(p, (int, np.integer)) else grid.snap(p)
    i, j = grid.ij(k)
    n = grid.n_side
    if not (1 <= i < n - 1 and 1 <= j < n - 1):
        raise GeometryError(f"node {grid.ij(k)} lacks a 2h margin inside the grid")
    block = [grid.index(i + di, j + dj) for di in (-1, 0, 1) for dj in (-1, 0, 1)]
    if not all(sol.domain.mask[b] for b in block):
        raise GeometryError(
            f"node {grid.ij(k)} lacks a 2h margin inside the solve domain"
        )
    u = sol.w.values
    if u[k] > 0.0:
        return ContactStatus.NONCONTACT
    if all(u[b] == 0.0 for b in block):
        return ContactStatus.INTERIOR_CONTACT
    return ContactStatus.FREE_BOUNDARY


@dataclasses.dataclass(frozen=True)
class ShiftSearchResult:
    r: float
    S: float
    bracket_history: list
    status_at_S: ContactStatus
    pinched: bool
    solution: ObstacleSolution

    @property
    def steps(self) -> int:
        return len(self.bracket_history) - 1


def find_shift(w: ScalarField, r: float, tol_T: float = 1e-6, center=None,
               op_unit=None) -> ShiftSearchResult:
    """Bisection for the unique shift S(r) with the center on the free boundary.

    The widened bracket is (-max_{B_r} w / r^2 - 1, 1/4 + 1); the predicate
    bisected on is "the center is in the contact set", and the returned S is
    the largest tested T keeping it there.  If the free-boundary status is
    pinched out at this resolution (interior contact jumps straight to
    noncontact), the midpoint is returned with ``pinched`` set.
    """
    grid = w.grid
    k = center if center is not None else grid.snap((0.0, 0.0))
    if w.values.min() < 0.0:
        raise PreconditionError("field must be nonnegative")
    if w.values[k] != 0.0:
        raise PreconditionError(
            f"center node {grid.ij(k)} not on the contact set (w = {w.values[k]:.3e})"
        )
    if op_unit is None:
        op_unit = make_laplacian(grid)
    ball = ball_nodes(grid, grid.xy(k), r)
    wmax = float(w.values[ball.mask].max())
    T_lo = -wmax / (r * r) - 1.0
    T_hi = T_UPPER + 1.0

    def run(T, init):
        sol = solve_shift(op_unit, ShiftBoundaryProblem(w, int(k), r, T), init=init)
        return sol, contact_status(sol, k)

    sol_lo, st_lo = run(T_lo, "zero")
    if st_lo == ContactStatus.NONCONTACT:
        raise SolverError(f"predicate false at the bracket bottom T = {T_lo}")
    _, st_hi = run(T_hi, "clip")
    if st_hi != ContactStatus.NONCONTACT:
        raise SolverError(f"predicate true at the bracket top T = {T_hi}")

    history = [(T_lo, T_hi)]
    while T_hi - T_lo >= tol_T:
        mid = 0.5 * (T_lo + T_hi)
        sol, st = run(mid, sol_lo.w.values)
        if st == ContactStatus.NONCONTACT:
            T_hi = mid
        else:
            T_lo, sol_lo, st_lo = mid, sol, st
        history.append((T_lo, T_hi))

    if st_lo == ContactStatus.FREE_BOUNDARY:
        return ShiftSearchResult(float(r), float(T_lo), history,
                                 ContactStatus.FREE_BOUNDARY, False, sol_lo)
    # interior contact right below noncontact: the FB band is pinched out
    return ShiftSearchResult(float(r), float(0.5 * (T_lo + T_hi)), history,
                             st_lo, True, sol_lo)


@dataclasses.dataclass(frozen=True)
class ScanReport:
    T_grid: list
    statuses: list  # ContactStatus per T
    monotone: bool
    violations: list  # (T_i, T_{i+1}) pairs breaking monotonicity
    fb_count: int
    single_band: bool

    def labels(self):
        return [s.label() for s in self.statuses]


def uniqueness_scan(w: ScalarField, r: float, T_grid, center=None,
                    op_unit=None) -> ScanReport:
    """Statuses along an ascending T grid; reports monotonicity violations."""
    T_grid = [float(T) for T in T_grid]
    if any(b <= a for a, b in zip(T_grid, T_grid[1:])):
        raise PreconditionError("T grid must be strictly ascending")
    grid = w.grid
    k = center if center is not None else grid.snap((0.0, 0.0))
    if op_unit is None:
        op_unit = make_laplacian(grid)
    statuses = []
    prev = None
    for T in T_grid:
        init = "clip" if prev is None else prev.w.values
        sol = solve_shift(op_unit, ShiftBoundaryProblem(w, int(k), r, T), init=init)
        statuses.append(contact_status(sol, k))
        prev = sol
    violations = [
        (T_grid[i], T_grid[i + 1])
        for i in range(len(statuses) - 1)
        if statuses[i + 1] < statuses[i]
    ]
    fb_idx = [i for i, s in enumerate(statuses) if s == ContactStatus.FREE_BOUNDARY]
    contiguous = not fb_idx or fb_idx[-1] - fb_idx[0] == len(fb_idx) - 1
    return ScanReport(
        T_grid, statuses, not violations, violations, len(fb_idx),
        contiguous and len(fb_idx) <= 2,
    )


@dataclasses.dataclass(frozen=True)
class DecayReport:
    pairs: list  # (r, S) in the scanned order (descending radii)
    seed: BlowupClassification
    envelope_ok: bool
    final_leq_first: bool
    results: list


def shift_decay(w: ScalarField, radii, tol_T: float = 1e-6, center=None) -> DecayReport:
    """S(r) along descending radii for a field with a singular point at the center."""
    radii = [float(r) for r in radii]
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise PreconditionError("radii must be strictly descending")
    grid = w.grid
    k = center if center is not None else grid.snap((0.0, 0.0))
    seed = classify(w, k)
    if seed.verdict != "singular":
        raise PreconditionError(
            f"center classifies as '{seed.verdict}', not singular: {seed.summary()}"
        )
    results = [find_shift(w, r, tol_T, center=k) for r in radii]
    pairs = [(res.r, res.S) for res in results]
    mags = [abs(S) for _, S in pairs]
    env = mags[0]
    envelope_ok = True
    for m in mags[1:]:
        if m > 2.0 * env + tol_T:
            envelope_ok = False
        env = min(env, m)
    return DecayReport(pairs, seed, envelope_ok, mags[-1] <= mags[0] + tol_T, results)


@dataclasses.dataclass(frozen=True)
class PreservationReport:
    base_stratum: int
    entries: list  # (r, S, status label, BlowupClassification or None)
    preserved: bool


def preservation_check(w: ScalarField, radii, tol_T: float = 1e-6,
                       center=None, results=None) -> PreservationReport:
    """Classify v_{r;S(r)} at the center across radii; singular points persist.

    ``results`` may carry precomputed ShiftSearchResults for the same radii
    (e.g. from shift_decay) to avoid re-running the bisections.  Entries where
    the shift search came back pinched (no FB status at this resolution)
    carry no classification and are reported, not fatal.
    """
    grid = w.grid
    k = center if center is not None else grid.snap((0.0, 0.0))
    seed = classify(w, k)
    if seed.verdict != "singular":
        raise PreconditionError(
            f"center classifies as '{seed.verdict}', not singular: {seed.summary()}"
        )
    base = seed.stratum
    h = grid.h
    entries = []
    verdicts = []
    for i, r in enumerate(radii):
        if results is not None:
            res = results[i]
        else:
            res = find_shift(w, float(r), tol_T, center=k)
        if res.pinched:
            entries.append((res.r, res.S, res.status_at_S.label(), None))
            continue
        scales = [s * h for s in (16, 8, 4) if s * h <= res.r - 2 * h]
        cls = classify(res.solution.w, k, scales=scales)
        entries.append((res.r, res.S, res.status_at_S.label(), cls))
        verdicts.append(cls)
    preserved = bool(verdicts) and all(
        c.verdict == "singular" and c.stratum <= base for c in verdicts
    )
    return PreservationReport(base, entries, preserved)


def normalize_at_origin(w: ScalarField, a0: np.ndarray):
    """Resample w under the coordinate change x = a0^{1/2} y.

    After the change of variables, an operator with coefficient matrix a0 at
    the origin has the identity there.  Returns the resampled field and the
    radius around the origin within which samples stayed inside the box.
    """
    a0 = np.asarray(a0, dtype=float)
    evals, evecs = np.linalg.eigh(a0)
    if evals.min() <= 0.0:
        raise PreconditionError("coefficient matrix at the origin must be SPD")
    B = (evecs * np.sqrt(evals)) @ evecs.T
    grid = w.grid
    x, y = grid.coords()
    px = B[0, 0] * x + B[0, 1] * y
    py = B[1, 0] * x + B[1, 1] * y
    vals = bilinear_sample(w, px, py)
    norm = float(np.linalg.norm(B, 2))
    r_valid = min(abs(grid.lo), abs(grid.hi)) / norm
    return ScalarField(grid, vals), r_valid
