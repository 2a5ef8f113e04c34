"""Mean value sets: region extraction, nesting, averages, volume identity."""

from __future__ import annotations

import dataclasses

import numpy as np

from .elliptic import StencilOperator
from .errors import PreconditionError
from .grid import NodeSet, ScalarField
from .greens import GreenFunction, compute_green
from .obstacle import SQRT_PI, ObstacleSolution, solve_mean_value

# Marching-squares segment table on the 0/1 indicator at level 1/2.  Corner
# bits: 1 = (i,j), 2 = (i+1,j), 4 = (i+1,j+1), 8 = (i,j+1); cell edges are
# S(outh), E(ast), N(orth), W(est).  The two ambiguous cases use the fixed
# "separated" resolution.
_MS_TABLE = {
    1: [("S", "W")],
    2: [("S", "E")],
    3: [("E", "W")],
    4: [("E", "N")],
    5: [("S", "W"), ("E", "N")],
    6: [("S", "N")],
    7: [("N", "W")],
    8: [("N", "W")],
    9: [("S", "N")],
    10: [("S", "E"), ("N", "W")],
    11: [("E", "N")],
    12: [("E", "W")],
    13: [("S", "E")],
    14: [("S", "W")],
}


def _edge_key(i, j, side):
    if side == "S":
        return ("h", i, j)
    if side == "N":
        return ("h", i, j + 1)
    if side == "W":
        return ("v", i, j)
    return ("v", i + 1, j)


def marching_squares(mask2d: np.ndarray, grid) -> list:
    """Closed loops tracing the 0/1 indicator at level 1/2.

    Vertices sit at edge midpoints (half a cell from the nodes).  Returns a
    list of (m, 2) xy arrays, each with first point repeated at the end.
    """
    m = mask2d.astype(np.int8)
    n = m.shape[0]
    segments = {}  # edge key -> list of (other edge key)
    for i in range(n - 1):
        for j in range(n - 1):
            case = m[i, j] | (m[i + 1, j] << 1) | (m[i + 1, j + 1] << 2) | (m[i, j + 1] << 3)
            for a, b in _MS_TABLE.get(case, ()):
                ka = _edge_key(i, j, a)
                kb = _edge_key(i, j, b)
                segments.setdefault(ka, []).append(kb)
                segments.setdefault(kb, []).append(ka)

    def vertex(key):
        kind, i, j = key
        if kind == "h":
            return (grid.lo + (i + 0.5) * grid.h, grid.lo + j * grid.h)
        return (grid.lo + i * grid.h, grid.lo + (j + 0.5) * grid.h)

    loops = []
    visited = set()
    for start in sorted(segments):
        if start in visited:
            continue
        loop = [start]
        visited.add(start)
        nxt = segments[start][0]
        while nxt != start:
            loop.append(nxt)
            visited.add(nxt)
            a, b = segments[nxt]
            nxt = b if a == loop[-2] else a
        pts = np.array([vertex(k) for k in loop + [start]])
        loops.append(pts)
    return loops


def polyline_area(loop: np.ndarray) -> float:
    x, y = loop[:-1, 0], loop[:-1, 1]
    xn, yn = loop[1:, 0], loop[1:, 1]
    return 0.5 * abs(float(np.sum(x * yn - xn * y)))


def polyline_perimeter(loop: np.ndarray) -> float:
    return float(np.sum(np.hypot(np.diff(loop[:, 0]), np.diff(loop[:, 1]))))


@dataclasses.dataclass(frozen=True)
class RegionDecomposition:
    """Noncontact set, contact set, free boundary, and traced outline."""

    omega: NodeSet
    contact: NodeSet
    fb: NodeSet
    loops: list

    def enclosed_area(self) -> float:
        return sum(polyline_area(lp) for lp in self.loops)

    def perimeter(self) -> float:
        return sum(polyline_perimeter(lp) for lp in self.loops)


def extract_regions(sol: ObstacleSolution) -> RegionDecomposition:
    grid = sol.grid
    n = grid.n_side
    dom = sol.domain.mask
    omega = dom & (sol.w.values > 0.0)
    contact = dom & ~omega
    om2 = omega.reshape(n, n)
    nb = np.zeros_like(om2)
    nb[1:, :] |= om2[:-1, :]
    nb[:-1, :] |= om2[1:, :]
    nb[:, 1:] |= om2[:, :-1]
    nb[:, :-1] |= om2[:, 1:]
    fb = contact & nb.ravel()
    loops = marching_squares(om2, grid)
    return RegionDecomposition(
        NodeSet(grid, omega), NodeSet(grid, contact), NodeSet(grid, fb), loops
    )


@dataclasses.dataclass(frozen=True)
class MvsFamily:
    center: int
    radii: list
    solutions: list
    regions: list
    op: StencilOperator
    nesting_exact: bool
    findings: list


def build_family(op: StencilOperator, G: GreenFunction, radii) -> MvsFamily:
    """Solve the mean value problem for each radius and verify exact nesting."""
    radii = [float(r) for r in radii]
    if any(s <= r for r, s in zip(radii, radii[1:])):
        raise PreconditionError(f"radii must be strictly increasing, got {radii}")
    if radii[0] < 4 * op.grid.h * SQRT_PI:
        raise PreconditionError(
            f"smallest radius {radii[0]} below the resolvable bound 4h*sqrt(pi)"
        )
    solutions = [solve_mean_value(op, G, r) for r in radii]
    regions = [extract_regions(s) for s in solutions]
    findings = []
    for r, s, ra, rb in zip(radii, radii[1:], regions, regions[1:]):
        if not ra.omega.issubset(rb.omega):
            extra = int((ra.omega.mask & ~rb.omega.mask).sum())
            findings.append(
                f"nesting violation: omega({r}) has {extra} nodes outside omega({s})"
            )
    return MvsFamily(
        center=G.pole,
        radii=radii,
        solutions=solutions,
        regions=regions,
        op=op,
        nesting_exact=not findings,
        findings=findings,
    )


def _point_segment_dist(pts, seg_a, seg_b):
    # min distance from each point to the segment set, vectorized over both
    d = seg_b - seg_a  # (m, 2)
    L2 = np.einsum("ij,ij->i", d, d)
    L2[L2 == 0.0] = 1.0
    best = np.full(pts.shape[0], np.inf)
    # chunk over points to bound memory
    for lo in range(0, pts.shape[0], 512):
        p = pts[lo:lo + 512]
        t = ((p[:, None, 0] - seg_a[None, :, 0]) * d[None, :, 0]
             + (p[:, None, 1] - seg_a[None, :, 1]) * d[None, :, 1]) / L2[None, :]
        t = np.clip(t, 0.0, 1.0)
        qx = seg_a[None, :, 0] + t * d[None, :, 0]
        qy = seg_a[None, :, 1] + t * d[None, :, 1]
        dist = np.hypot(p[:, None, 0] - qx, p[:, None, 1] - qy)
        best[lo:lo + 512] = dist.min(axis=1)
    return best


def strict_gap(a: RegionDecomposition, b: RegionDecomposition) -> float:
    """Minimum distance between the two boundary polylines (a nested in b)."""
    if not a.omega.issubset(b.omega):
        raise PreconditionError("first region is not nested in the second")
    if not a.loops or not b.loops:
        return 0.0
    pa = np.vstack([lp for lp in a.loops])
    pb = np.vstack([lp for lp in b.loops])
    ga = min(
        _point_segment_dist(pa, lp[:-1], lp[1:]).min() for lp in b.loops
    )
    gb = min(
        _point_segment_dist(pb, lp[:-1], lp[1:]).min() for lp in a.loops
    )
    return float(min(ga, gb))


@dataclasses.dataclass(frozen=True)
class MeanValueReport:
    center_value: float
    averages: list
    monotone: bool
    violations: list
    max_deviation: float


def region_average(v: ScalarField, region: RegionDecomposition,
                   op: StencilOperator) -> float:
    """rho-weighted nodal average of v over the noncontact set."""
    m = region.omega.mask
    wts = op.rho[m]
    return float(np.sum(wts * v.values[m]) / np.sum(wts))


def verify_mean_value(v: ScalarField, fam: MvsFamily, subsolution: bool) -> MeanValueReport:
    """Check the mean value chain v(x0) <= avg_{D_r1} <= ... (Lv >= 0 case).

    For L-harmonic v the same chain collapses; ``max_deviation`` then reports
    the largest |average - v(x0)|.
    """
    v0 = float(v.values[fam.center])
    avgs = [region_average(v, reg, fam.op) for reg in fam.regions]
    seq = [v0] + avgs
    violations = []
    for k in range(len(seq) - 1):
        if seq[k + 1] < seq[k]:
            violations.append((k, seq[k] - seq[k + 1]))
    monotone = not violations if subsolution else True
    max_dev = max(abs(a - v0) for a in avgs) if avgs else 0.0
    return MeanValueReport(v0, avgs, monotone, violations, max_dev)


@dataclasses.dataclass(frozen=True)
class ConverseReport:
    centers: list
    residuals: list
    stencil_residual: float


def converse_check(v: ScalarField, op: StencilOperator, centers, r: float) -> ConverseReport:
    """|v(center) - avg over D_r(center)| per center, plus the direct ||Lv||."""
    grid = op.grid
    residuals = []
    done = []
    for c in centers:
        pole = c if isinstance(c, (int, np.integer)) else grid.snap(c)
        G = compute_green(op, pole)
        sol = solve_mean_value(op, G, r)
        reg = extract_regions(sol)
        avg = region_average(v, reg, op)
        residuals.append(abs(avg - float(v.values[pole])))
        done.append(int(pole))
    Lv = op.apply(v).values
    resid = float(np.abs(Lv[op.interior_indices]).max())
    return ConverseReport(done, residuals, resid)


@dataclasses.dataclass(frozen=True)
class BallBoundsReport:
    inradius_ratios: list
    circumradius_ratios: list
    c_est: float
    C_est: float


def ball_bounds(fam: MvsFamily) -> BallBoundsReport:
    """Inradius/r and circumradius/r of each set about the center."""
    grid = fam.op.grid
    cx, cy = grid.xy(fam.center)
    x, y = grid.coords()
    d = np.hypot(x - cx, y - cy)
    inr, cir = [], []
    for r, reg in zip(fam.radii, fam.regions):
        m = reg.omega.mask
        if not m.any():
            raise PreconditionError(f"empty mean value set at r = {r}")
        cir.append(float(d[m].max()) / r)
        inr.append(float(d[~m].min()) / r)
    return BallBoundsReport(inr, cir, float(min(inr)), float(max(cir)))


@dataclasses.dataclass(frozen=True)
class VolumeReport:
    radii: list
    volumes: list
    rel_errors: list


def volume_identity(fam: MvsFamily) -> VolumeReport:
    """rho-weighted measure of each set against the exact value r^2."""
    grid = fam.op.grid
    h2 = grid.h * grid.h
    vols, errs = [], []
    for r, reg in zip(fam.radii, fam.regions):
        vol = float(np.sum(fam.op.rho[reg.omega.mask]) * h2)
        vols.append(vol)
        errs.append(abs(vol - r * r) / (r * r))
    return VolumeReport(list(fam.radii), vols, errs)
