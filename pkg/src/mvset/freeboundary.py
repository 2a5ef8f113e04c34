"""Blow-up analysis at free boundary points.

Quadratic rescalings are sampled on a fixed 33x33 lattice over [-1,1]^2
masked to the unit disc.  Two profile models are fitted at dyadic scales:

  model A (regular):   max(x . n, 0)^2 / 2, direction n on an angular grid
  model B (singular):  x^T M x / 2, M symmetric PSD via linear least squares

Both carry the 1/2 normalization so their Laplacian is 1 on the positivity
set, matching the unit forcing of the obstacle problems being classified.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import GeometryError, PreconditionError
from .grid import ScalarField, bilinear_sample

LATTICE_N = 33
_AX = np.linspace(-1.0, 1.0, LATTICE_N)
_LX, _LY = np.meshgrid(_AX, _AX, indexing="ij")
DISC_MASK = _LX ** 2 + _LY ** 2 <= 1.0 + 1e-12
_XP = _LX[DISC_MASK]
_YP = _LY[DISC_MASK]

_N_ANGLES = 720
_THETAS = np.arange(_N_ANGLES) * (2.0 * np.pi / _N_ANGLES)

KERNEL_EIG_FRACTION = 0.05  # eigenvalues below this fraction of the top one count as kernel


def rescale(w: ScalarField, q, rho: float) -> np.ndarray:
    """Bilinear samples of w(q + rho*x)/rho^2 on the unit-square lattice.

    Returns the full 33x33 array; mask with DISC_MASK for disc quantities.
    """
    grid = w.grid
    k = q if isinstance(q, (int, np.integer)) else grid.snap(q)
    if rho < 4 * grid.h - 1e-12:
        raise PreconditionError(f"rescale radius {rho} below 4h = {4 * grid.h}")
    cx, cy = grid.xy(k)
    px = cx + rho * _LX
    py = cy + rho * _LY
    eps = 1e-9 * grid.h
    if (px.min() < grid.lo - eps or px.max() > grid.hi + eps
            or py.min() < grid.lo - eps or py.max() > grid.hi + eps):
        raise GeometryError(f"ball of radius {rho} around {grid.ij(k)} leaves the grid")
    return bilinear_sample(w, px, py) / (rho * rho)


def _halfspace_model(nx, ny):
    return 0.5 * np.maximum(nx * _XP + ny * _YP, 0.0) ** 2


def fit_halfspace(sample_masked: np.ndarray):
    """Best direction n for max(x.n,0)^2/2 over the angular grid, refined locally."""
    proj = (np.cos(_THETAS)[:, None] * _XP[None, :]
            + np.sin(_THETAS)[:, None] * _YP[None, :])
    models = 0.5 * np.maximum(proj, 0.0) ** 2
    res = np.sqrt(np.mean((models - sample_masked[None, :]) ** 2, axis=1))
    kbest = int(np.argmin(res))
    step = 2.0 * np.pi / _N_ANGLES
    fine = _THETAS[kbest] + np.linspace(-step, step, 41)
    projf = np.cos(fine)[:, None] * _XP[None, :] + np.sin(fine)[:, None] * _YP[None, :]
    modelf = 0.5 * np.maximum(projf, 0.0) ** 2
    resf = np.sqrt(np.mean((modelf - sample_masked[None, :]) ** 2, axis=1))
    kf = int(np.argmin(resf))
    th = float(fine[kf])
    return np.array([np.cos(th), np.sin(th)]), float(resf[kf])


def fit_quadratic(sample_masked: np.ndarray):
    """Least-squares x^T M x / 2 with M projected to PSD; residual of the projection."""
    basis = np.column_stack([0.5 * _XP ** 2, _XP * _YP, 0.5 * _YP ** 2])
    coef, *_ = np.linalg.lstsq(basis, sample_masked, rcond=None)
    M = np.array([[coef[0], coef[1]], [coef[1], coef[2]]])
    evals, evecs = np.linalg.eigh(M)
    M_psd = (evecs * np.maximum(evals, 0.0)) @ evecs.T
    model = 0.5 * (M_psd[0, 0] * _XP ** 2 + 2 * M_psd[0, 1] * _XP * _YP
                   + M_psd[1, 1] * _YP ** 2)
    res = float(np.sqrt(np.mean((model - sample_masked) ** 2)))
    return M_psd, res


def separation(M: np.ndarray) -> float:
    """Sup-norm gap on the lattice between x^T M x/2 and the closest half-space profile."""
    quad = 0.5 * (M[0, 0] * _XP ** 2 + 2 * M[0, 1] * _XP * _YP + M[1, 1] * _YP ** 2)
    proj = (np.cos(_THETAS)[:, None] * _XP[None, :]
            + np.sin(_THETAS)[:, None] * _YP[None, :])
    models = 0.5 * np.maximum(proj, 0.0) ** 2
    gaps = np.abs(models - quad[None, :]).max(axis=1)
    return float(gaps.min())


def is_fb_node(w: ScalarField, k: int) -> bool:
    grid = w.grid
    n = grid.n_side
    i, j = grid.ij(k)
    if w.values[k] != 0.0:
        return False
    v = w.as_matrix()
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        ii, jj = i + di, j + dj
        if 0 <= ii < n and 0 <= jj < n and v[ii, jj] > 0.0:
            return True
    return False


@dataclasses.dataclass(frozen=True)
class BlowupClassification:
    point: int
    verdict: str  # "regular" | "singular" | "indeterminate"
    n0: np.ndarray | None
    M: np.ndarray | None
    stratum: int | None
    residuals: dict  # scale -> (res_regular, res_singular, per-scale verdict)
    gamma_est: float | None

    def summary(self) -> dict:
        out = {"point": int(self.point), "verdict": self.verdict}
        if self.n0 is not None:
            out["n0"] = [float(self.n0[0]), float(self.n0[1])]
        if self.M is not None:
            out["M"] = [[float(self.M[0, 0]), float(self.M[0, 1])],
                        [float(self.M[1, 0]), float(self.M[1, 1])]]
            out["trace"] = float(np.trace(self.M))
        if self.stratum is not None:
            out["stratum"] = int(self.stratum)
        if self.gamma_est is not None:
            out["gamma_est"] = float(self.gamma_est)
        out["residuals"] = {
            f"{s:.6g}": [float(a), float(b), v] for s, (a, b, v) in self.residuals.items()
        }
        return out


def classify(w: ScalarField, q, scales=None) -> BlowupClassification:
    """Regular/singular verdict at a free boundary node.

    Model residuals are compared with a factor-2 margin at each scale; the
    final verdict requires agreement across the two finest scales, otherwise
    the point is reported indeterminate.
    """
    grid = w.grid
    k = q if isinstance(q, (int, np.integer)) else grid.snap(q)
    if not is_fb_node(w, k):
        raise PreconditionError(f"node {grid.ij(k)} is not a free boundary point")
    h = grid.h
    if scales is None:
        cx, cy = grid.xy(k)
        room = min(cx - grid.lo, grid.hi - cx, cy - grid.lo, grid.hi - cy)
        scales = [s * h for s in (16, 8, 4) if s * h <= room]
    scales = sorted(scales, reverse=True)
    if len(scales) < 2:
        raise PreconditionError(
            f"need at least two usable scales at node {grid.ij(k)}, got {scales}"
        )

    residuals = {}
    per_scale = []
    fits = {}
    for rho in scales:
        sample = rescale(w, k, rho)[DISC_MASK]
        n_hat, res_a = fit_halfspace(sample)
        M_hat, res_b = fit_quadratic(sample)
        if res_a <= 0.5 * res_b:
            verdict = "regular"
        elif res_b <= 0.5 * res_a:
            verdict = "singular"
        else:
            verdict = "indeterminate"
        residuals[rho] = (res_a, res_b, verdict)
        per_scale.append(verdict)
        fits[rho] = (n_hat, M_hat)

    finest = scales[-1]
    if per_scale[-1] == per_scale[-2] and per_scale[-1] != "indeterminate":
        verdict = per_scale[-1]
    else:
        verdict = "indeterminate"

    n0 = M = stratum = gamma = None
    if verdict == "regular":
        n0 = fits[finest][0]
    elif verdict == "singular":
        M = fits[finest][1]
        evals = np.linalg.eigvalsh(M)
        top = float(evals.max())
        stratum = int(np.sum(evals < KERNEL_EIG_FRACTION * top)) if top > 0 else 2
        gamma = separation(M)
    return BlowupClassification(int(k), verdict, n0, M, stratum, residuals, gamma)


def nondegeneracy(w: ScalarField, q, deltas):
    """Growth constants at an FB node: C1 = max sup_B w / d^2, C2 = min sup |grad w| / d."""
    grid = w.grid
    k = q if isinstance(q, (int, np.integer)) else grid.snap(q)
    if not is_fb_node(w, k):
        raise PreconditionError(f"node {grid.ij(k)} is not a free boundary point")
    h = grid.h
    cx, cy = grid.xy(k)
    room = min(cx - grid.lo, grid.hi - cx, cy - grid.lo, grid.hi - cy)
    n = grid.n_side
    v = w.as_matrix()
    gx = np.zeros_like(v)
    gy = np.zeros_like(v)
    gx[1:-1, :] = (v[2:, :] - v[:-2, :]) / (2 * h)
    gy[:, 1:-1] = (v[:, 2:] - v[:, :-2]) / (2 * h)
    gmag = np.hypot(gx, gy).ravel()
    x, ycrd = grid.coords()
    d2 = (x - cx) ** 2 + (ycrd - cy) ** 2
    c1s, c2s = [], []
    for d in deltas:
        if d < 4 * h or d + h > room:
            raise PreconditionError(f"delta {d} outside [4h, distance to boundary)")
        m = d2 < d * d
        c1s.append(float(w.values[m].max()) / (d * d))
        c2s.append(float(gmag[m].max()) / d)
    return float(max(c1s)), float(min(c2s))
