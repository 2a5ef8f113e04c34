"""Uniform square grids, nodal scalar fields, and node-set geometry.

Nodes are indexed (i, j) with physical position (lo + i*h, lo + j*h); the
flat index is k = i*n_side + j, so ascending k is the lexicographic sweep
order used everywhere (x-major, then y).
"""

from __future__ import annotations

import dataclasses

import numpy as np
from scipy import ndimage

from .errors import GeometryError


@dataclasses.dataclass(frozen=True)
class Grid:
    """Node-centered uniform grid on the square [lo, hi]^2."""

    lo: float
    hi: float
    n_side: int

    def __post_init__(self):
        if self.n_side < 3:
            raise GeometryError(f"n_side must be >= 3, got {self.n_side}")
        if not (self.hi > self.lo):
            raise GeometryError(f"degenerate extent: lo={self.lo}, hi={self.hi}")

    @property
    def h(self) -> float:
        return (self.hi - self.lo) / (self.n_side - 1)

    @property
    def n_nodes(self) -> int:
        return self.n_side * self.n_side

    def axis(self) -> np.ndarray:
        return self.lo + self.h * np.arange(self.n_side)

    def coords(self):
        """Flat (X, Y) coordinate arrays of length n_nodes."""
        ax = self.axis()
        x = np.repeat(ax, self.n_side)
        y = np.tile(ax, self.n_side)
        return x, y

    def index(self, i: int, j: int) -> int:
        return i * self.n_side + j

    def ij(self, k: int):
        return divmod(k, self.n_side)

    def xy(self, k: int):
        i, j = self.ij(k)
        return (self.lo + i * self.h, self.lo + j * self.h)

    def snap(self, point) -> int:
        """Flat index of the grid node nearest to a physical point."""
        i = int(round((point[0] - self.lo) / self.h))
        j = int(round((point[1] - self.lo) / self.h))
        if not (0 <= i < self.n_side and 0 <= j < self.n_side):
            raise GeometryError(f"point {tuple(point)} outside the grid")
        return self.index(i, j)

    def boundary_mask(self) -> np.ndarray:
        m = np.zeros((self.n_side, self.n_side), dtype=bool)
        m[0, :] = m[-1, :] = m[:, 0] = m[:, -1] = True
        return m.ravel()

    def index_margin(self, k: int) -> int:
        """Distance to the boundary in grid cells."""
        i, j = self.ij(k)
        n = self.n_side
        return min(i, j, n - 1 - i, n - 1 - j)


def make_grid(lo: float, hi: float, n_side: int) -> Grid:
    return Grid(float(lo), float(hi), int(n_side))


@dataclasses.dataclass(frozen=True)
class ScalarField:
    """One float64 value per grid node, stored flat in node order."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n_nodes,):
            raise GeometryError(
                f"field has {v.shape} values, grid expects ({self.grid.n_nodes},)"
            )
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "ScalarField":
        x, y = grid.coords()
        return cls(grid, np.asarray(fn(x, y), dtype=float) * np.ones_like(x))

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.n_nodes, float(value)))

    def as_matrix(self) -> np.ndarray:
        """(n_side, n_side) view indexed [i, j]."""
        n = self.grid.n_side
        return self.values.reshape(n, n)

    def assert_finite(self, what: str = "field"):
        if not np.all(np.isfinite(self.values)):
            bad = int(np.flatnonzero(~np.isfinite(self.values))[0])
            raise GeometryError(f"{what} has a non-finite value at node {self.grid.ij(bad)}")
        return self

    def to_csv(self, path):
        n = self.grid.n_side
        x, y = self.grid.coords()
        with open(path, "w") as f:
            f.write("i,j,x,y,value\n")
            for k in range(self.grid.n_nodes):
                f.write(
                    "%d,%d,%.12e,%.12e,%.12e\n"
                    % (k // n, k % n, x[k], y[k], self.values[k])
                )

    def to_pgm(self, path):
        """16-bit ASCII PGM, min-max normalized, rows top (max y) to bottom."""
        n = self.grid.n_side
        v = self.as_matrix()
        lo, hi = float(v.min()), float(v.max())
        if hi > lo:
            pix = np.rint((v - lo) / (hi - lo) * 65535.0).astype(int)
        else:
            pix = np.zeros((n, n), dtype=int)
        with open(path, "w") as f:
            f.write(f"P2\n{n} {n}\n65535\n")
            for j in range(n - 1, -1, -1):
                f.write(" ".join(str(int(pix[i, j])) for i in range(n)))
                f.write("\n")


@dataclasses.dataclass(frozen=True)
class NodeSet:
    """Boolean membership mask over the nodes of one grid."""

    grid: Grid
    mask: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool)
        if m.shape != (self.grid.n_nodes,):
            raise GeometryError("node-set mask does not match the grid")
        object.__setattr__(self, "mask", m)

    @classmethod
    def empty(cls, grid: Grid) -> "NodeSet":
        return cls(grid, np.zeros(grid.n_nodes, dtype=bool))

    @classmethod
    def full(cls, grid: Grid) -> "NodeSet":
        return cls(grid, np.ones(grid.n_nodes, dtype=bool))

    def _check(self, other: "NodeSet"):
        if other.grid != self.grid:
            raise GeometryError("node sets live on different grids")

    def union(self, other: "NodeSet") -> "NodeSet":
        self._check(other)
        return NodeSet(self.grid, self.mask | other.mask)

    def intersection(self, other: "NodeSet") -> "NodeSet":
        self._check(other)
        return NodeSet(self.grid, self.mask & other.mask)

    def difference(self, other: "NodeSet") -> "NodeSet":
        self._check(other)
        return NodeSet(self.grid, self.mask & ~other.mask)

    def issubset(self, other: "NodeSet") -> bool:
        self._check(other)
        return bool(np.all(~self.mask | other.mask))

    @property
    def count(self) -> int:
        return int(self.mask.sum())

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    def contains(self, k: int) -> bool:
        return bool(self.mask[k])


def bilinear_sample(field: ScalarField, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    """Bilinear interpolation of a field at physical points (clamped to the box)."""
    g = field.grid
    n = g.n_side
    gi = np.clip((px - g.lo) / g.h, 0.0, n - 1.0)
    gj = np.clip((py - g.lo) / g.h, 0.0, n - 1.0)
    fi = np.clip(np.floor(gi).astype(int), 0, n - 2)
    fj = np.clip(np.floor(gj).astype(int), 0, n - 2)
    s = gi - fi
    t = gj - fj
    v = field.as_matrix()
    return ((1 - s) * (1 - t) * v[fi, fj] + s * (1 - t) * v[fi + 1, fj]
            + (1 - s) * t * v[fi, fj + 1] + s * t * v[fi + 1, fj + 1])


def ball_nodes(grid: Grid, center, radius: float) -> NodeSet:
    """Nodes at Euclidean distance strictly less than ``radius`` from ``center``."""
    if radius < 0:
        raise GeometryError(f"radius must be >= 0, got {radius}")
    x, y = grid.coords()
    d2 = (x - center[0]) ** 2 + (y - center[1]) ** 2
    return NodeSet(grid, d2 < radius * radius)


def _ball_footprint(h: float, delta: float) -> np.ndarray:
    m = int(np.ceil(delta / h)) + 1
    di = np.arange(-m, m + 1)
    d2 = (di[:, None] ** 2 + di[None, :] ** 2) * h * h
    fp = d2 < delta * delta
    fp[m, m] = True  # dilation always keeps the set itself
    return fp


def dilate(s: NodeSet, delta: float) -> NodeSet:
    """Union of open balls of radius ``delta`` around every member (plus the set)."""
    if delta < 0:
        raise GeometryError(f"delta must be >= 0, got {delta}")
    if not s.mask.any():
        return s
    n = s.grid.n_side
    fp = _ball_footprint(s.grid.h, delta)
    out = ndimage.binary_dilation(s.mask.reshape(n, n), structure=fp)
    return NodeSet(s.grid, out.ravel())
