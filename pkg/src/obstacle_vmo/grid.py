"""Uniform cell-centered grids on squares, scalar fields, cell sets.

Arrays are indexed ``values[i, k]`` with ``i`` along x1 and ``k`` along x2;
flattening is row-major in that order.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

MIN_CELLS = 8


class GridError(ValueError):
    """Invalid grid construction or out-of-hull access."""


@dataclass(frozen=True)
class Grid:
    """Square of side ``extent`` around ``center`` split into ``n_cells`` per axis.

    The center (not the corner) is the stored anchor so that persisted
    headers reproduce the grid bit-for-bit.
    """

    center: tuple[float, float]
    extent: float
    n_cells: int

    def __post_init__(self):
        if self.n_cells < MIN_CELLS:
            raise GridError(f"n_cells must be >= {MIN_CELLS}, got {self.n_cells}")
        if not self.extent > 0:
            raise GridError(f"extent must be positive, got {self.extent}")

    @property
    def h(self) -> float:
        return self.extent / self.n_cells

    @property
    def origin(self) -> tuple[float, float]:
        half = 0.5 * self.extent
        return (self.center[0] - half, self.center[1] - half)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_cells, self.n_cells)

    def axis(self, d: int) -> np.ndarray:
        return self.origin[d] + (np.arange(self.n_cells) + 0.5) * self.h

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-center coordinate arrays ``(X1, X2)`` of shape ``(n, n)``."""
        return np.meshgrid(self.axis(0), self.axis(1), indexing="ij")

    def interior_mask(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        m[1:-1, 1:-1] = True
        return m

    def boundary_mask(self) -> np.ndarray:
        return ~self.interior_mask()

    def index_of(self, point) -> tuple[int, int]:
        """Index of the cell containing ``point`` (clipped to the grid)."""
        i = int(np.floor((point[0] - self.origin[0]) / self.h))
        k = int(np.floor((point[1] - self.origin[1]) / self.h))
        return (min(max(i, 0), self.n_cells - 1), min(max(k, 0), self.n_cells - 1))

    def cell_center(self, idx) -> tuple[float, float]:
        return (self.origin[0] + (idx[0] + 0.5) * self.h,
                self.origin[1] + (idx[1] + 0.5) * self.h)

    def hull(self) -> tuple[float, float, float, float]:
        """Bounding box of the cell centers: ``(x1_lo, x1_hi, x2_lo, x2_hi)``."""
        lo = 0.5 * self.h
        hi = self.extent - 0.5 * self.h
        return (self.origin[0] + lo, self.origin[0] + hi,
                self.origin[1] + lo, self.origin[1] + hi)

    def describe(self) -> dict:
        return {"extent": self.extent, "n_cells": self.n_cells,
                "center": list(self.center), "h": self.h}


def build_grid(extent: float, n_cells: int, center=(0.0, 0.0)) -> Grid:
    """Square grid of side ``extent`` with ``n_cells`` cells per axis."""
    extent = float(extent)
    if not extent > 0:
        raise GridError(f"extent must be positive, got {extent}")
    return Grid((float(center[0]), float(center[1])), extent, int(n_cells))


def origin_centered_grid(extent: float, n_cells: int) -> Grid:
    """Grid of side ``extent`` shifted by half a cell so that a cell center sits at 0.

    Requires an even ``n_cells``; the cell ``(n/2, n/2)`` is centered at the origin.
    """
    if n_cells % 2:
        raise GridError("origin_centered_grid needs an even n_cells")
    h = extent / n_cells
    return build_grid(extent, n_cells, center=(-0.5 * h, -0.5 * h))


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise GridError(f"field shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise GridError("field contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "ScalarField":
        x1, x2 = grid.coords()
        return cls(grid, np.broadcast_to(fn(x1, x2), grid.shape))

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(c)))

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        _check_same_grid(self.grid, other.grid)
        return ScalarField(self.grid, self.values - other.values)

    def max_abs(self, mask=None) -> float:
        v = self.values if mask is None else self.values[_as_mask(mask)]
        return float(np.max(np.abs(v))) if v.size else 0.0


@dataclass(frozen=True, eq=False)
class CellSet:
    grid: Grid
    mask: np.ndarray

    def __post_init__(self):
        m = np.array(self.mask, dtype=bool)
        if m.shape != self.grid.shape:
            raise GridError(f"mask shape {m.shape} does not match grid {self.grid.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)

    def __len__(self) -> int:
        return int(self.mask.sum())

    def __and__(self, other: "CellSet") -> "CellSet":
        _check_same_grid(self.grid, other.grid)
        return CellSet(self.grid, self.mask & other.mask)

    def __or__(self, other: "CellSet") -> "CellSet":
        _check_same_grid(self.grid, other.grid)
        return CellSet(self.grid, self.mask | other.mask)

    def __xor__(self, other: "CellSet") -> "CellSet":
        _check_same_grid(self.grid, other.grid)
        return CellSet(self.grid, self.mask ^ other.mask)

    def area(self) -> float:
        return len(self) * self.grid.h ** 2

    def centers(self) -> np.ndarray:
        x1, x2 = self.grid.coords()
        return np.column_stack([x1[self.mask], x2[self.mask]])


def _as_mask(m):
    return m.mask if isinstance(m, CellSet) else m


def _check_same_grid(a: Grid, b: Grid):
    if a != b:
        raise GridError("operands live on different grids")


def ball_cells(grid: Grid, center, r: float) -> CellSet:
    """Cells whose centers lie strictly inside the disc of radius ``r``."""
    if not r > 0:
        raise GridError(f"radius must be positive, got {r}")
    x1, x2 = grid.coords()
    d2 = (x1 - center[0]) ** 2 + (x2 - center[1]) ** 2
    return CellSet(grid, d2 < r * r)


def sample(field: ScalarField, point) -> float:
    """Bilinear interpolation from the four surrounding cell centers."""
    return float(sample_many(field, np.atleast_2d(np.asarray(point, dtype=float)))[0])


def sample_many(field: ScalarField, points: np.ndarray) -> np.ndarray:
    """Vectorized :func:`sample` for an ``(m, 2)`` array of points."""
    g = field.grid
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    lo1, hi1, lo2, hi2 = g.hull()
    slack = 1e-12 * g.extent
    if (np.any(pts[:, 0] < lo1 - slack) or np.any(pts[:, 0] > hi1 + slack)
            or np.any(pts[:, 1] < lo2 - slack) or np.any(pts[:, 1] > hi2 + slack)):
        raise GridError("sample point outside the hull of cell centers")
    s = (pts[:, 0] - lo1) / g.h
    t = (pts[:, 1] - lo2) / g.h
    n = g.n_cells
    i0 = np.clip(np.floor(s).astype(int), 0, n - 2)
    k0 = np.clip(np.floor(t).astype(int), 0, n - 2)
    fs = np.clip(s - i0, 0.0, 1.0)
    ft = np.clip(t - k0, 0.0, 1.0)
    v = field.values
    return ((1 - fs) * (1 - ft) * v[i0, k0] + fs * (1 - ft) * v[i0 + 1, k0]
            + (1 - fs) * ft * v[i0, k0 + 1] + fs * ft * v[i0 + 1, k0 + 1])


# -- persistence -----------------------------------------------------------

def _header(grid: Grid, channels: int) -> list[str]:
    c = grid.center
    return [f"extent {grid.extent!r}", f"n_cells {grid.n_cells}",
            f"center {c[0]!r} {c[1]!r}", f"channels {channels}"]


def write_fields(path, grid: Grid, channels: list[np.ndarray]) -> None:
    """Write one or more channels: text header, then row-major values one per line."""
    lines = _header(grid, len(channels))
    for ch in channels:
        lines.extend(repr(float(x)) for x in np.asarray(ch, dtype=float).ravel())
    Path(path).write_text("\n".join(lines) + "\n")


def read_fields(path) -> tuple[Grid, list[np.ndarray]]:
    lines = Path(path).read_text().splitlines()
    head = {}
    for line in lines[:4]:
        key, *vals = line.split()
        head[key] = vals
    try:
        extent = float(head["extent"][0])
        n = int(head["n_cells"][0])
        center = (float(head["center"][0]), float(head["center"][1]))
        nch = int(head["channels"][0])
    except (KeyError, IndexError, ValueError) as exc:
        raise GridError(f"malformed field header in {path}") from exc
    grid = build_grid(extent, n, center)
    body = np.array([float(x) for x in lines[4:]])
    if body.size != nch * n * n:
        raise GridError(f"{path}: expected {nch * n * n} values, found {body.size}")
    return grid, [body[c * n * n:(c + 1) * n * n].reshape(n, n) for c in range(nch)]


def save_field(path, field: ScalarField) -> None:
    write_fields(path, field.grid, [field.values])


def load_field(path) -> ScalarField:
    grid, (v,) = read_fields(path)
    return ScalarField(grid, v)
