"""Zero-set geometry: densities, regular/singular verdicts, widths, growth checks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import ndimage

from .complementarity import ObstacleSolution
from .grid import CellSet, GridError, ScalarField, ball_cells, _check_same_grid
from .operator import StencilOperator

DIM = 2

REGULAR, SINGULAR, UNDETERMINED = "Regular", "Singular", "Undetermined"


@dataclass(frozen=True)
class DensityProfile:
    center: tuple
    radii: tuple
    g_values: tuple

    def rows(self) -> list[list]:
        return [[self.center[0], self.center[1], r, g] for r, g in zip(self.radii, self.g_values)]


def _check_ball_inside(grid, center, r):
    lo1, hi1, lo2, hi2 = (grid.origin[0], grid.origin[0] + grid.extent,
                          grid.origin[1], grid.origin[1] + grid.extent)
    if (center[0] - r < lo1 - 1e-12 or center[0] + r > hi1 + 1e-12
            or center[1] - r < lo2 - 1e-12 or center[1] + r > hi2 + 1e-12):
        raise GridError(f"ball of radius {r} around {tuple(center)} leaves the grid")


def zero_set_density(contact: CellSet, center, r: float) -> float:
    ball = ball_cells(contact.grid, center, r).mask
    n = int(ball.sum())
    return float((contact.mask & ball).sum()) / n if n else 0.0


def density_profile(sol: ObstacleSolution | CellSet, center, radii) -> DensityProfile:
    """g(r) = |contact within B_r| / |B_r|, both counted in cells.

    Normalizing by the ball's own cell count (not pi r^2) keeps g in [0, 1] exactly.
    """
    contact = sol.contact if isinstance(sol, ObstacleSolution) else sol
    g = contact.grid
    radii = tuple(float(r) for r in radii)
    for r in radii:
        if r < 4 * g.h * (1 - 1e-12):
            raise ValueError(f"radius {r} is below 4h = {4 * g.h}")
        _check_ball_inside(g, center, r)
    vals = tuple(zero_set_density(contact, center, r) for r in radii)
    return DensityProfile(tuple(float(c) for c in center), radii, vals)


def dyadic_radii(r0: float, r_min: float) -> list[float]:
    """r0, r0/2, r0/4, ... down to (and including) the last value >= r_min."""
    out = []
    r = r0
    while r >= r_min * (1 - 1e-12):
        out.append(r)
        r *= 0.5
    return out


@dataclass(frozen=True)
class ClassificationVerdict:
    verdict: str
    eps: float
    r0: float
    tau: float
    witness: float | None = None


def classify(profile: DensityProfile, eps: float = 0.05, r0: float = 0.25,
             tau: float = 1.0) -> ClassificationVerdict:
    """Regular / Singular / Undetermined from the tested radii.

    Regular: some tested t <= r0 has g(t) >= eps and every tested r <= tau*t
    (at least one) has g(r) >= 1/2 - eps. Singular: g <= eps at every tested r <= r0.
    """
    if not 0 < eps < 0.125:
        raise ValueError(f"eps must lie in (0, 1/8), got {eps}")
    pairs = sorted(zip(profile.radii, profile.g_values), reverse=True)
    below = [(r, gv) for r, gv in pairs if r <= r0 * (1 + 1e-12)]
    for t, gt in below:
        if gt < eps:
            continue
        inner = [gv for r, gv in pairs if r <= tau * t * (1 + 1e-12)]
        if inner and all(gv >= 0.5 - eps for gv in inner):
            return ClassificationVerdict(REGULAR, eps, r0, tau, t)
    if below and all(gv <= eps for _, gv in below):
        return ClassificationVerdict(SINGULAR, eps, r0, tau)
    return ClassificationVerdict(UNDETERMINED, eps, r0, tau)


def minimum_diameter(cells: CellSet, center, r: float, n_directions: int = 180) -> float:
    """Least width over sampled directions of the set within B_r(center), plus one h."""
    m = cells.mask & ball_cells(cells.grid, center, r).mask
    if not m.any():
        return 0.0
    x1, x2 = cells.grid.coords()
    pts = np.column_stack([x1[m], x2[m]])
    theta = np.deg2rad(np.arange(n_directions) * (180.0 / n_directions))
    proj = pts @ np.vstack([np.cos(theta), np.sin(theta)])
    widths = proj.max(axis=0) - proj.min(axis=0)
    return float(widths.min() + cells.grid.h)


def symmetric_difference_measure(s1: CellSet, s2: CellSet, center=(0.0, 0.0),
                                 r: float = 1.0) -> float:
    """Area of cells in exactly one of the sets, within B_r(center)."""
    _check_same_grid(s1.grid, s2.grid)
    m = (s1.mask ^ s2.mask) & ball_cells(s1.grid, center, r).mask
    return float(m.sum()) * s1.grid.h ** 2


# -- growth checks ----------------------------------------------------------

def _sup_in_ball(w: ScalarField, center, r: float) -> float:
    m = ball_cells(w.grid, center, r).mask
    return float(w.values[m].max()) if m.any() else 0.0


def in_active_closure(sol: ObstacleSolution, point) -> bool:
    g = sol.grid
    near = ndimage.binary_dilation(sol.active.mask, structure=np.ones((3, 3), dtype=bool))
    return bool(near[g.index_of(point)])


@dataclass
class NondegeneracyReport:
    rows: list = dc_field(default_factory=list)  # center1, center2, r, sup, required, margin, ok

    @property
    def ok(self) -> bool:
        return all(row[-1] for row in self.rows)

    def summary(self) -> dict:
        margins = [row[5] for row in self.rows]
        return {"checks": len(self.rows), "violations": sum(not row[-1] for row in self.rows),
                "min_margin": min(margins) if margins else None}


def nondegeneracy_constant(op: StencilOperator, center=None, r=None) -> float:
    """1 / (2n max|a^{ij}|), the max taken over B_r(center) when given."""
    c = op.coeffs
    if center is None:
        amax = c.max_abs_entry()
    else:
        m = ball_cells(op.grid, center, r).mask
        amax = max(float(np.abs(a[m]).max()) for a in (c.a11, c.a12, c.a22))
    return 1.0 / (2 * DIM * amax)


def nondegeneracy_report(sol: ObstacleSolution, op: StencilOperator, centers, radii,
                         slack: float | None = None) -> NondegeneracyReport:
    """sup_{B_r(x0)} w against C r^2 for x0 in the closure of the positivity set."""
    g = sol.grid
    if slack is None:
        slack = 2 * g.h ** 2
    rep = NondegeneracyReport()
    for c in centers:
        if not in_active_closure(sol, c):
            raise ValueError(f"center {tuple(c)} is not in the closure of the positivity set")
        for r in radii:
            if r < 8 * g.h * (1 - 1e-12):
                raise ValueError(f"radius {r} is below 8h = {8 * g.h}")
            sup = _sup_in_ball(sol.w, c, r)
            need = nondegeneracy_constant(op, c, r) * r * r
            rep.rows.append([float(c[0]), float(c[1]), float(r), sup, need, sup - need,
                             bool(sup >= need - slack)])
    return rep


def growth_ratios(w: ScalarField, center, radii) -> list[float]:
    """sup_{B_r(center)} w / r^2 for each radius."""
    return [_sup_in_ball(w, center, r) / (r * r) for r in radii]


def discrete_sobolev_norm(field: ScalarField, p: float = 2.0) -> float:
    """(sum over cells of |w|^p + |Dw|^p + |D^2 w|^p, times h^2)^(1/p)."""
    if not 1 <= p < math.inf:
        raise ValueError(f"p must lie in [1, inf), got {p}")
    h = field.grid.h
    w = field.values
    d1, d2 = np.gradient(w, h, edge_order=2)
    d11, d12 = np.gradient(d1, h, edge_order=2)
    _, d22 = np.gradient(d2, h, edge_order=2)
    grad = np.hypot(d1, d2)
    hess = np.sqrt(d11 ** 2 + 2 * d12 ** 2 + d22 ** 2)
    total = (np.abs(w) ** p + grad ** p + hess ** p).sum() * h * h
    return float(total ** (1.0 / p))


def fb_probe_points(sol: ObstacleSolution, center, r: float, stride: int = 1) -> list[tuple]:
    """Points midway between each free-boundary cell and its active 4-neighbors, inside B_r."""
    g = sol.grid
    fb = sol.fb_cells.mask & ball_cells(g, center, r).mask
    act = sol.active.mask
    pts = []
    for i, k in np.argwhere(fb)[::stride]:
        x = g.cell_center((i, k))
        for di, dk in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            if act[i + di, k + dk]:
                pts.append((x[0] + 0.5 * di * g.h, x[1] + 0.5 * dk * g.h))
    return pts
