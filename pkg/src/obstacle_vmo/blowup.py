"""Quadratic rescalings w_r(x) = r^-2 w(r x), half-space references, free-boundary pinning."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field as dc_field

import numpy as np

from .coefficients import CoefficientField, averaged_matrix, eigenvalues_2x2
from .complementarity import ObstacleSolution
from .grid import Grid, GridError, ScalarField, ball_cells, sample_many

log = logging.getLogger(__name__)

COLLAR_CELLS = 4


class PinningError(RuntimeError):
    """The origin never lands on the free boundary inside the given bracket."""

    def __init__(self, msg, history=None):
        super().__init__(msg)
        self.history = history or []


def rescale(field: ScalarField, r: float, out_grid: Grid, center=(0.0, 0.0)) -> ScalarField:
    """Rescaled field r^-2 w(center + r x) sampled at the cell centers of ``out_grid``."""
    src = field.grid
    if r < 8 * src.h * (1 - 1e-12):
        raise GridError(f"rescale radius {r} is below 8h = {8 * src.h} of the source grid")
    x1, x2 = out_grid.coords()
    pts = np.column_stack([center[0] + r * x1.ravel(), center[1] + r * x2.ravel()])
    vals = sample_many(field, pts) / (r * r)
    return ScalarField(out_grid, vals.reshape(out_grid.shape))


def profile_scale(A) -> float:
    """Leading coefficient 1/(2 nu^T A nu) of the half-space solution for A (nu = e2)."""
    return profile_scale_along(A, (0.0, 1.0))


def profile_scale_along(A, normal) -> float:
    A = np.asarray(A, dtype=float)
    nu = np.asarray(normal, dtype=float)
    nu = nu / np.linalg.norm(nu)
    return 1.0 / (2.0 * float(nu @ A @ nu))


def halfspace_profile(A, normal, beta: float, grid: Grid) -> ScalarField:
    """q(x) = ((x.nu - beta)_+)^2 / (2 nu^T A nu), which solves A^{ij} D_ij q = chi_{q > 0}."""
    A = np.asarray(A, dtype=float)
    lo, _ = eigenvalues_2x2(A[0, 0], A[0, 1], A[1, 1])
    if not lo > 0 or abs(A[0, 1] - A[1, 0]) > 1e-14:
        raise ValueError("reference matrix must be symmetric positive definite")
    nu = np.asarray(normal, dtype=float)
    if abs(np.linalg.norm(nu) - 1.0) > 1e-12:
        raise ValueError("normal must be a unit vector")
    k = profile_scale_along(A, nu)
    x1, x2 = grid.coords()
    return ScalarField(grid, k * np.maximum(x1 * nu[0] + x2 * nu[1] - beta, 0.0) ** 2)


@dataclass(frozen=True)
class Reference:
    name: str
    scale: float              # q = scale * ((x.nu - beta)_+)^2
    normal: tuple = (0.0, 1.0)

    @classmethod
    def for_matrix(cls, name: str, A, normal=(0.0, 1.0)) -> "Reference":
        return cls(name, profile_scale_along(A, normal), tuple(normal))


def _profile_values(ref: Reference, x1, x2, beta):
    return ref.scale * np.maximum(x1 * ref.normal[0] + x2 * ref.normal[1] - beta, 0.0) ** 2


def reference_distance(field: ScalarField, ref: Reference, window: float = 0.5,
                       collar: float | None = None, beta_range=(-0.25, 0.25)) -> tuple[float, float]:
    """Max-norm distance on B_window to ``ref`` after fitting its offset; returns (distance, beta).

    Cells within ``collar`` of the fitted reference free boundary are excluded.
    """
    g = field.grid
    if collar is None:
        collar = COLLAR_CELLS * g.h
    x1, x2 = g.coords()
    m = ball_cells(g, (0.0, 0.0), window).mask
    X1, X2, V = x1[m], x2[m], field.values[m]
    s = X1 * ref.normal[0] + X2 * ref.normal[1]

    def dist(beta):
        keep = np.abs(s - beta) >= collar
        if not keep.any():
            return np.inf
        return float(np.abs(V[keep] - _profile_values(ref, X1[keep], X2[keep], beta)).max())

    coarse = np.arange(beta_range[0], beta_range[1] + 0.5 * g.h, g.h)
    vals = [dist(b) for b in coarse]
    j = int(np.argmin(vals))
    best_b, best_d = float(coarse[j]), float(vals[j])
    # refine on successively finer uniform sweeps around the best offset
    lo, hi = best_b - g.h, best_b + g.h
    for _ in range(3):
        fine = np.linspace(lo, hi, 41)
        fv = [dist(b) for b in fine]
        jj = int(np.argmin(fv))
        if fv[jj] < best_d:
            best_b, best_d = float(fine[jj]), float(fv[jj])
        step = fine[1] - fine[0]
        lo, hi = best_b - step, best_b + step
    return best_d, best_b


@dataclass
class BlowupRecord:
    r: float
    field: ScalarField
    averaged: np.ndarray
    distances: dict = dc_field(default_factory=dict)   # name -> (distance, beta)
    min_value: float = 0.0

    def row(self, names) -> list:
        a = self.averaged
        out = [self.r, a[0, 0], a[0, 1], a[1, 1]]
        for n in names:
            out.extend(self.distances[n])
        return out


def blowup_sequence(sol: ObstacleSolution, coeffs: CoefficientField, radii, references,
                    out_grid: Grid, center=(0.0, 0.0), window: float = 0.5) -> list[BlowupRecord]:
    """Rescale at each radius, average the coefficients over B_r, compare with each reference."""
    src_h = sol.grid.h
    records = []
    for r in radii:
        w_r = rescale(sol.w, r, out_grid, center)
        A_r = averaged_matrix(coeffs, center, r)
        collar = COLLAR_CELLS * max(out_grid.h, src_h / r)
        dists = {ref.name: reference_distance(w_r, ref, window, collar) for ref in references}
        records.append(BlowupRecord(float(r), w_r, A_r, dists, float(w_r.values.min())))
    return records


# -- pinning the free boundary at the origin --------------------------------

def origin_state(sol: ObstacleSolution, point=(0.0, 0.0)) -> str:
    idx = sol.grid.index_of(point)
    if sol.fb_cells.mask[idx]:
        return "fb"
    return "contact" if sol.contact.mask[idx] else "active"


def pin_free_boundary(problem, bracket=(-0.1, 0.1), tol: float = 1e-9, point=(0.0, 0.0),
                      max_steps: int = 60):
    """Bisection on the boundary offset beta until the cell at ``point`` is a free-boundary cell.

    The datum is the problem's half-space trace with offset beta. Larger beta
    pushes the zero set up, so the cell is active at the lower end and in
    contact at the upper end. Returns (beta, solution, history).
    """
    from .problems import solve_problem

    grid = problem.grid()
    lo, hi = float(bracket[0]), float(bracket[1])
    history = []

    def run(beta, init=None):
        s = solve_problem(problem.with_boundary(beta=beta), tol, initial_active=init)
        st = origin_state(s, point)
        history.append((beta, st, s.diagnostics["iterations"]))
        return s, st

    s_lo, st_lo = run(lo)
    s_hi, st_hi = run(hi, s_lo.active.mask)
    if st_lo != "active" or st_hi == "active":
        raise PinningError(f"bracket [{lo}, {hi}] does not straddle the free boundary "
                           f"(states {st_lo}, {st_hi})", history)
    steps = 0
    while hi - lo > grid.h ** 2 and steps < max_steps:
        mid = 0.5 * (lo + hi)
        s_mid, st_mid = run(mid, s_hi.active.mask)
        if st_mid == "active":
            lo, s_lo = mid, s_mid
        else:
            hi, s_hi, st_hi = mid, s_mid, st_mid
        steps += 1
    if st_hi != "fb":
        raise PinningError(f"origin cell is {st_hi} at beta={hi}; it never sits on the free boundary",
                           history)
    log.info("pinned beta=%.9f after %d bisection steps", hi, steps)
    return hi, s_hi, history
