"""Penalized approximation: a_eps^{ij} D_ij u = t Phi_eps(u), continuation in t, then eps -> 0."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .complementarity import SolverError, _direct_solve, _split, solve_linear
from .grid import GridError, ScalarField
from .operator import StencilOperator

log = logging.getLogger(__name__)

MAX_HALVINGS = 6


@dataclass(frozen=True)
class PenaltyRamp:
    """C^2 ramp from 0 (t <= 0) to 1 (t >= eps): quintic smoothstep of t/eps."""

    eps: float

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"ramp width must be positive, got {self.eps}")

    def value(self, t):
        s = np.clip(np.asarray(t, dtype=float) / self.eps, 0.0, 1.0)
        return s * s * s * (10.0 + s * (-15.0 + 6.0 * s))

    def derivative(self, t):
        s = np.clip(np.asarray(t, dtype=float) / self.eps, 0.0, 1.0)
        return 30.0 * s * s * (1.0 - s) ** 2 / self.eps


def penalty_value(ramp: PenaltyRamp, t):
    return ramp.value(t)


@dataclass
class SemilinearResult:
    u: ScalarField
    residual: float
    newton_iterations: int
    stages: int


def solve_semilinear(op: StencilOperator, psi: ScalarField, ramp: PenaltyRamp,
                     t_steps: int = 10, tol: float = 1e-9,
                     max_newton: int = 60) -> SemilinearResult:
    """Continuation in t over 1/t_steps, ..., 1 with damped Newton at each stage.

    The Newton matrix is L - t diag(Phi'(u)), an M-matrix whenever L is monotone.
    """
    if psi.grid != op.grid:
        raise GridError("boundary data and operator grids differ")
    if t_steps < 1:
        raise ValueError("t_steps must be >= 1")
    if np.any(psi.values[~op.interior] < 0):
        raise ValueError("boundary data must be nonnegative")
    g = op.grid
    I, B, LII, LIB = _split(op)
    psi_flat = psi.values.ravel()
    lift = LIB @ psi_flat[B]
    u = solve_linear(op, psi, 0.0).values.ravel()[I]  # t = 0 stage

    def F(v, t):
        return LII @ v + lift - t * ramp.value(v)

    total = 0
    last_good = u.copy()
    for stage in range(1, t_steps + 1):
        t = stage / t_steps
        r = F(u, t)
        rn = float(np.abs(r).max()) if r.size else 0.0
        its = 0
        while rn > tol:
            if its >= max_newton:
                raise SolverError(f"Newton did not converge at t={t:.3g} (residual {rn:.3e})",
                                  _as_field(g, I, psi_flat, last_good))
            J = (LII - t * _diag(ramp.derivative(u))).tocsc()
            du = _direct_solve(J, -r)
            step = 1.0
            for _ in range(MAX_HALVINGS + 1):
                cand = u + step * du
                rc = F(cand, t)
                rcn = float(np.abs(rc).max())
                if rcn < rn:
                    break
                step *= 0.5
            u, r, rn = cand, rc, rcn
            its += 1
        total += its
        last_good = u.copy()
        log.debug("stage t=%.3f: %d Newton steps, residual %.3e", t, its, rn)
    return SemilinearResult(_as_field(g, I, psi_flat, u), rn, total, t_steps)


def _diag(v):
    return sp.diags(v, format="csc")


def _as_field(g, I, psi_flat, u_inner) -> ScalarField:
    full = psi_flat.copy()
    full[I] = u_inner
    return ScalarField(g, full.reshape(g.shape))


def mollify_boundary(psi: ScalarField, eps: float) -> ScalarField:
    """Smooth psi along the Dirichlet ring with the 1-D quartic bump (periodic in arclength)."""
    g = psi.grid
    n = g.n_cells
    ring = _ring_indices(n)
    vals = psi.values[ring[:, 0], ring[:, 1]]
    m = int(math.floor(eps / g.h))
    if m == 0:
        return psi
    d = np.arange(-m, m + 1) * g.h / eps
    k = np.where(np.abs(d) < 1, (1 - d * d) ** 2, 0.0)
    k /= k.sum()
    padded = np.concatenate([vals[-m:], vals, vals[:m]])
    smooth = np.convolve(padded, k, mode="valid")
    out = np.array(psi.values)
    out[ring[:, 0], ring[:, 1]] = smooth
    return ScalarField(g, out)


def _ring_indices(n: int) -> np.ndarray:
    """Dirichlet-layer cells in counterclockwise order."""
    bottom = [(i, 0) for i in range(n - 1)]
    right = [(n - 1, k) for k in range(n - 1)]
    top = [(i, n - 1) for i in range(n - 1, 0, -1)]
    left = [(0, k) for k in range(n - 1, 0, -1)]
    return np.array(bottom + right + top + left)


@dataclass
class PathRecord:
    eps: float
    residual: float
    distance: float
    iterations: int
    error: str = ""

    def row(self) -> list:
        return [self.eps, self.residual, self.distance, self.iterations]


def penalized_path(problem, eps_list, tol: float = 1e-9, t_steps: int = 10,
                   oracle=None) -> list[PathRecord]:
    """Penalized solves along a decreasing eps sequence, each compared with the obstacle solution.

    Coefficients are mollified at radius max(eps, h) and the boundary datum along
    the Dirichlet ring at radius eps. A failing eps is recorded and the path goes on.
    """
    from .coefficients import mollify
    from .operator import assemble
    from .problems import solve_problem

    eps_list = [float(e) for e in eps_list]
    grid = problem.grid()
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    if eps_list and eps_list[-1] < grid.h ** 2:
        raise ValueError(f"eps {eps_list[-1]} is below h^2 = {grid.h ** 2}")
    if oracle is None:
        oracle = solve_problem(problem, tol)
    coeffs = problem.coefficient_field(grid)
    psi = problem.psi(grid)
    out = []
    for eps in eps_list:
        op_eps = assemble(grid, mollify(coeffs, max(eps, grid.h)), problem.cross)
        psi_eps = mollify_boundary(psi, eps)
        try:
            res = solve_semilinear(op_eps, psi_eps, PenaltyRamp(eps), t_steps, tol)
        except SolverError as exc:
            out.append(PathRecord(eps, math.nan, math.nan, 0, str(exc)))
            continue
        dist = float(np.abs(res.u.values - oracle.w.values).max())
        out.append(PathRecord(eps, res.residual, dist, res.newton_iterations))
    return out


def path_is_monotone(records, slack: float = 0.10) -> bool:
    """Distances non-increasing along the path up to a relative slack."""
    d = [r.distance for r in records]
    return all(b <= a * (1 + slack) for a, b in zip(d, d[1:]))
