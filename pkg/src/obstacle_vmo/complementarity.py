"""Obstacle solver: policy iteration on min(1 - Lw, w) = 0 with Dirichlet data."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import ndimage

from .grid import CellSet, GridError, ScalarField
from .operator import StencilOperator, monotonicity_report

log = logging.getLogger(__name__)

MAX_POLICIES = 200
TIE = 1e-14


class SolverError(RuntimeError):
    """Raised when an iteration fails to converge; carries the best iterate."""

    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best


@dataclass(frozen=True, eq=False)
class ObstacleSolution:
    w: ScalarField
    active: CellSet
    contact: CellSet
    fb_cells: CellSet
    diagnostics: dict = dc_field(default_factory=dict)

    @property
    def grid(self):
        return self.w.grid


def _split(op: StencilOperator):
    n = op.grid.n_cells
    inner = op.interior.ravel()
    I = np.flatnonzero(inner)
    B = np.flatnonzero(~inner)
    L = op.matrix
    return I, B, L[I][:, I].tocsc(), L[I][:, B].tocsr()


def _direct_solve(M, rhs):
    if M.shape[0] == 0:
        return np.zeros(0)
    return spla.spsolve(M, rhs, permc_spec="MMD_AT_PLUS_A")


def solve_linear(op: StencilOperator, psi: ScalarField, rhs=1.0) -> ScalarField:
    """Dirichlet solve of Lv = rhs on interior cells, v = psi on the layer."""
    if psi.grid != op.grid:
        raise GridError("boundary data and operator grids differ")
    I, B, LII, LIB = _split(op)
    psi_flat = psi.values.ravel()
    f = np.broadcast_to(np.asarray(rhs, dtype=float), op.grid.shape).ravel()[I]
    v = psi_flat.copy()
    v[I] = _direct_solve(-LII, -(f - LIB @ psi_flat[B]))
    return ScalarField(op.grid, v.reshape(op.grid.shape))


def free_boundary_cells(active: np.ndarray, contact: np.ndarray) -> np.ndarray:
    """Contact cells with an active 4-neighbor."""
    cross = ndimage.generate_binary_structure(2, 1)
    return contact & ndimage.binary_dilation(active, structure=cross)


def _residual_terms(op: StencilOperator, w: np.ndarray):
    Lw = (op.matrix @ w.ravel()).reshape(op.grid.shape)
    return 1.0 - Lw, w


def complementarity_residual(sol, op: StencilOperator) -> float:
    """max over interior cells of |min(1 - Lw, w)|; accepts a solution or a bare field."""
    w = sol.w if isinstance(sol, ObstacleSolution) else sol
    if w.grid != op.grid:
        raise GridError("field and operator grids differ")
    r1, r2 = _residual_terms(op, w.values)
    res = np.abs(np.minimum(r1, r2))[op.interior]
    return float(res.max()) if res.size else 0.0


def _package(op, w, policy, iterations, residual, extra=None) -> ObstacleSolution:
    g = op.grid
    inner = op.interior
    active = np.zeros(g.shape, dtype=bool)
    active[inner] = policy
    contact = inner & ~active
    diag = {"iterations": iterations, "residual": residual, "h": g.h,
            "n_cells": g.n_cells, "monotonicity": monotonicity_report(op).as_dict()}
    diag.update(extra or {})
    return ObstacleSolution(ScalarField(g, w), CellSet(g, active), CellSet(g, contact),
                            CellSet(g, free_boundary_cells(active, contact)), diag)


def solve_obstacle(op: StencilOperator, psi: ScalarField, tol: float = 1e-9,
                   max_policies: int = MAX_POLICIES, initial_active=None,
                   coefficients: dict | None = None) -> ObstacleSolution:
    """Solve w >= 0, Lw = 1 on {w > 0}, w = psi on the Dirichlet layer.

    Each policy fixes which interior cells obey Lw = 1 (active) and which obey
    w = 0 (contact); the next policy takes, per cell, the branch of
    min(1 - Lw, w) that is smaller. A cell whose two branches agree to within
    the tie tolerance keeps its current assignment.
    """
    if psi.grid != op.grid:
        raise GridError("boundary data and operator grids differ")
    if tol <= 0:
        raise ValueError("tol must be positive")
    bnd = ~op.interior
    if np.any(psi.values[bnd] < 0):
        raise ValueError("boundary data must be nonnegative")
    g = op.grid
    I, B, LII, LIB = _split(op)
    psi_flat = psi.values.ravel()
    rhs = 1.0 - LIB @ psi_flat[B]
    if initial_active is None:
        policy = np.ones(I.size, dtype=bool)
    else:
        mask = initial_active.mask if isinstance(initial_active, CellSet) else initial_active
        policy = np.asarray(mask, dtype=bool).ravel()[I].copy()
    # Lw carries roundoff of order |L| * |w|; ties are judged on that scale
    tie = TIE * max(1.0, float(abs(LII).sum(axis=1).max()) * max(1.0, float(np.abs(psi_flat).max())))
    w = psi_flat.copy()
    best = None
    for it in range(1, max_policies + 1):
        w[I] = 0.0
        P = np.flatnonzero(policy)
        if P.size:
            w[I[P]] = _direct_solve(-LII[P][:, P], -rhs[P])
        Lw = (op.matrix @ w)[I]
        r1 = 1.0 - Lw
        r2 = w[I]
        new = np.where(np.abs(r1 - r2) <= tie, policy, r1 < r2)
        res = float(np.abs(np.minimum(r1, r2)).max()) if I.size else 0.0
        if best is None or res < best[0]:
            best = (res, w.copy(), policy.copy(), it)
        changed = int(np.count_nonzero(new != policy))
        log.debug("policy %d: %d changes, residual %.3e", it, changed, res)
        if changed == 0:
            sol = _package(op, w.reshape(g.shape), policy, it, res,
                           {"coefficients": coefficients or {}})
            if res > tol:
                raise SolverError(f"policy stable but residual {res:.3e} > tol {tol:.3e}", sol)
            return sol
        policy = new
    res, wb, pb, itb = best
    raise SolverError(f"no stable policy after {max_policies} iterations (best residual {res:.3e})",
                      _package(op, wb.reshape(g.shape), pb, itb, res))


def trace_field(grid, fn) -> ScalarField:
    """Field holding ``fn`` on the Dirichlet layer and 0 inside (only the layer is read)."""
    x1, x2 = grid.coords()
    vals = np.where(grid.boundary_mask(), np.broadcast_to(fn(x1, x2), grid.shape), 0.0)
    return ScalarField(grid, vals)
