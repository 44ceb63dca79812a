"""Discrete nondivergence operator L w = a^{ij} D_{ij} w on the 9-point neighborhood."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .coefficients import CoefficientField
from .grid import Grid, GridError, ScalarField

OFFSETS = [(di, dk) for di in (-1, 0, 1) for dk in (-1, 0, 1)]
CROSS_MODES = ("auto", "central", "directional")


@dataclass(frozen=True)
class MonotonicityReport:
    n_interior: int
    n_violations: int
    worst_violation: float  # scaled by h^2; 0 when monotone

    @property
    def monotone(self) -> bool:
        return self.n_violations == 0

    def as_dict(self) -> dict:
        return {"n_interior": self.n_interior, "n_violations": self.n_violations,
                "worst_violation": self.worst_violation}


@dataclass(frozen=True, eq=False)
class StencilOperator:
    grid: Grid
    weights: dict  # offset -> (n, n) array, zero on the Dirichlet layer
    matrix: sp.csr_matrix
    cross: str
    coeffs: CoefficientField

    @property
    def interior(self) -> np.ndarray:
        return self.grid.interior_mask()


def stencil_weights(coeffs: CoefficientField, cross: str = "auto") -> dict:
    """Per-cell weights for each of the nine offsets.

    ``central`` uses the 4-corner cross difference for D_12. ``directional``
    uses the 7-point form along the diagonal matching the sign of a^12, which
    has nonnegative off-diagonal weights iff |a^12| <= min(a^11, a^22).
    ``auto`` picks directional where that holds and central elsewhere.
    Every variant is exact on quadratics.
    """
    if cross not in CROSS_MODES:
        raise ValueError(f"cross must be one of {CROSS_MODES}, got {cross!r}")
    g = coeffs.grid
    ih2 = 1.0 / g.h ** 2
    a11, a12, a22 = (np.asarray(a, dtype=float) for a in (coeffs.a11, coeffs.a12, coeffs.a22))
    b = np.abs(a12)
    if cross == "central":
        use_dir = np.zeros(g.shape, dtype=bool)
    elif cross == "directional":
        use_dir = np.ones(g.shape, dtype=bool)
    else:
        use_dir = b <= np.minimum(a11, a22)
    pos = a12 >= 0
    W = {o: np.zeros(g.shape) for o in OFFSETS}
    W[(1, 0)] = np.where(use_dir, a11 - b, a11) * ih2
    W[(-1, 0)] = W[(1, 0)].copy()
    W[(0, 1)] = np.where(use_dir, a22 - b, a22) * ih2
    W[(0, -1)] = W[(0, 1)].copy()
    W[(0, 0)] = np.where(use_dir, -2 * a11 - 2 * a22 + 2 * b, -2 * a11 - 2 * a22) * ih2
    main = np.where(use_dir, np.where(pos, b, 0.0), 0.5 * a12) * ih2   # (+1,+1), (-1,-1)
    anti = np.where(use_dir, np.where(pos, 0.0, b), -0.5 * a12) * ih2  # (+1,-1), (-1,+1)
    W[(1, 1)] = main
    W[(-1, -1)] = main.copy()
    W[(1, -1)] = anti
    W[(-1, 1)] = anti.copy()
    inner = g.interior_mask()
    for o in OFFSETS:
        W[o] = np.where(inner, W[o], 0.0)
        W[o].setflags(write=False)
    return W


def assemble(grid: Grid, coeffs: CoefficientField, cross: str = "auto") -> StencilOperator:
    """Sparse matrix of L; rows of the Dirichlet layer are empty."""
    if coeffs.grid != grid:
        raise GridError("coefficients and grid differ")
    W = stencil_weights(coeffs, cross)
    n = grid.n_cells
    idx = np.arange(n * n).reshape(n, n)
    ii, kk = np.nonzero(grid.interior_mask())
    rows, cols, vals = [], [], []
    for (di, dk) in OFFSETS:
        w = W[(di, dk)][ii, kk]
        keep = w != 0.0
        rows.append(idx[ii, kk][keep])
        cols.append(idx[ii + di, kk + dk][keep])
        vals.append(w[keep])
    mat = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                        shape=(n * n, n * n))
    mat.sum_duplicates()
    mat.sort_indices()
    return StencilOperator(grid, W, mat, cross, coeffs)


def apply(op: StencilOperator, w: ScalarField) -> ScalarField:
    """L w on interior cells, 0 on the Dirichlet layer."""
    if w.grid != op.grid:
        raise GridError("field and operator grids differ")
    return ScalarField(op.grid, (op.matrix @ w.values.ravel()).reshape(op.grid.shape))


def monotonicity_report(op: StencilOperator) -> MonotonicityReport:
    inner = op.interior
    h2 = op.grid.h ** 2
    worst = np.zeros(op.grid.shape)
    bad = op.weights[(0, 0)] >= 0
    worst = np.maximum(worst, np.where(bad, op.weights[(0, 0)] * h2, 0.0))
    for o, w in op.weights.items():
        if o != (0, 0):
            bad |= w < 0
            worst = np.maximum(worst, np.where(w < 0, -w * h2, 0.0))
    bad &= inner
    return MonotonicityReport(int(inner.sum()), int(bad.sum()),
                              float(worst[bad].max()) if bad.any() else 0.0)
