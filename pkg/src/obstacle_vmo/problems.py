"""Problem descriptions: grid + coefficient descriptor + boundary datum, and a nested solve."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import coefficients as cf
from .complementarity import ObstacleSolution, solve_obstacle, trace_field
from .grid import Grid, build_grid, origin_centered_grid
from .operator import StencilOperator, assemble

NEST_MIN_CELLS = 32


def halfspace_datum(scale: float, beta: float, normal=(0.0, 1.0), offset: float = 0.0):
    nu = np.asarray(normal, dtype=float)
    nu = nu / np.linalg.norm(nu)

    def fn(x1, x2):
        return scale * np.maximum(x1 * nu[0] + x2 * nu[1] - beta, 0.0) ** 2 + offset
    return fn


def profile_from_descriptor(d: dict) -> cf.RadialProfile:
    kind = d.get("profile", "constant")
    if kind == "oscillation":
        return cf.counterexample_profile(d.get("omega"), d.get("s", 1.0))
    if kind == "dyadic":
        return cf.dyadic_profile(d.get("low", 2.0), d.get("high", 3.0))
    if kind == "step":
        return cf.step_profile(d["radius"], d["inner"], d["outer"])
    if kind == "constant":
        return cf.constant_profile(d["value"])
    raise ValueError(f"unknown radial profile {kind!r}")


def coefficient_field(grid: Grid, d: dict) -> cf.CoefficientField:
    kind = d.get("kind", "scalar")
    if kind == "constant":
        field = cf.constant_field(grid, d["matrix"])
    elif kind == "scalar":
        field = cf.constant_field(grid, float(d.get("value", 1.0)) * np.eye(2))
    elif kind == "radial":
        field = cf.radial_scalar_field(grid, profile_from_descriptor(d))
    elif kind == "radial_perturbation":
        # A + delta * (f(|x|) - 2) I with f the oscillating profile (f - 2 in [0, 1])
        A = np.asarray(d["matrix"], dtype=float)
        base = cf.radial_scalar_field(grid, cf.counterexample_profile(d.get("omega"), d.get("s", 1.0)))
        bump = float(d["delta"]) * (np.asarray(base.a11) - 2.0)
        field = cf.field_from_arrays(grid, A[0, 0] + bump, np.full(grid.shape, A[0, 1]),
                                     A[1, 1] + bump, descriptor=dict(d))
    else:
        raise ValueError(f"unknown coefficient kind {kind!r}")
    if d.get("mollify"):
        field = cf.mollify(field, max(float(d["mollify"]), grid.h))
    return field


def boundary_function(d: dict):
    kind = d.get("kind", "halfspace")
    if kind == "halfspace":
        return halfspace_datum(float(d.get("scale", 0.5)), float(d.get("beta", 0.0)),
                               d.get("normal", (0.0, 1.0)), float(d.get("offset", 0.0)))
    if kind == "constant":
        c = float(d["value"]) + float(d.get("offset", 0.0))
        return lambda x1, x2: np.full(np.broadcast(x1, x2).shape, c)
    raise ValueError(f"unknown boundary kind {kind!r}")


@dataclass(frozen=True)
class Problem:
    n_cells: int = 128
    extent: float = 2.0
    center: tuple = (0.0, 0.0)
    origin_cell: bool = False
    coefficients: dict = dc_field(default_factory=lambda: {"kind": "scalar", "value": 1.0})
    boundary: dict = dc_field(default_factory=lambda: {"kind": "halfspace", "scale": 0.5, "beta": 0.3})
    cross: str = "auto"

    def grid(self) -> Grid:
        if self.origin_cell:
            return origin_centered_grid(self.extent, self.n_cells)
        return build_grid(self.extent, self.n_cells, self.center)

    def with_(self, **kw) -> "Problem":
        return dataclasses.replace(self, **kw)

    def with_boundary(self, **kw) -> "Problem":
        return self.with_(boundary={**self.boundary, **kw})

    def coefficient_field(self, grid: Grid | None = None) -> cf.CoefficientField:
        return coefficient_field(grid or self.grid(), self.coefficients)

    def operator(self, grid: Grid | None = None) -> StencilOperator:
        grid = grid or self.grid()
        return assemble(grid, self.coefficient_field(grid), self.cross)

    def psi(self, grid: Grid | None = None):
        return trace_field(grid or self.grid(), boundary_function(self.boundary))

    def describe(self) -> dict:
        return {"n_cells": self.n_cells, "extent": self.extent, "center": list(self.center),
                "origin_cell": self.origin_cell, "coefficients": self.coefficients,
                "boundary": self.boundary, "cross": self.cross}


def prolong_mask(coarse: Grid, mask: np.ndarray, fine: Grid) -> np.ndarray:
    """Fine-cell mask taking the value of the coarse cell containing each fine center."""
    x1, x2 = fine.coords()
    i = np.clip(np.floor((x1 - coarse.origin[0]) / coarse.h).astype(int), 0, coarse.n_cells - 1)
    k = np.clip(np.floor((x2 - coarse.origin[1]) / coarse.h).astype(int), 0, coarse.n_cells - 1)
    return mask[i, k]


def solve_problem(problem: Problem, tol: float = 1e-9, nested: bool = True,
                  initial_active=None) -> ObstacleSolution:
    """Solve on ``problem.grid()``; with ``nested`` the first policy comes from a half-resolution solve."""
    grid = problem.grid()
    op = problem.operator(grid)
    if initial_active is None and nested and problem.n_cells >= 2 * NEST_MIN_CELLS \
            and problem.n_cells % 2 == 0:
        coarse = solve_problem(problem.with_(n_cells=problem.n_cells // 2), tol, nested=True)
        initial_active = ~prolong_mask(coarse.grid, coarse.contact.mask, grid)
    return solve_obstacle(op, problem.psi(grid), tol, initial_active=initial_active,
                          coefficients=problem.coefficients)
