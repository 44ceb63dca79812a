import numpy as np
import pytest
from hypothesis import given, strategies as st

from obstacle_vmo.coefficients import constant_field
from obstacle_vmo.complementarity import trace_field
from obstacle_vmo.grid import ScalarField, build_grid
from obstacle_vmo.operator import assemble
from obstacle_vmo.penalized import (
    PenaltyRamp, mollify_boundary, path_is_monotone, penalized_path, penalty_value,
    solve_semilinear,
)
from obstacle_vmo.problems import Problem


def test_ramp_examples():
    ramp = PenaltyRamp(0.1)
    assert penalty_value(ramp, -1.0) == 0.0
    assert penalty_value(ramp, 0.2) == 1.0
    assert penalty_value(ramp, 0.05) == pytest.approx(0.5, abs=1e-15)


def test_ramp_width_must_be_positive():
    with pytest.raises(ValueError):
        PenaltyRamp(0.0)


@given(st.floats(-1, 1), st.floats(-1, 1))
def test_ramp_monotone_and_bounded(s, t):
    ramp = PenaltyRamp(0.3)
    a, b = sorted((s, t))
    assert 0.0 <= ramp.value(a) <= ramp.value(b) <= 1.0


def test_ramp_derivative_matches_difference():
    ramp = PenaltyRamp(0.2)
    t = np.linspace(-0.05, 0.25, 31)
    d = 1e-7
    fd = (ramp.value(t + d) - ramp.value(t - d)) / (2 * d)
    assert np.allclose(ramp.derivative(t), fd, atol=1e-5)


def test_zero_datum_gives_zero():
    g = build_grid(2.0, 24)
    op = assemble(g, constant_field(g, np.eye(2)))
    res = solve_semilinear(op, ScalarField.constant(g, 0.0), PenaltyRamp(0.05))
    assert np.abs(res.u.values).max() <= 1e-12


def test_semilinear_solution_is_nonnegative_and_converged():
    g = build_grid(2.0, 32)
    op = assemble(g, constant_field(g, np.eye(2)))
    psi = trace_field(g, lambda a, b: 0.5 * np.maximum(b - 0.3, 0.0) ** 2)
    res = solve_semilinear(op, psi, PenaltyRamp(0.02))
    assert res.residual <= 1e-9
    assert res.u.values.min() >= -1e-9


def test_eps_below_h_squared_rejected():
    p = Problem(n_cells=16)
    h = p.grid().h
    with pytest.raises(ValueError):
        penalized_path(p, [0.1, 0.5 * h * h])


def test_eps_must_decrease():
    with pytest.raises(ValueError):
        penalized_path(Problem(n_cells=16), [0.01, 0.1])


def test_boundary_mollification_preserves_constants():
    g = build_grid(2.0, 20)
    psi = ScalarField.constant(g, 0.7)
    out = mollify_boundary(psi, 0.3)
    assert np.allclose(out.values[g.boundary_mask()], 0.7)


def test_path_distances_shrink():
    recs = penalized_path(Problem(n_cells=32), [0.1, 0.03, 0.01])
    assert all(r.error == "" for r in recs)
    assert path_is_monotone(recs)
    assert recs[-1].distance < recs[0].distance


def test_path_is_monotone_slack():
    class R:
        def __init__(self, d):
            self.distance = d
    assert path_is_monotone([R(1.0), R(1.05), R(0.5)])
    assert not path_is_monotone([R(1.0), R(1.2)])
