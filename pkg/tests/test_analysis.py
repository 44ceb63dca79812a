import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from obstacle_vmo.analysis import (
    REGULAR, SINGULAR, UNDETERMINED, DensityProfile, classify, density_profile,
    discrete_sobolev_norm, dyadic_radii, fb_probe_points, growth_ratios, minimum_diameter,
    nondegeneracy_constant, nondegeneracy_report, symmetric_difference_measure, zero_set_density,
)
from obstacle_vmo.coefficients import constant_field
from obstacle_vmo.grid import CellSet, GridError, ScalarField, build_grid
from obstacle_vmo.operator import assemble


def _grid(n=200, extent=2.0, center=(0.0, 0.0)):
    return build_grid(extent, n, center)


def _halfplane(g, beta=0.0):
    x1, x2 = g.coords()
    return CellSet(g, x2 < beta)


def test_density_of_full_and_empty_sets():
    g = _grid()
    full = CellSet(g, np.ones(g.shape, dtype=bool))
    empty = CellSet(g, np.zeros(g.shape, dtype=bool))
    assert zero_set_density(full, (0, 0), 0.5) == 1.0
    assert zero_set_density(empty, (0, 0), 0.5) == 0.0


def test_density_of_halfplane_is_one_half():
    g = _grid()
    prof = density_profile(_halfplane(g), (0.0, 0.0), [0.2, 0.4, 0.8])
    assert np.allclose(prof.g_values, 0.5, atol=0.01)
    assert len(prof.rows()) == 3


def test_density_radius_limits():
    g = _grid(64)
    with pytest.raises(ValueError):
        density_profile(_halfplane(g), (0, 0), [2 * g.h])
    with pytest.raises(GridError):
        density_profile(_halfplane(g), (0.8, 0.0), [0.5])


@given(st.floats(-0.9, 0.9), st.floats(0.05, 0.9))
def test_density_lies_in_unit_interval(beta, r):
    g = _grid(100)
    d = zero_set_density(_halfplane(g, beta), (0.0, 0.0), r)
    assert 0.0 <= d <= 1.0


def test_dyadic_radii():
    assert dyadic_radii(0.25, 0.03) == [0.25, 0.125, 0.0625, 0.03125]
    assert dyadic_radii(0.25, 0.25) == [0.25]


def test_classify_regular():
    prof = DensityProfile((0, 0), (0.25, 0.125, 0.0625), (0.5, 0.49, 0.5))
    v = classify(prof)
    assert v.verdict == REGULAR and v.witness == 0.25


def test_classify_singular():
    prof = DensityProfile((0, 0), (0.25, 0.125, 0.0625), (0.04, 0.01, 0.0))
    assert classify(prof).verdict == SINGULAR


def test_classify_undetermined():
    prof = DensityProfile((0, 0), (0.25, 0.125, 0.0625), (0.2, 0.3, 0.2))
    assert classify(prof).verdict == UNDETERMINED


def test_classify_ignores_radii_above_r0():
    prof = DensityProfile((0, 0), (1.0, 0.25, 0.125), (0.5, 0.0, 0.0))
    assert classify(prof, r0=0.25).verdict == SINGULAR


def test_classify_eps_range():
    prof = DensityProfile((0, 0), (0.25,), (0.5,))
    with pytest.raises(ValueError):
        classify(prof, eps=0.2)


def test_minimum_diameter_single_cell():
    g = _grid(64)
    m = np.zeros(g.shape, dtype=bool)
    m[g.index_of((0.0, 0.0))] = True
    assert minimum_diameter(CellSet(g, m), (0.0, 0.0), 0.5) == pytest.approx(g.h)


def test_minimum_diameter_strip():
    g = _grid(200)
    x1, x2 = g.coords()
    strip = CellSet(g, np.abs(x2) < 0.1)
    assert minimum_diameter(strip, (0.0, 0.0), 0.8) == pytest.approx(0.2, abs=g.h)


def test_minimum_diameter_disc():
    g = _grid(200)
    x1, x2 = g.coords()
    disc = CellSet(g, np.hypot(x1, x2) < 0.3)
    assert abs(minimum_diameter(disc, (0.0, 0.0), 0.9) - 0.6) <= g.h


def test_minimum_diameter_empty():
    g = _grid(32)
    assert minimum_diameter(CellSet(g, np.zeros(g.shape, dtype=bool)), (0, 0), 0.5) == 0.0


def test_symmetric_difference_of_shifted_halfplanes():
    g = _grid(400)
    d = symmetric_difference_measure(_halfplane(g, 0.0), _halfplane(g, 0.1), (0, 0), 1.0)
    # strip 0 <= x2 < 0.1 inside the unit disc
    strip = math.asin(0.1) + 0.1 * math.sqrt(0.99)
    assert d == pytest.approx(strip, rel=0.03)


def test_symmetric_difference_is_a_metric():
    g = _grid(100)
    a, b, c = _halfplane(g, -0.2), _halfplane(g, 0.1), _halfplane(g, 0.3)
    assert symmetric_difference_measure(a, a) == 0.0
    assert symmetric_difference_measure(a, b) == symmetric_difference_measure(b, a)
    assert symmetric_difference_measure(a, c) <= (symmetric_difference_measure(a, b)
                                                   + symmetric_difference_measure(b, c) + 1e-15)


def test_nondegeneracy_constants():
    g = _grid(32)
    assert nondegeneracy_constant(assemble(g, constant_field(g, np.eye(2)))) == 0.25
    assert nondegeneracy_constant(assemble(g, constant_field(g, 2 * np.eye(2)))) == 0.125


def test_nondegeneracy_holds_on_solution(halfspace_problem, halfspace_solution):
    op = halfspace_problem.operator()
    centers = [(x, 0.3) for x in (-0.4, 0.0, 0.4)]
    rep = nondegeneracy_report(halfspace_solution, op, centers, [0.2, 0.4])
    assert rep.ok
    # sup over B_r of (x2 - 0.3)_+^2 / 2 is r^2 / 2, twice the required r^2 / 4
    assert all(row[3] >= 1.8 * row[4] for row in rep.rows)
    assert rep.summary()["violations"] == 0


def test_nondegeneracy_rejects_bad_centers(halfspace_problem, halfspace_solution):
    op = halfspace_problem.operator()
    with pytest.raises(ValueError):
        nondegeneracy_report(halfspace_solution, op, [(0.0, -0.5)], [0.2])
    with pytest.raises(ValueError):
        nondegeneracy_report(halfspace_solution, op, [(0.0, 0.3)], [4 * halfspace_solution.grid.h])


def test_growth_ratios_of_quadratic():
    g = _grid(200)
    x1, x2 = g.coords()
    w = ScalarField(g, 0.5 * np.maximum(x2, 0.0) ** 2)
    ratios = growth_ratios(w, (0.0, 0.0), [0.1, 0.2, 0.4])
    assert np.allclose(ratios, 0.5, atol=0.05)


def test_sobolev_norm_of_linear_function():
    g = build_grid(1.0, 200, (0.5, 0.5))
    w = ScalarField.from_function(g, lambda a, b: a)
    assert discrete_sobolev_norm(w) == pytest.approx(math.sqrt(4.0 / 3.0), rel=1e-3)


def test_sobolev_norm_rejects_bad_p():
    g = build_grid(1.0, 8)
    with pytest.raises(ValueError):
        discrete_sobolev_norm(ScalarField.constant(g, 1.0), p=0.5)


def test_fb_probe_points_lie_on_line(halfspace_solution):
    pts = fb_probe_points(halfspace_solution, (0.0, 0.3), 0.5)
    assert pts
    h = halfspace_solution.grid.h
    assert all(abs(p[1] - 0.3) <= h for p in pts)
