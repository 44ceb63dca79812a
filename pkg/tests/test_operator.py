import numpy as np
import pytest
from hypothesis import given, strategies as st

from obstacle_vmo.coefficients import constant_field, field_from_arrays, radial_scalar_field, counterexample_profile
from obstacle_vmo.grid import GridError, ScalarField, build_grid
from obstacle_vmo.operator import CROSS_MODES, apply, assemble, monotonicity_report, stencil_weights

G = build_grid(2.0, 32)
INNER = G.interior_mask()


def _apply(A, fn, cross="auto", grid=G):
    op = assemble(grid, constant_field(grid, A), cross)
    return apply(op, ScalarField.from_function(grid, fn)).values


def test_laplacian_of_radius_squared():
    v = _apply(np.eye(2), lambda x, y: x ** 2 + y ** 2)
    assert np.allclose(v[INNER], 4.0, atol=1e-10)
    assert np.all(v[~INNER] == 0.0)


@pytest.mark.parametrize("cross", CROSS_MODES)
def test_cross_term_only(cross):
    v = _apply([[2, 1], [1, 2]], lambda x, y: x * y, cross)
    assert np.allclose(v[INNER], 2.0, atol=1e-10)


@pytest.mark.parametrize("cross", CROSS_MODES)
def test_affine_annihilated(cross):
    v = _apply([[2, 0.5], [0.5, 1]], lambda x, y: 3 - x + 7 * y, cross)
    assert np.abs(v[INNER]).max() <= 1e-10


sym_pd = st.tuples(st.floats(0.5, 4), st.floats(-1, 1), st.floats(0.5, 4)).filter(
    lambda t: t[0] * t[2] - t[1] ** 2 > 0.05)


@given(m=sym_pd, cross=st.sampled_from(CROSS_MODES),
       c=st.tuples(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3)))
def test_exact_on_quadratics(m, cross, c):
    a11, a12, a22 = m
    q = lambda x, y: c[0] * x * x + c[1] * x * y + c[2] * y * y + 0.3 * x - 2 * y + 1
    want = a11 * 2 * c[0] + 2 * a12 * c[1] + a22 * 2 * c[2]
    v = _apply([[a11, a12], [a12, a22]], q, cross)
    assert np.abs(v[INNER] - want).max() <= 1e-10 * (1 + abs(want)) * 1e2


@given(m=sym_pd, cross=st.sampled_from(CROSS_MODES))
def test_row_sums_vanish(m, cross):
    a11, a12, a22 = m
    W = stencil_weights(constant_field(G, [[a11, a12], [a12, a22]]), cross)
    total = sum(W.values())
    assert np.abs(total[INNER]).max() * G.h ** 2 <= 1e-12


def test_monotonicity_examples():
    f = radial_scalar_field(G, counterexample_profile(s=4.0))
    assert monotonicity_report(assemble(G, f)).monotone
    assert monotonicity_report(assemble(G, constant_field(G, [[2, 1], [1, 2]]))).n_violations == 0
    rep = monotonicity_report(assemble(G, constant_field(G, [[1, 1.5], [1.5, 4]])))
    assert rep.n_violations == rep.n_interior and rep.worst_violation > 0
    # the plain central cross stencil is not monotone once a12 != 0
    assert not monotonicity_report(assemble(G, constant_field(G, [[2, 1], [1, 2]]), "central")).monotone


@given(m=sym_pd)
def test_auto_monotone_iff_condition(m):
    a11, a12, a22 = m
    rep = monotonicity_report(assemble(G, constant_field(G, [[a11, a12], [a12, a22]])))
    assert rep.monotone == (abs(a12) <= min(a11, a22))


def test_mismatched_grid_and_bad_mode():
    with pytest.raises(GridError):
        assemble(build_grid(2.0, 16), constant_field(G, np.eye(2)))
    with pytest.raises(ValueError):
        stencil_weights(constant_field(G, np.eye(2)), "upwind")


def test_second_order_truncation():
    errs = []
    for n in (32, 64):
        g = build_grid(2.0, n)
        x1, x2 = g.coords()
        a11 = 2 + 0.5 * np.sin(x1)
        a22 = 2 + 0.5 * np.cos(x2)
        a12 = 0.3 * np.cos(x1 + x2)
        op = assemble(g, field_from_arrays(g, a11, a12, a22))
        w = ScalarField.from_function(g, lambda x, y: np.sin(x) * np.cos(y))
        exact = -a11 * np.sin(x1) * np.cos(x2) - 2 * a12 * np.cos(x1) * np.sin(x2) - a22 * np.sin(x1) * np.cos(x2)
        inner = g.interior_mask()
        errs.append(np.abs(apply(op, w).values - exact)[inner].max())
    assert 3.5 <= errs[0] / errs[1] <= 4.5


def test_discrete_maximum_principle():
    g = build_grid(1.0, 24)
    x1, x2 = g.coords()
    a11 = 1.5 + 0.5 * np.sin(3 * x1)
    a22 = 1.5 + 0.5 * np.cos(2 * x2)
    a12 = 0.4 * np.sin(x1 * x2)
    op = assemble(g, field_from_arrays(g, a11, a12, a22))
    assert monotonicity_report(op).monotone
    # v with Lv >= 0 inside: solve Lv = rhs >= 0 with arbitrary boundary values
    from obstacle_vmo.complementarity import solve_linear
    psi = ScalarField.from_function(g, lambda x, y: np.cos(5 * x) + y)
    for rhs in (0.0, 1.0, 7.0):
        v = solve_linear(op, psi, rhs).values
        inner = g.interior_mask()
        assert v[inner].max() <= v[~inner].max() + 1e-12
