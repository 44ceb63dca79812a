import math

import numpy as np
import pytest

from obstacle_vmo.config import ConfigError, parse_config
from obstacle_vmo.experiments import (
    _cap_area, candidate_radii, predicted_offset, run_alternative, run_exact, run_penalized_path,
    run_persistence, run_stability, run_vmo, select_phases, stabilizes_between,
)


def test_select_phases_extrema():
    radii = np.arange(7)[::-1].astype(float)
    scal = [2.0, 2.8, 2.5, 2.1, 2.6, 2.9, 2.7]
    even, odd = select_phases(radii, scal)
    assert even == [radii[1], radii[5]]
    assert odd == [radii[3]]


def test_select_phases_window():
    radii = [4.0, 3.0, 2.0, 1.0]
    even, odd = select_phases(radii, [2.95, 2.5, 2.05, 2.2], rule="window")
    assert even == [4.0] and odd == [2.0]


def test_stabilizes_between():
    assert stabilizes_between([0.0, 0.3, 0.31, 0.29], 0.1, 0.4)
    assert not stabilizes_between([0.3, 0.3, 0.0], 0.1, 0.4)


def test_offset_and_cap_formulas():
    # a w'' = 1 with w(top) = c: w = (x - beta)^2 / (2a), so beta = top - sqrt(2ac)
    assert predicted_offset(1.0, 0.5, 1.0) == pytest.approx(0.0)
    assert _cap_area(0.0, 1.0) == pytest.approx(math.pi / 2)
    assert _cap_area(-1.0, 1.0) == pytest.approx(math.pi)
    assert _cap_area(1.0, 1.0) == pytest.approx(0.0)


def test_candidate_radii():
    cfg = parse_config("[experiment]\nn_radii = 5\nr_max = 0.8\n")
    r = candidate_radii(cfg, 0.01)
    assert r[0] == pytest.approx(0.8) and r[-1] == pytest.approx(0.16) and len(r) == 5
    cfg = parse_config("[analysis]\nradii = 0.1, 0.3\n")
    assert list(candidate_radii(cfg, 0.01)) == [0.3, 0.1]


def test_exact_small():
    rep = run_exact(parse_config("[grid]\nn_cells = 32\n[experiment]\nname = exact\n"))
    assert rep.ok, rep.checks
    assert rep.summary["observed_order"] >= 1.0


def test_penalized_small():
    rep = run_penalized_path(parse_config(
        "[grid]\nn_cells = 32\n[experiment]\nname = penalized-path\neps_list = 0.2, 0.1, 0.05\n"))
    assert rep.ok, rep.checks
    assert len(rep.tables["path"][1]) == 3


def test_stability_small():
    rep = run_stability(parse_config(
        "[grid]\nn_cells = 128\nextent = 4.0\ncenter = 0.0, -1.0\n"
        "[experiment]\nname = stability\ndeltas = 0.2, 0.1\n"))
    assert rep.checks["all_solved"]
    assert rep.checks["area_strictly_decreasing"]
    assert rep.checks["distance_strictly_decreasing"]
    assert rep.summary["top_value"] == pytest.approx(0.245)


def test_stability_rejects_increasing_deltas():
    with pytest.raises(ConfigError):
        run_stability(parse_config("[grid]\nn_cells = 16\n[experiment]\ndeltas = 0.1, 0.2\n"))


def test_persistence_small():
    rep = run_persistence(parse_config(
        "[grid]\nn_cells = 128\n[analysis]\nradii = 0.25, 0.125\nprobe_radius = 0.5\n"
        "[experiment]\nname = persistence\ndeltas = 0.0, 0.1\n"))
    assert rep.checks["smallest_perturbation_all_regular"]
    assert rep.summary["threshold"] == 0.1


def test_persistence_without_probes():
    rep = run_persistence(parse_config(
        "[grid]\nn_cells = 64\n[analysis]\nradii = 0.25\nprobe_radius = 0.1\n"
        "[experiment]\nname = persistence\ndeltas = 0.0\n"))
    assert rep.tables["persistence"][1][0][1] == "no-probes"
    assert not rep.ok


def test_alternative_small():
    rep = run_alternative(parse_config("[grid]\nn_cells = 128\n[experiment]\nname = alternative\n"))
    assert rep.ok, rep.checks


def test_vmo_requires_radial():
    with pytest.raises(ConfigError) as info:
        run_vmo(parse_config("[grid]\nn_cells = 32\n"))
    assert info.value.field == "coefficients.kind"


def test_vmo_dyadic_agreement():
    rep = run_vmo(parse_config(
        "[grid]\nn_cells = 64\n[coefficients]\nkind = radial\nprofile = dyadic\n[analysis]\nr0 = 0.5\n"))
    assert rep.summary["eta_verdict"] == "bounded-below"
    assert rep.summary["psi_verdict"] == "bounded-below"
    assert rep.ok
