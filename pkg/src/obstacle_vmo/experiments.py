"""End-to-end experiments. Each run is deterministic given its config and returns a Report."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import ndimage

from . import __version__
from .analysis import (REGULAR, classify, density_profile, dyadic_radii, fb_probe_points,
                       symmetric_difference_measure)
from .blowup import Reference, blowup_sequence, pin_free_boundary, profile_scale_along
from .coefficients import EllipticityError, averaged_matrix
from .complementarity import SolverError
from .config import ConfigError, ExperimentConfig, serialize_config
from .grid import build_grid
from .penalized import path_is_monotone, penalized_path
from .problems import boundary_function, profile_from_descriptor, solve_problem
from .vmo import (bramanti_check, curve_verdict, decay_slope, psi_curve, vmo_modulus)
from .grid import ScalarField

log = logging.getLogger(__name__)


@dataclass
class Report:
    name: str
    config: dict
    version: str = __version__
    tables: dict = dc_field(default_factory=dict)     # name -> (header, rows)
    checks: dict = dc_field(default_factory=dict)     # name -> bool
    summary: dict = dc_field(default_factory=dict)
    solutions: dict = dc_field(default_factory=dict)  # name -> ObstacleSolution

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def failed(self) -> list[str]:
        return [k for k, v in self.checks.items() if not v]


def _report(name: str, cfg: ExperimentConfig) -> Report:
    return Report(name, {"text": serialize_config(cfg), **cfg.as_dict()})


def _solve(problem, cfg: ExperimentConfig, **kw):
    return solve_problem(problem, cfg.get("solver.tol"), nested=cfg.get("solver.nested"), **kw)


def _constant_matrix(cfg: ExperimentConfig) -> np.ndarray:
    c = cfg["coefficients"]
    if c["kind"] == "scalar":
        return c["value"] * np.eye(2)
    if c["kind"] == "constant":
        a11, a12, a22 = c["matrix"]
        return np.array([[a11, a12], [a12, a22]])
    raise ConfigError("coefficients.kind", f"needs constant coefficients, got {c['kind']!r}")


def _unit_normal(cfg: ExperimentConfig) -> np.ndarray:
    nu = np.asarray(cfg.get("boundary.normal"), dtype=float)
    return nu / np.linalg.norm(nu)


# -- manufactured solution ---------------------------------------------------

def exact_solution(cfg: ExperimentConfig, grid):
    """Half-space profile for constant coefficients; the boundary datum must be its trace."""
    A = _constant_matrix(cfg)
    b = cfg["boundary"]
    nu = _unit_normal(cfg)
    k = profile_scale_along(A, nu)
    if b["kind"] != "halfspace" or b["offset"] != 0 or not math.isclose(b["scale"], k, rel_tol=1e-12):
        raise ConfigError("boundary.scale", f"datum is not the trace of the half-space solution "
                                            f"(scale must be {k!r} with zero offset)")
    return ScalarField.from_function(grid, boundary_function(cfg.boundary_descriptor()))


def _fb_offset(sol, nu, beta) -> float:
    """Largest distance from a free-boundary cell center to the plane x.nu = beta."""
    x1, x2 = sol.grid.coords()
    s = x1 * nu[0] + x2 * nu[1] - beta
    fb = sol.fb_cells.mask
    return float(np.abs(s[fb]).max()) if fb.any() else math.inf


def _misclassified(sol, nu, beta) -> int:
    """Cells more than one h from the plane that sit on the wrong side."""
    g = sol.grid
    x1, x2 = g.coords()
    s = x1 * nu[0] + x2 * nu[1] - beta
    inner = g.interior_mask()
    far = inner & (np.abs(s) > g.h)
    wrong = far & (sol.contact.mask != (s < 0))
    return int(wrong.sum())


def run_exact(cfg: ExperimentConfig) -> Report:
    rep = _report("exact", cfg)
    nu = _unit_normal(cfg)
    beta = cfg.get("boundary.beta")
    sizes = [cfg.get("grid.n_cells")]
    if cfg.get("experiment.refine"):
        sizes.append(2 * sizes[0])
    rows, errors = [], []
    for n in sizes:
        problem = cfg.replace(**{"grid.n_cells": n}).problem()
        sol = _solve(problem, cfg)
        exact = exact_solution(cfg, sol.grid)
        err = float(np.abs(sol.w.values - exact.values).max())
        errors.append(err)
        rows.append([n, sol.grid.h, err, sol.diagnostics["residual"], sol.diagnostics["iterations"],
                     _fb_offset(sol, nu, beta), _misclassified(sol, nu, beta)])
        rep.solutions[f"n{n}"] = sol
    rep.tables["convergence"] = (["n_cells", "h", "max_error", "residual", "policies",
                                  "fb_max_offset", "misclassified"], rows)
    h = rows[0][1]
    rep.checks["error_within_5h"] = errors[0] <= 5 * h
    rep.checks["contact_boundary_within_one_cell"] = rows[0][5] <= h and rows[0][6] == 0
    if len(errors) > 1:
        order = math.log2(errors[0] / errors[1]) if errors[1] > 0 else math.inf
        rep.summary["observed_order"] = order
        rep.checks["order_at_least_1"] = order >= 1.0
    rep.summary["errors"] = errors
    return rep


# -- penalized path ----------------------------------------------------------

def run_penalized_path(cfg: ExperimentConfig) -> Report:
    rep = _report("penalized-path", cfg)
    problem = cfg.problem()
    oracle = _solve(problem, cfg)
    recs = penalized_path(problem, cfg.get("experiment.eps_list"), cfg.get("solver.tol"),
                          cfg.get("solver.t_steps"), oracle=oracle)
    h = oracle.grid.h
    rep.tables["path"] = (["eps", "residual", "distance", "newton_iterations", "bound"],
                          [r.row() + [2 * r.eps + 10 * h] for r in recs])
    rep.checks["all_stages_solved"] = all(not r.error for r in recs)
    rep.checks["non_increasing"] = path_is_monotone(recs, cfg.get("analysis.slack"))
    rep.checks["within_2eps_plus_10h"] = all(r.distance <= 2 * r.eps + 10 * h for r in recs)
    rep.summary["errors"] = {r.eps: r.error for r in recs if r.error}
    rep.solutions["oracle"] = oracle
    return rep


# -- measure stability -------------------------------------------------------

def _cap_area(y: float, R: float) -> float:
    """Area of {x in B_R : x2 > y}."""
    y = min(max(y, -R), R)
    return R * R * math.acos(y / R) - y * math.sqrt(R * R - y * y)


def predicted_offset(a: float, c: float, top: float) -> float:
    """Free-boundary height of the 1-D problem a w'' = 1 on (beta, top), w(top) = c."""
    return top - math.sqrt(2 * a * c)


def run_stability(cfg: ExperimentConfig) -> Report:
    rep = _report("stability", cfg)
    deltas = [float(d) for d in cfg.get("experiment.deltas")]
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ConfigError("experiment.deltas", "must be strictly decreasing")
    A = _constant_matrix(cfg)
    base = cfg.problem()
    R = cfg.get("experiment.stability_radius")
    u = _solve(base, cfg)
    g = u.grid
    top = cfg.get("grid.center")[1] + 0.5 * cfg.get("grid.extent")
    datum = boundary_function(cfg.boundary_descriptor())
    c = float(datum(np.array(0.0), np.array(top)))
    scalar = np.allclose(A, A[0, 0] * np.eye(2)) and np.allclose(_unit_normal(cfg), (0.0, 1.0))
    rows = []
    for d in deltas:
        coeffs = {"kind": "constant", "matrix": ((1.0 + d) * A).tolist()}
        try:
            w = _solve(base.with_(coefficients=coeffs), cfg)
        except (SolverError, EllipticityError) as exc:
            rows.append([d, math.nan, math.nan, math.nan, math.nan, math.nan])
            rep.summary.setdefault("failures", {})[d] = str(exc)
            continue
        area = symmetric_difference_measure(u.contact, w.contact, (0.0, 0.0), R)
        dist = float(np.abs(u.w.values - w.w.values).max())
        pred = math.nan
        if scalar:
            a0 = A[0, 0]
            b0 = predicted_offset(a0, c, top)
            b1 = predicted_offset(a0 * (1 + d), c, top)
            pred = _cap_area(b1, R) - _cap_area(b0, R)
        rows.append([d, area, dist, pred, area / pred if pred > 0 else math.nan,
                     (w.contact ^ u.contact).area()])
    rep.tables["stability"] = (["delta", "sym_diff_area", "max_distance", "predicted_area",
                                "area_ratio", "sym_diff_area_full"], rows)
    areas = [r[1] for r in rows]
    dists = [r[2] for r in rows]
    slack = cfg.get("analysis.slack")
    rep.checks["all_solved"] = "failures" not in rep.summary
    rep.checks["area_strictly_decreasing"] = all(b < a for a, b in zip(areas, areas[1:]))
    rep.checks["distance_strictly_decreasing"] = all(b < a for a, b in zip(dists, dists[1:]))
    rep.checks["area_non_increasing_with_slack"] = all(b <= a * (1 + slack) for a, b in zip(areas, areas[1:]))
    if scalar:
        tol = cfg.get("experiment.agreement")
        rep.checks["agrees_with_1d_offset"] = all(
            abs(r[4] - 1.0) <= tol for r in rows if r[0] > 0)
    rep.summary["top_value"] = c
    rep.solutions["reference"] = u
    return rep


# -- persistence of regular free boundaries ----------------------------------

def _density_radii(cfg: ExperimentConfig, h: float) -> list[float]:
    radii = list(cfg.get("analysis.radii")) or dyadic_radii(cfg.get("analysis.r0"), 16 * h)
    if not radii:
        raise ConfigError("analysis.r0", f"no dyadic radius between r0 and 16h = {16 * h}")
    return radii


def _classify_points(sol, points, radii, cfg):
    verdicts = []
    for p in points:
        prof = density_profile(sol, p, radii)
        verdicts.append((p, prof, classify(prof, cfg.get("analysis.eps"), cfg.get("analysis.r0"),
                                           cfg.get("analysis.tau"))))
    return verdicts


def run_persistence(cfg: ExperimentConfig) -> Report:
    rep = _report("persistence", cfg)
    A = _constant_matrix(cfg) if cfg.get("coefficients.kind") in ("scalar", "constant") else \
        np.array([[cfg["coefficients"]["matrix"][0], cfg["coefficients"]["matrix"][1]],
                  [cfg["coefficients"]["matrix"][1], cfg["coefficients"]["matrix"][2]]])
    base = cfg.problem()
    rows, threshold, broken = [], None, False
    for d in cfg.get("experiment.deltas"):
        coeffs = {"kind": "radial_perturbation", "matrix": A.tolist(), "delta": float(d),
                  "s": cfg.get("coefficients.phase_speed"), "omega": cfg.get("coefficients.omega") or None}
        try:
            sol = _solve(base.with_(coefficients=coeffs), cfg)
        except EllipticityError as exc:
            rows.append([d, "rejected", 0, 0, 0, 0])
            rep.summary.setdefault("rejected", {})[d] = str(exc)
            broken = True
            continue
        radii = _density_radii(cfg, sol.grid.h)
        pts = fb_probe_points(sol, (0.0, 0.0), cfg.get("analysis.probe_radius"))
        verdicts = _classify_points(sol, pts, radii, cfg)
        counts = {k: sum(v.verdict == k for _, _, v in verdicts) for k in (REGULAR, "Singular", "Undetermined")}
        all_regular = len(verdicts) > 0 and counts[REGULAR] == len(verdicts)
        status = "regular" if all_regular else ("mixed" if verdicts else "no-probes")
        rows.append([d, status, len(verdicts), counts[REGULAR],
                     counts["Singular"], counts["Undetermined"]])
        if all_regular and not broken:
            threshold = d if threshold is None else max(threshold, d)
        else:
            broken = True
    rep.tables["persistence"] = (["delta", "status", "probes", "regular", "singular", "undetermined"], rows)
    rep.summary["threshold"] = threshold
    solved = [r for r in rows if r[1] != "rejected"]
    rep.checks["smallest_perturbation_all_regular"] = bool(solved) and \
        min(solved, key=lambda r: abs(r[0]))[1] == "regular"
    return rep


# -- density alternative -------------------------------------------------------

def interior_probes(sol, phase: str, r: float, count: int) -> list[tuple]:
    """Cell centers whose ball of radius r lies inside the grid and inside one phase."""
    g = sol.grid
    inside_phase = sol.active.mask if phase == "omega" else sol.contact.mask
    dist = ndimage.distance_transform_edt(inside_phase) * g.h
    x1, x2 = g.coords()
    lo1, hi1, lo2, hi2 = g.hull()
    fits = (x1 - r > lo1) & (x1 + r < hi1) & (x2 - r > lo2) & (x2 + r < hi2)
    cand = np.argwhere(inside_phase & (dist > r + 2 * g.h) & fits)
    if len(cand) == 0:
        return []
    pick = np.unique(np.linspace(0, len(cand) - 1, min(count, len(cand))).round().astype(int))
    return [g.cell_center(tuple(cand[j])) for j in pick]


def stabilizes_between(values, lo: float, hi: float, last: int = 3) -> bool:
    tail = list(values)[-last:]
    return len(tail) == last and all(lo <= v <= hi for v in tail)


def run_alternative(cfg: ExperimentConfig, sol=None) -> Report:
    rep = _report("alternative", cfg)
    if sol is None:
        sol = _solve(cfg.problem(), cfg)
    g = sol.grid
    eps = cfg.get("analysis.eps")
    radii = _density_radii(cfg, g.h)
    r_big = max(radii)
    probes = {
        "fb": fb_probe_points(sol, (0.0, 0.0), cfg.get("analysis.probe_radius")),
        "omega": interior_probes(sol, "omega", r_big, cfg.get("analysis.n_probes")),
        "lambda": interior_probes(sol, "lambda", r_big, cfg.get("analysis.n_probes")),
    }
    # keep only balls that fit in the grid
    lo1, hi1, lo2, hi2 = g.hull()
    probes["fb"] = [p for p in probes["fb"]
                    if lo1 < p[0] - r_big and p[0] + r_big < hi1 and lo2 < p[1] - r_big and p[1] + r_big < hi2]
    rows, hist = [], {}
    stable_mid = False
    fb_dev, omega_max, lambda_min = 0.0, 0.0, 1.0
    for kind, pts in probes.items():
        for p, prof, verdict in _classify_points(sol, pts, radii, cfg):
            for r, gv in zip(prof.radii, prof.g_values):
                rows.append([kind, p[0], p[1], r, gv, verdict.verdict])
            hist[verdict.verdict] = hist.get(verdict.verdict, 0) + 1
            stable_mid |= stabilizes_between(prof.g_values, 2 * eps, 0.5 - 2 * eps)
            if kind == "fb":
                fb_dev = max(fb_dev, max(abs(v - 0.5) for v in prof.g_values))
            elif kind == "omega":
                omega_max = max(omega_max, max(prof.g_values))
            else:
                lambda_min = min(lambda_min, min(prof.g_values))
    rep.tables["densities"] = (["probe", "x1", "x2", "r", "density", "verdict"], rows)
    rep.summary["histogram"] = hist
    rep.summary["probe_counts"] = {k: len(v) for k, v in probes.items()}
    rep.summary["fb_max_deviation"] = fb_dev
    if not sol.contact.mask.any() or not probes["fb"]:
        rep.summary["note"] = "no free boundary"
    else:
        rep.checks["fb_probes_near_half"] = fb_dev <= eps
    if probes["omega"]:
        rep.checks["omega_probes_zero"] = omega_max == 0.0
    if probes["lambda"]:
        rep.checks["lambda_probes_one"] = lambda_min == 1.0
    rep.checks["no_intermediate_density"] = not stable_mid
    rep.solutions["solution"] = sol
    return rep


# -- blowups and the counterexample ------------------------------------------

def candidate_radii(cfg: ExperimentConfig, h: float) -> np.ndarray:
    radii = list(cfg.get("analysis.radii"))
    if radii:
        return np.array(sorted(radii, reverse=True))
    return np.geomspace(cfg.get("experiment.r_max"), 16 * h, cfg.get("experiment.n_radii"))


def averaged_scalar(coeffs, radii) -> np.ndarray:
    return np.array([0.5 * np.trace(averaged_matrix(coeffs, (0.0, 0.0), r)) for r in radii])


def select_phases(radii, scalars, rule: str = "extrema", lo: float = 2.0, hi: float = 3.0,
                  tol: float = 0.1):
    """Split radii into (even, odd): averaged scalar near ``hi`` versus near ``lo``.

    ``window`` keeps radii whose average is within ``tol`` of hi / lo; ``extrema``
    keeps interior local maxima / minima of the averaged scalar along the sweep.
    """
    radii, a = np.asarray(radii), np.asarray(scalars)
    if rule == "window":
        return list(radii[np.abs(a - hi) <= tol]), list(radii[np.abs(a - lo) <= tol])
    even, odd = [], []
    for j in range(1, len(a) - 1):
        if a[j] > a[j - 1] and a[j] >= a[j + 1]:
            even.append(radii[j])
        elif a[j] < a[j - 1] and a[j] <= a[j + 1]:
            odd.append(radii[j])
    return even, odd


def _pin(problem, cfg: ExperimentConfig):
    return pin_free_boundary(problem, cfg.get("experiment.beta_bracket"), cfg.get("solver.tol"))


def _blowup_rows(sol, coeffs, radii, refs, cfg, label):
    window = cfg.get("analysis.window")
    out_grid = build_grid(2.0 * window * 1.25, 80)
    recs = blowup_sequence(sol, coeffs, radii, refs, out_grid, window=window)
    names = [r.name for r in refs]
    rows = [[label] + rec.row(names) + [rec.min_value] for rec in recs]
    return recs, rows


def _split(recs_even, recs_odd, lo_name, hi_name, margin) -> dict:
    even = all(r.distances[hi_name][0] * margin <= r.distances[lo_name][0] for r in recs_even)
    odd = all(r.distances[lo_name][0] * margin <= r.distances[hi_name][0] for r in recs_odd)
    return {"even_matched": bool(recs_even) and even, "odd_matched": bool(recs_odd) and odd}


def run_counterexample(cfg: ExperimentConfig) -> Report:
    """Blowups at the two phase subsequences, plus a constant-coefficient control."""
    rep = _report("counterexample", cfg)
    problem = cfg.problem().with_(origin_cell=True)
    d = problem.coefficients
    if d.get("kind") != "radial":
        raise ConfigError("coefficients.kind", "the counterexample needs radial coefficients")
    lo, hi = profile_from_descriptor(d).bounds()
    refs = [Reference.for_matrix("low", lo * np.eye(2)), Reference.for_matrix("high", hi * np.eye(2))]
    margin = cfg.get("experiment.margin")

    beta, sol, hist = _pin(problem, cfg)
    rep.tables["pinning"] = (["beta", "origin_state", "policies"], [list(h) for h in hist])
    coeffs = problem.coefficient_field(sol.grid)
    radii = candidate_radii(cfg, sol.grid.h)
    scal = averaged_scalar(coeffs, radii)
    rep.tables["averages"] = (["r", "averaged_scalar"], [[r, a] for r, a in zip(radii, scal)])
    even, odd = select_phases(radii, scal, cfg.get("experiment.selection"), lo, hi,
                              cfg.get("experiment.window_tol"))
    rec_e, rows_e = _blowup_rows(sol, coeffs, even, refs, cfg, "even")
    rec_o, rows_o = _blowup_rows(sol, coeffs, odd, refs, cfg, "odd")
    header = ["phase", "r", "A11", "A12", "A22", "d_low", "beta_low", "d_high", "beta_high", "min_value"]
    rep.tables["blowups"] = (header, rows_e + rows_o)
    split = _split(rec_e, rec_o, "low", "high", margin)
    rep.checks["subsequences_found"] = bool(even) and bool(odd)
    rep.checks.update(split)

    # constant-coefficient control at the same radii
    ctrl = problem.with_(coefficients={"kind": "scalar", "value": cfg.get("experiment.control_value")})
    cbeta, csol, _ = _pin(ctrl, cfg)
    ccoeffs = ctrl.coefficient_field(csol.grid)
    crec_e, crows_e = _blowup_rows(csol, ccoeffs, even, refs, cfg, "even")
    crec_o, crows_o = _blowup_rows(csol, ccoeffs, odd, refs, cfg, "odd")
    rep.tables["control"] = (header, crows_e + crows_o)
    csplit = _split(crec_e, crec_o, "low", "high", margin)
    rep.checks["control_shows_no_split"] = not (csplit["even_matched"] and csplit["odd_matched"])
    rep.summary.update({"beta": beta, "control_beta": cbeta, "even_radii": list(even),
                        "odd_radii": list(odd), "averaged_range": [float(scal.min()), float(scal.max())],
                        "control_split": csplit})
    rep.solutions["pinned"] = sol
    return rep


def run_blowup(cfg: ExperimentConfig) -> Report:
    """Blowup records along the candidate radii, optionally after pinning."""
    rep = _report("blowup", cfg)
    problem = cfg.problem()
    if cfg.get("experiment.pin"):
        problem = problem.with_(origin_cell=True)
        beta, sol, hist = _pin(problem, cfg)
        rep.tables["pinning"] = (["beta", "origin_state", "policies"], [list(h) for h in hist])
        rep.summary["beta"] = beta
    else:
        sol = _solve(problem, cfg)
    coeffs = problem.coefficient_field(sol.grid)
    lam, Lam = coeffs.lam, coeffs.Lam
    refs = [Reference.for_matrix("low", lam * np.eye(2)), Reference.for_matrix("high", Lam * np.eye(2))]
    radii = candidate_radii(cfg, sol.grid.h)
    recs, rows = _blowup_rows(sol, coeffs, radii, refs, cfg, "all")
    rep.tables["blowups"] = (["phase", "r", "A11", "A12", "A22", "d_low", "beta_low", "d_high",
                              "beta_high", "min_value"], rows)
    tol = cfg.get("solver.tol")
    rep.checks["rescalings_nonnegative"] = all(r.min_value >= -tol for r in recs)
    rep.checks["averages_within_bounds"] = all(
        lam - 1e-12 <= np.linalg.eigvalsh(r.averaged)[0] and np.linalg.eigvalsh(r.averaged)[1] <= Lam + 1e-12
        for r in recs)
    rep.solutions["solution"] = sol
    return rep


# -- VMO tools ------------------------------------------------------------------

def run_vmo(cfg: ExperimentConfig) -> Report:
    """Grid VMO modulus of the radial profile next to the 1-D radial criterion."""
    rep = _report("vmo", cfg)
    d = cfg.coefficient_descriptor()
    if d["kind"] != "radial":
        raise ConfigError("coefficients.kind", "vmo analysis needs a radial profile")
    prof = profile_from_descriptor(d)
    problem = cfg.problem()
    grid = problem.grid()
    coeffs = problem.coefficient_field(grid)
    field = ScalarField(grid, np.asarray(coeffs.a11))
    radii = list(cfg.get("analysis.radii")) or dyadic_radii(cfg.get("analysis.r0"), 4 * grid.h)
    curve = vmo_modulus(field, radii, jump_radii=prof.jumps(grid.extent, grid.h))
    R = prof.describe().get("omega", cfg.get("analysis.r0"))
    fine = list(np.geomspace(R, 1e-250, 200))
    bram = bramanti_check(prof, R, fine)
    two_decades = list(np.geomspace(R, R * 1e-2, 25))
    psi = psi_curve(prof, two_decades)
    rep.tables["eta"] = (["r", "eta"], curve.rows())
    rep.tables["psi"] = (["r", "psi"], psi.rows())
    rep.tables["bramanti"] = (["condition", "r", "value"], bram.rows())
    eta_verdict = curve_verdict(curve, 0.2)
    psi_verdict = curve_verdict(psi, 0.2 ** 2)
    rep.summary.update({"eta_verdict": eta_verdict, "psi_verdict": psi_verdict,
                        "bramanti": bram.summary(), "psi_slope": decay_slope(psi.radii, psi.values)})
    rep.checks["grid_and_radial_verdicts_agree"] = \
        (eta_verdict == "bounded-below") == (psi_verdict == "bounded-below")
    return rep


RUNNERS = {
    "exact": run_exact,
    "stability": run_stability,
    "persistence": run_persistence,
    "alternative": run_alternative,
    "counterexample": run_counterexample,
    "penalized-path": run_penalized_path,
}


def run_experiment(cfg: ExperimentConfig) -> Report:
    name = cfg.get("experiment.name")
    if name not in RUNNERS:
        raise ConfigError("experiment.name", f"missing or unknown experiment {name!r}")
    log.info("running %s", name)
    return RUNNERS[name](cfg)
