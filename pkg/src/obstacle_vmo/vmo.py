"""Mean oscillation: sampled BMO seminorm, VMO modulus, and the radial VMO criterion."""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import integrate

from .coefficients import RadialProfile
from .grid import ScalarField

CENTER_STRIDE = 4
JUMP_BAND_CELLS = 8
QUAD_EPSREL = 1e-8
SLOPE_TOL = 1e-9  # flatter envelopes count as no decay
CHUNK = 2_000_000  # gathered values per block


@dataclass(frozen=True)
class VmoCurve:
    radii: tuple
    values: tuple
    kind: str = "eta"     # "eta" (cumulative sup) or "psi"

    def rows(self) -> list[list]:
        return [[r, v] for r, v in zip(self.radii, self.values)]


def _disc_offsets(rho_cells: float) -> np.ndarray:
    m = int(math.ceil(rho_cells))
    d = np.arange(-m, m + 1)
    di, dk = np.meshgrid(d, d, indexing="ij")
    keep = di ** 2 + dk ** 2 < rho_cells ** 2
    return np.column_stack([di[keep], dk[keep]])


def sample_centers(grid, rho: float, jump_radii=(), jump_center=(0.0, 0.0)) -> np.ndarray:
    """Cell indices: every CENTER_STRIDE-th cell plus cells near listed jump radii,
    restricted to balls of radius ``rho`` that stay inside the grid."""
    n = grid.n_cells
    m = int(math.ceil(rho / grid.h))
    idx = np.zeros(grid.shape, dtype=bool)
    idx[::CENTER_STRIDE, ::CENTER_STRIDE] = True
    if len(jump_radii):
        x1, x2 = grid.coords()
        r = np.hypot(x1 - jump_center[0], x2 - jump_center[1])
        for j in jump_radii:
            idx |= np.abs(r - j) <= JUMP_BAND_CELLS * grid.h
    inside = np.zeros(grid.shape, dtype=bool)
    if n - 2 * m > 0:
        inside[m:n - m, m:n - m] = True
    return np.argwhere(idx & inside)


def _ball_oscillations(values: np.ndarray, centers: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Mean |f - f_B| over each ball; differences are taken from the center value first
    so a constant field gives exact zeros."""
    out = np.empty(len(centers))
    per = max(1, CHUNK // max(1, len(offsets)))
    for s in range(0, len(centers), per):
        c = centers[s:s + per]
        vals = values[c[:, 0, None] + offsets[None, :, 0], c[:, 1, None] + offsets[None, :, 1]]
        vals = vals - values[c[:, 0], c[:, 1]][:, None]
        mean = vals.mean(axis=1, keepdims=True)
        out[s:s + per] = np.abs(vals - mean).mean(axis=1)
    return out


def oscillation_at_radius(field: ScalarField, rho: float, jump_radii=(), jump_center=(0.0, 0.0)) -> float:
    g = field.grid
    centers = sample_centers(g, rho, jump_radii, jump_center)
    if len(centers) == 0:
        return 0.0
    return float(_ball_oscillations(field.values, centers, _disc_offsets(rho / g.h)).max())


def bmo_seminorm(field: ScalarField, radii, jump_radii=(), jump_center=(0.0, 0.0)) -> float:
    """Largest sampled mean oscillation; a lower bound for the seminorm."""
    g = field.grid
    for r in radii:
        if r < 4 * g.h * (1 - 1e-12):
            raise ValueError(f"radius {r} is below 4h = {4 * g.h}")
    return max((oscillation_at_radius(field, r, jump_radii, jump_center) for r in radii), default=0.0)


def vmo_modulus(field: ScalarField, radii, jump_radii=(), jump_center=(0.0, 0.0)) -> VmoCurve:
    """eta(r) = sup of sampled mean oscillation over balls of radius rho <= r (rho from ``radii``)."""
    g = field.grid
    radii = [float(r) for r in radii]
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly decreasing")
    if radii and radii[-1] < 4 * g.h * (1 - 1e-12):
        raise ValueError(f"radius {radii[-1]} is below 4h = {4 * g.h}")
    osc = [oscillation_at_radius(field, r, jump_radii, jump_center) for r in radii]
    eta = list(np.maximum.accumulate(osc[::-1])[::-1])
    return VmoCurve(tuple(radii), tuple(float(v) for v in eta), "eta")


# -- 1-D quadrature tools for radial profiles --------------------------------

def _mean_on(fn, r: float) -> float:
    """(1/r) * integral_0^r fn(x) dx, written as integral_0^inf fn(r e^-u) e^-u du."""
    val, _ = integrate.quad(lambda u: fn(r * math.exp(-u)) * math.exp(-u), 0.0, math.inf,
                            epsrel=QUAD_EPSREL, epsabs=1e-14, limit=500)
    return val


def _scalar(fn):
    return lambda x: float(fn(np.array([x]))[0])


def psi_curve(profile: RadialProfile, radii) -> VmoCurve:
    """psi(r) = (1/r) int_0^r |f - f_(0,r)|^2, the mean-square deviation of the even extension."""
    f = _scalar(profile.value)
    vals = []
    for r in radii:
        fr = f(r)
        g = lambda x, fr=fr: f(x) - fr  # shift first: a constant gives exact zeros
        m = _mean_on(g, r)
        vals.append(_mean_on(lambda x: (g(x) - m) ** 2, r))
    return VmoCurve(tuple(float(r) for r in radii), tuple(vals), "psi")


def envelope(values) -> np.ndarray:
    """Running max of |value| from the smallest radius outward (radii given decreasing)."""
    v = np.abs(np.asarray(values, dtype=float))
    return np.maximum.accumulate(v[::-1])[::-1]


def decay_slope(radii, values) -> float:
    """Least-squares slope of log(envelope) against log(1/r).

    Negative means the envelope shrinks as r -> 0; NaN when the envelope vanishes.
    """
    env = envelope(values)
    if np.all(env == 0):
        return math.nan
    keep = env > 0
    x = np.log(1.0 / np.asarray(radii, dtype=float)[keep])
    y = np.log(env[keep])
    if len(x) < 2:
        return math.nan
    return float(np.polyfit(x, y, 1)[0])


@dataclass
class ConditionResult:
    name: str
    values: list
    slope: float
    verdict: str          # "holds", "fails", "not-differentiable", "quadrature-failed"
    note: str = ""


@dataclass
class BramantiReport:
    radii: list
    conditions: list = dc_field(default_factory=list)

    def verdicts(self) -> dict:
        return {c.name: c.verdict for c in self.conditions}

    def rows(self) -> list[list]:
        out = []
        for c in self.conditions:
            for r, v in zip(self.radii, c.values):
                out.append([c.name, r, v])
        return out

    def summary(self) -> dict:
        return {c.name: {"verdict": c.verdict, "slope": c.slope, "note": c.note}
                for c in self.conditions}


def _trend_verdict(values, radii) -> tuple[float, str]:
    if all(v == 0 for v in values):
        return math.nan, "holds"
    slope = decay_slope(radii, values)
    return slope, ("holds" if slope < -SLOPE_TOL else "fails")


def bramanti_check(profile: RadialProfile, R: float, radii) -> BramantiReport:
    """Numerical evidence for the four radial-VMO hypotheses on (0, R].

    1. f in L^2(0, R); 2. x f(x)^2 -> 0; 3. x f'(x) -> 0;
    4. (1/r) int_0^r x (f(r) - f(x)) f'(x) dx -> 0.
    Conditions 2-4 are judged by the decay slope of their running envelope.
    """
    radii = [float(r) for r in radii]
    rep = BramantiReport(radii)
    f = _scalar(profile.value)
    jumps = profile.jumps(R, min(radii) if radii else R)
    smooth = profile.is_c1() and not jumps

    try:
        l2, _ = integrate.quad(lambda x: f(x) ** 2, 0.0, R, limit=500)
        rep.conditions.append(ConditionResult("L2", [l2] * len(radii), math.nan,
                                              "holds" if math.isfinite(l2) else "fails"))
    except Exception as exc:  # quadrature failure is reported, not fatal
        rep.conditions.append(ConditionResult("L2", [math.nan] * len(radii), math.nan,
                                              "quadrature-failed", str(exc)))

    xf2 = [r * f(r) ** 2 for r in radii]
    slope, verdict = _trend_verdict(xf2, radii)
    rep.conditions.append(ConditionResult("x_f_squared", xf2, slope, verdict))

    if not smooth:
        note = f"f has jumps at {len(jumps)} radii in the tested range"
        nan = [math.nan] * len(radii)
        rep.conditions.append(ConditionResult("x_fprime", nan, math.nan, "not-differentiable", note))
        rep.conditions.append(ConditionResult("integral", nan, math.nan, "not-differentiable", note))
        return rep

    xfp_fn = _scalar(profile.x_derivative)
    xfp = [xfp_fn(r) for r in radii]
    slope, verdict = _trend_verdict(xfp, radii)
    rep.conditions.append(ConditionResult("x_fprime", xfp, slope, verdict))

    try:
        c4 = []
        for r in radii:
            fr = f(r)
            c4.append(_mean_on(lambda x: (fr - f(x)) * xfp_fn(x), r))
        slope, verdict = _trend_verdict(c4, radii)
        rep.conditions.append(ConditionResult("integral", c4, slope, verdict))
    except Exception as exc:
        rep.conditions.append(ConditionResult("integral", [math.nan] * len(radii), math.nan,
                                              "quadrature-failed", str(exc)))
    return rep


def curve_verdict(curve: VmoCurve, floor: float = 0.2) -> str:
    """``vanishing`` when the curve is zero or its envelope decays; ``bounded-below``
    when every value stays >= floor; otherwise ``inconclusive``."""
    v = np.asarray(curve.values)
    if np.all(v == 0):
        return "vanishing"
    if np.all(v >= floor):
        return "bounded-below"
    if decay_slope(curve.radii, curve.values) < -SLOPE_TOL:
        return "vanishing"
    return "inconclusive"
