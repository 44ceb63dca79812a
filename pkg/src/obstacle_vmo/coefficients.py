"""Coefficient fields a^{ij}(x): constant, radial, mollified, ball-averaged."""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import ndimage

from .grid import Grid, GridError, ball_cells, read_fields, write_fields

BOUND_SLACK = 1e-12


class EllipticityError(ValueError):
    """A coefficient matrix is not symmetric positive definite, or leaves its bounds."""


def eigenvalues_2x2(a11, a12, a22):
    """Eigenvalues (lo, hi) of symmetric 2x2 matrices, elementwise."""
    mean = 0.5 * (np.asarray(a11) + np.asarray(a22))
    rad = np.hypot(0.5 * (np.asarray(a11) - np.asarray(a22)), np.asarray(a12))
    return mean - rad, mean + rad


@dataclass(frozen=True, eq=False)
class CoefficientField:
    grid: Grid
    a11: np.ndarray
    a12: np.ndarray
    a22: np.ndarray
    lam: float
    Lam: float
    descriptor: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        for name in ("a11", "a12", "a22"):
            v = np.array(np.broadcast_to(getattr(self, name), self.grid.shape), dtype=float)
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    def validate(self) -> "CoefficientField":
        lo, hi = eigenvalues_2x2(self.a11, self.a12, self.a22)
        if not self.lam > 0:
            raise EllipticityError(f"lower ellipticity bound must be positive, got {self.lam}")
        if lo.min() < self.lam - BOUND_SLACK or hi.max() > self.Lam + BOUND_SLACK:
            raise EllipticityError(
                f"eigenvalues [{lo.min():.6g}, {hi.max():.6g}] leave declared "
                f"bounds [{self.lam:.6g}, {self.Lam:.6g}]")
        return self

    def max_abs_entry(self) -> float:
        return float(max(np.abs(self.a11).max(), np.abs(self.a12).max(), np.abs(self.a22).max()))

    def matrix_at(self, idx) -> np.ndarray:
        i, k = idx
        return np.array([[self.a11[i, k], self.a12[i, k]], [self.a12[i, k], self.a22[i, k]]])

    def save(self, path) -> None:
        write_fields(path, self.grid, [self.a11, self.a12, self.a22])

    @classmethod
    def load(cls, path) -> "CoefficientField":
        grid, chans = read_fields(path)
        if len(chans) != 3:
            raise GridError(f"{path}: coefficient files carry 3 channels, found {len(chans)}")
        lo, hi = eigenvalues_2x2(*chans)
        return cls(grid, *chans, float(lo.min()), float(hi.max()),
                   {"kind": "file", "path": str(path)}).validate()


def _check_matrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.shape != (2, 2):
        raise EllipticityError(f"coefficient matrix must be 2x2, got shape {A.shape}")
    if abs(A[0, 1] - A[1, 0]) > 1e-14 * max(1.0, np.abs(A).max()):
        raise EllipticityError("coefficient matrix is not symmetric")
    lo, _ = eigenvalues_2x2(A[0, 0], A[0, 1], A[1, 1])
    if not lo > 0:
        raise EllipticityError(f"coefficient matrix is not positive definite (min eigenvalue {lo:.6g})")
    return A


def constant_field(grid: Grid, A) -> CoefficientField:
    A = _check_matrix(A)
    lo, hi = eigenvalues_2x2(A[0, 0], A[0, 1], A[1, 1])
    return CoefficientField(grid, A[0, 0], A[0, 1], A[1, 1], float(lo), float(hi),
                            {"kind": "constant", "matrix": A.tolist()}).validate()


def field_from_arrays(grid: Grid, a11, a12, a22, descriptor=None) -> CoefficientField:
    """Variable coefficients; bounds are the observed extreme eigenvalues."""
    lo, hi = eigenvalues_2x2(np.asarray(a11, float), np.asarray(a12, float), np.asarray(a22, float))
    cf = CoefficientField(grid, a11, a12, a22, float(np.min(lo)), float(np.max(hi)),
                          descriptor or {"kind": "arrays"})
    return cf.validate()


# -- radial profiles -------------------------------------------------------

@dataclass(frozen=True)
class RadialProfile:
    """Scalar function of radius given by a closed form.

    kinds:
      ``constant``    value
      ``oscillation`` 2 for r >= omega, (5 + cos(pi*s*log|log r|))/2 below
      ``dyadic``      ``high`` on [2^-(2m+1), 2^-2m), ``low`` on the other dyadic annuli
      ``step``        ``inner`` for r < radius, ``outer`` otherwise
    """

    kind: str
    params: tuple = ()

    def _p(self) -> dict:
        return dict(self.params)

    def value(self, r):
        r = np.asarray(r, dtype=float)
        p = self._p()
        if self.kind == "constant":
            return np.full(r.shape, p["value"])
        if self.kind == "oscillation":
            out = np.full(r.shape, 2.0)
            inner = (r < p["omega"]) & (r > 0)
            ri = r[inner]
            out[inner] = 0.5 * (5.0 + np.cos(math.pi * p["s"] * np.log(np.abs(np.log(ri)))))
            return out
        if self.kind == "dyadic":
            with np.errstate(divide="ignore"):
                m = np.floor(np.log2(1.0 / np.maximum(r, 1e-300)))
            return np.where(m % 2 == 0, p["high"], p["low"])
        if self.kind == "step":
            return np.where(r < p["radius"], p["inner"], p["outer"])
        raise ValueError(f"unknown profile kind {self.kind!r}")

    def derivative(self, r):
        """f'(r); NaN at jump radii of piecewise-constant kinds."""
        r = np.asarray(r, dtype=float)
        p = self._p()
        out = np.zeros(r.shape)
        if self.kind == "oscillation":
            inner = (r < p["omega"]) & (r > 0)
            ri = r[inner]
            L = np.log(np.abs(np.log(ri)))
            # d/dr log|log r| = 1 / (r log r)
            out[inner] = -0.5 * math.pi * p["s"] * np.sin(math.pi * p["s"] * L) / (ri * np.log(ri))
        elif self.kind in ("dyadic", "step"):
            jumps = self.jumps(float(np.max(r)) if r.size else 1.0, float(np.min(r)) if r.size else 1.0)
            for j in jumps:
                out[np.isclose(r, j, rtol=1e-12, atol=0.0)] = np.nan
        return out

    def x_derivative(self, r):
        """r * f'(r), evaluated without forming f' (stable down to subnormal r)."""
        r = np.asarray(r, dtype=float)
        p = self._p()
        if self.kind != "oscillation":
            return r * self.derivative(r)
        out = np.zeros(r.shape)
        inner = (r < p["omega"]) & (r > 0)
        lr = np.log(r[inner])
        L = np.log(np.abs(lr))
        out[inner] = -0.5 * math.pi * p["s"] * np.sin(math.pi * p["s"] * L) / lr
        return out

    def jumps(self, r_max: float, r_min: float) -> list[float]:
        """Discontinuity radii in [r_min, r_max]."""
        p = self._p()
        if self.kind == "step":
            return [p["radius"]] if r_min <= p["radius"] <= r_max else []
        if self.kind == "dyadic":
            lo = max(r_min, 1e-300)
            ms = range(int(math.floor(-math.log2(r_max))), int(math.ceil(-math.log2(lo))) + 1)
            return [2.0 ** -m for m in ms if r_min <= 2.0 ** -m <= r_max]
        return []

    def is_c1(self) -> bool:
        return self.kind in ("constant", "oscillation")

    def inner_constant(self):
        p = self._p()
        if self.kind == "constant":
            return p["value"]
        if self.kind == "step":
            return p["inner"]
        return None

    def bounds(self) -> tuple[float, float]:
        p = self._p()
        if self.kind == "constant":
            return (p["value"], p["value"])
        if self.kind == "oscillation":
            return (2.0, 3.0)
        if self.kind == "dyadic":
            return (min(p["low"], p["high"]), max(p["low"], p["high"]))
        return (min(p["inner"], p["outer"]), max(p["inner"], p["outer"]))

    def describe(self) -> dict:
        return {"kind": self.kind, **self._p()}


def constant_profile(value: float) -> RadialProfile:
    return RadialProfile("constant", (("value", float(value)),))


def dyadic_profile(low: float = 2.0, high: float = 3.0) -> RadialProfile:
    return RadialProfile("dyadic", (("high", float(high)), ("low", float(low))))


def step_profile(radius: float, inner: float, outer: float) -> RadialProfile:
    return RadialProfile("step", (("inner", float(inner)), ("outer", float(outer)),
                                  ("radius", float(radius))))


def junction_radius(s: float, m: int = 0) -> float:
    """Cutoff omega at which s*log|log omega| = 2m+1, so the oscillating branch meets 2."""
    return math.exp(-math.exp((2 * m + 1) / s))


def counterexample_profile(omega: float | None = None, s: float = 1.0) -> RadialProfile:
    """Oscillating radial profile in [2, 3] with a continuous junction at ``omega``.

    ``omega=None`` picks the outermost admissible junction ``junction_radius(s, 0)``.
    With ``s = 1`` and ``omega = exp(-exp(2k+1))`` this is the k-th member of the
    classical family; larger ``s`` packs more periods into resolvable radii.
    """
    if s < 1:
        raise ValueError(f"phase speed must be >= 1, got {s}")
    if omega is None:
        omega = junction_radius(s)
    if not 0 < omega < 1 / math.e:
        raise ValueError(f"omega must lie in (0, 1/e), got {omega}")
    inner = 0.5 * (5.0 + math.cos(math.pi * s * math.log(abs(math.log(omega)))))
    if abs(inner - 2.0) > 1e-12:
        raise ValueError(f"junction at omega={omega!r} is discontinuous (inner value {inner!r})")
    return RadialProfile("oscillation", (("omega", float(omega)), ("s", float(s))))


def radial_scalar_field(grid: Grid, profile: RadialProfile, center=(0.0, 0.0)) -> CoefficientField:
    """a^{ij}(x) = f(|x - center|) delta^{ij} at cell centers."""
    lo, hi = profile.bounds()
    if not lo > 0:
        raise EllipticityError(f"profile lower bound {lo} is not positive")
    x1, x2 = grid.coords()
    r = np.hypot(x1 - center[0], x2 - center[1])
    at_center = r < 1e-9 * grid.h
    safe_r = np.where(at_center, 0.5 * grid.h, r)
    f = profile.value(safe_r)
    c0 = profile.inner_constant()
    if c0 is not None:
        f = np.where(at_center, c0, f)
    fmin, fmax = float(f.min()), float(f.max())
    if fmin < lo - BOUND_SLACK or fmax > hi + BOUND_SLACK:
        raise EllipticityError(f"profile values [{fmin}, {fmax}] leave [{lo}, {hi}]")
    return CoefficientField(grid, f, 0.0, f, lo, hi,
                            {"kind": "radial", "profile": profile.describe()}).validate()


# -- mollification and averaging -------------------------------------------

def bump_kernel(eps: float, h: float) -> np.ndarray:
    """Discrete quartic bump (1 - (|x|/eps)^2)^2 on the lattice, normalized to sum 1."""
    m = int(math.floor(eps / h))
    off = np.arange(-m, m + 1) * h
    d2 = (off[:, None] ** 2 + off[None, :] ** 2) / eps ** 2
    k = np.where(d2 < 1.0, (1.0 - d2) ** 2, 0.0)
    return k / k.sum()


def smooth_array(values: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Convolution truncated at the array edge with weight renormalization."""
    num = ndimage.correlate(values, kernel, mode="constant", cval=0.0)
    den = ndimage.correlate(np.ones_like(values), kernel, mode="constant", cval=0.0)
    return num / den


def mollify(field: CoefficientField, eps: float) -> CoefficientField:
    g = field.grid
    if eps < g.h * (1 - 1e-12):
        raise ValueError(f"mollification radius {eps} is below the grid spacing {g.h}")
    k = bump_kernel(eps, g.h)
    a11, a12, a22 = (smooth_array(np.asarray(a), k) for a in (field.a11, field.a12, field.a22))
    desc = {"kind": "mollified", "eps": eps, "base": field.descriptor}
    return CoefficientField(g, a11, a12, a22, field.lam, field.Lam, desc).validate()


def averaged_matrix(field: CoefficientField, center, r: float) -> np.ndarray:
    """Entrywise mean of a^{ij} over the cells of B_r(center)."""
    g = field.grid
    if r < 2 * g.h * (1 - 1e-12):
        raise ValueError(f"averaging radius {r} is below 2h = {2 * g.h}")
    m = ball_cells(g, center, r).mask
    if not m.any():
        raise ValueError("averaging ball contains no cells")
    a11, a12, a22 = (float(np.asarray(a)[m].mean()) for a in (field.a11, field.a12, field.a22))
    return np.array([[a11, a12], [a12, a22]])


def ellipticity_report(field: CoefficientField) -> tuple[float, float]:
    """Observed (min, max) per-cell eigenvalues; raises if any cell is not positive definite."""
    lo, hi = eigenvalues_2x2(field.a11, field.a12, field.a22)
    lam_obs, Lam_obs = float(lo.min()), float(hi.max())
    if not lam_obs > 0:
        bad = np.argwhere(lo <= 0)
        raise EllipticityError(
            f"{len(bad)} cell(s) violate positivity; worst eigenvalue {lam_obs:.6g} "
            f"at cell {tuple(int(v) for v in bad[0])}")
    return lam_obs, Lam_obs
