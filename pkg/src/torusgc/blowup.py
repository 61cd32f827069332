"""Concentration analysis for the small-lambda branch.

Finds the peaks of a solution, rescales around them in one of the two
regimes set by the peak strength relative to sqrt(lambda), compares the
profile against the limit models, and integrates the local curvature
mass. The regime-1 model is the spherical bubble log(2/(1+|x|^2)); the
regime-2 model solves the radial limit equation with the quadratic
curvature coefficient taken from the Hessian of f0 at the peak.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy.integrate import solve_ivp

from . import spectral as sp
from .errors import ChartTooLarge, PeakTooWeak
from .problem import Problem, _grid_local_maxima, _quadratic_fit_hessian, _torus_dist

REGIME_RATIO = 0.2
PEAK_MIN = 0.5
R_PROFILE = 4.0
N_RAYS = 8
N_RADII = 64
CHART_LIMIT = 0.24


@dataclass(frozen=True)
class PeakInfo:
    point: tuple
    value: float
    dist_to_f0max: float


@dataclass(frozen=True)
class BubbleReport:
    lam: float
    p_n: tuple
    dist_to_f0max: float
    u_peak: float
    regime: int
    r_n: float
    profile: tuple  # ((|x|, w_n, w_model), ...)
    sup_dev: float
    local_mass: float
    rescaled_residual: float
    ratio: float  # r_1 / sqrt(lambda), the regime discriminator
    c_fit: float  # regime-2 additive constant, 0 in regime 1
    chart_radius: float  # largest |x| the chart allowed


def locate_peaks(u: sp.Field, p: Problem, prominence: float = 2.0) -> List[PeakInfo]:
    """Local maxima of u within `prominence` of the global max.

    Each peak is refined by a quadratic fit on the 3x3 stencil and
    annotated with its torus distance to the nearest maximum of f0.
    """
    n = u.grid.n
    h = u.grid.h
    raw = _grid_local_maxima(u.values, prominence)
    peaks = []
    for i, j in raw:
        H, off = _quadratic_fit_hessian(u.values, i, j, h)
        off = np.clip(off, -h, h)
        val = float(u.values[i, j] - 0.5 * off @ H @ off)
        # x % 1.0 returns 1.0 exactly for tiny negative x; force [0, 1)
        pt = tuple(0.0 if c >= 1.0 else c
                   for c in ((i * h + off[0]) % 1.0, (j * h + off[1]) % 1.0))
        peaks.append((pt, val))
    # collapse plateau duplicates, keep the higher fit
    peaks.sort(key=lambda t: -t[1])
    kept = []
    for pt, val in peaks:
        if all(_torus_dist(pt, q) > 2 * h for q, _ in kept):
            kept.append((pt, val))
    out = []
    for pt, val in kept:
        if p.maxima:
            dist = min(_torus_dist(pt, np.asarray(q)) for q, _ in p.maxima)
        else:
            dist = float("nan")
        out.append(PeakInfo(point=pt, value=val, dist_to_f0max=dist))
    return out


def _model_regime2(a_coef: float, w0: float, r_grid: np.ndarray) -> np.ndarray:
    """Radial solution of -(w'' + w'/r) = (1 + a r^2) e^{2w}, w(0) = w0."""
    r0 = 1e-8
    y0 = [w0 - math.exp(2 * w0) * r0 * r0 / 4.0, -math.exp(2 * w0) * r0 / 2.0]

    def rhs(r, y):
        return [y[1], -y[1] / r - (1.0 + a_coef * r * r) * math.exp(2.0 * y[0])]

    r_max = float(np.max(r_grid)) if r_grid.size else 1.0
    sol = solve_ivp(rhs, (r0, max(r_max, r0 * 2)), y0, rtol=1e-10, atol=1e-12,
                    dense_output=True)
    out = np.empty_like(r_grid)
    for idx, r in enumerate(r_grid):
        out[idx] = w0 if r <= r0 else float(sol.sol(r)[0])
    return out


def curvature_mass(p: Problem, u: sp.Field, lam: float, center, r: float) -> float:
    """Positive curvature mass int_{B_r(center)} (f0+lam)^+ e^{2u}."""
    xx, yy = p.grid.axes()
    dx = xx - center[0]
    dy = yy - center[1]
    dx -= np.round(dx)
    dy -= np.round(dy)
    mask = dx * dx + dy * dy <= r * r
    ef, _ = sp.exp2_values(u.values)
    integrand = np.maximum(p.f0.values + lam, 0.0) * ef
    return float(np.mean(np.where(mask, integrand, 0.0)))


def classify_and_rescale(p: Problem, u: sp.Field, lam: float, peak: PeakInfo,
                         R: float = R_PROFILE, n_rays: int = N_RAYS,
                         n_radii: int = N_RADII,
                         regime_ratio: float = REGIME_RATIO,
                         peak_min: float = PEAK_MIN) -> BubbleReport:
    """Rescaled profile and model comparison at one peak.

    The candidate radius r1 = 2 e^{-u(p)} / sqrt(f_lambda(p)) normalizes
    the peak curvature so the exact spherical solution of curvature
    f_lambda(p) rescales to the unit bubble; r1/sqrt(lambda) below
    regime_ratio selects regime 1, otherwise regime 2 at r_n =
    sqrt(lambda). Profile radii beyond the chart bound are dropped
    rather than raised on, so R is a request, not a guarantee.
    """
    center = np.asarray(peak.point, dtype=float)
    u_peak = float(sp.eval_at(u, center[None, :])[0])
    if u_peak < peak_min:
        raise PeakTooWeak(f"u(p) = {u_peak:.3f} < {peak_min:g}")
    f_center = float(sp.eval_at(p.f0, center[None, :])[0]) + lam
    if f_center <= 0.0:
        raise PeakTooWeak(f"f_lambda(p) = {f_center:.3e} is not positive")

    r1 = 2.0 * math.exp(-u_peak) / math.sqrt(f_center)
    ratio = r1 / math.sqrt(lam)
    regime = 1 if ratio < regime_ratio else 2
    r_n = r1 if regime == 1 else math.sqrt(lam)

    radii = np.linspace(0.0, R, n_radii)
    radii = radii[r_n * radii < CHART_LIMIT]
    if radii.size < 2:
        raise ChartTooLarge(f"scale r_n = {r_n:.3e} leaves no chart for R = {R}")
    chart_radius = float(radii.max())

    offs, u_vals = sp.sample_rescaled(u, center, r_n, radii, n_rays)
    _, lap_vals = sp.sample_rescaled(sp.laplacian(u), center, r_n, radii, n_rays)
    _, f0_vals = sp.sample_rescaled(p.f0, center, r_n, radii, n_rays)
    rho = np.hypot(offs[:, 0], offs[:, 1])

    if regime == 1:
        w_n = u_vals - u_peak + math.log(2.0)
        w_model = np.log(2.0 / (1.0 + rho * rho))
        ef, _ = sp.exp2_values(w_n)
        resid = np.abs(r_n * r_n * lap_vals + ((f0_vals + lam) / f_center) * ef)
        c_fit = 0.0
    else:
        w_base = u_vals + math.log(lam)
        i0 = int(round(center[0] / p.grid.h)) % p.grid.n
        j0 = int(round(center[1] / p.grid.h)) % p.grid.n
        H, _ = _quadratic_fit_hessian(p.f0.values, i0, j0, p.grid.h)
        a_coef = 0.25 * float(np.trace(H))
        order = np.argsort(rho)
        dense = _model_regime2(a_coef, u_peak + math.log(lam), rho[order])
        w_model = np.empty_like(dense)
        w_model[order] = dense
        unit = rho <= 1.0
        c_fit = float(np.mean(w_model[unit]) - np.mean(w_base[unit]))
        w_n = w_base + c_fit
        ef, _ = sp.exp2_values(w_n)
        resid = np.abs(lam * lap_vals + (1.0 + f0_vals / lam) * ef)

    profile = tuple(
        (float(r), float(w), float(m)) for r, w, m in zip(rho, w_n, w_model)
    )
    sup_dev = float(np.max(np.abs(w_n - w_model)))
    r_mass = min(10.0 * r_n, CHART_LIMIT)
    mass = curvature_mass(p, u, lam, center, r_mass)
    return BubbleReport(
        lam=lam, p_n=tuple(center), dist_to_f0max=peak.dist_to_f0max,
        u_peak=u_peak, regime=regime, r_n=r_n, profile=profile,
        sup_dev=sup_dev, local_mass=mass,
        rescaled_residual=float(np.max(resid)), ratio=ratio, c_fit=c_fit,
        chart_radius=chart_radius,
    )


@dataclass(frozen=True)
class DichotomyResult:
    case: str  # "i", "ii", or "inconclusive"
    slope: float  # of min_Omega u against log(1/lambda)
    values: tuple  # ((lambda, min over Omega), ...) in sweep order


def dichotomy_detect(p: Problem, solutions, omega_radius: float = 0.25,
                     slope_cut: float = -0.2,
                     noise: float = 1e-3) -> DichotomyResult:
    """Off-peak trend of u as lambda shrinks: divergence or stabilization.

    solutions: iterable of (lambda, u Field) with lambda decreasing.
    Omega is the set of grid points at torus distance >= omega_radius
    from every f0 maximum; the minimum of u over Omega either drifts to
    -infinity (case i) or stays bounded (case ii). A non-monotone trend
    beyond the noise floor yields "inconclusive".
    """
    pairs = [(float(lam), u) for lam, u in solutions]
    if len(pairs) < 3:
        raise ValueError("need at least 3 solutions")
    xx, yy = p.grid.axes()
    mask = np.ones_like(xx, dtype=bool)
    for q, _ in p.maxima:
        dx = xx - q[0]
        dy = yy - q[1]
        dx -= np.round(dx)
        dy -= np.round(dy)
        mask &= dx * dx + dy * dy >= omega_radius ** 2
    if not mask.any():
        raise ValueError("Omega is empty at this radius")

    vals = []
    for lam, u in pairs:
        vals.append((lam, float(np.min(u.values[mask]))))
    v = np.array([m for _, m in vals])
    t = np.log(1.0 / np.array([lam for lam, _ in vals]))
    diffs = np.diff(v)
    tol = max(noise, 0.02 * (np.max(v) - np.min(v)))
    if (diffs > tol).any() and (diffs < -tol).any():
        case = "inconclusive"
        slope = float(np.polyfit(t, v, 1)[0])
    else:
        slope = float(np.polyfit(t, v, 1)[0])
        case = "i" if slope <= slope_cut else "ii"
    return DichotomyResult(case=case, slope=slope, values=tuple(vals))
