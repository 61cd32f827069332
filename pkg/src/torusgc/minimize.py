"""Constrained Dirichlet-energy minimization and multiplier extraction.

The minimizer runs a projected Sobolev gradient descent over the set of
mean-zero fields w with integral f_lambda e^{2w} = 0. The energy gradient
-2 Delta w is preconditioned by (-Delta)^{-1} on its mean-zero part, the
step is projected onto the constraint tangent space, and iterates are
retracted back by a scalar root solve along f_lambda. Near the round-off
floor of the energy the line search switches from an Armijo test to a
gradient-norm decrease test: close to the minimum the per-step energy
decrease (of order gnorm^2) drops below what double precision can resolve
in E, long before the gradient itself stops contracting.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from . import spectral as sp
from .errors import (DivisionDegenerate, MultiplierNonpositive,
                     RootNotBracketed)
from .problem import Problem

GRAD_TOL = 1e-8
C_TOL = 1e-10
RES_TOL = 1e-5


@dataclass
class SolverConfig:
    max_iters: int = 2000
    step0: float = 1.0
    c_tol: float = C_TOL
    grad_tol: float = GRAD_TOL
    armijo: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 60
    step_growth: float = 4.0
    warm_start: Optional[sp.Field] = None
    # plain L2 gradient, for cross-checking the preconditioned path
    l2_gradient: bool = False
    # zero-padding factor for the multiplier quadratures
    dealias_pad: int = 2
    subtract_mean: bool = True

    def __post_init__(self):
        if min(self.c_tol, self.grad_tol, self.step0, self.armijo) <= 0:
            raise ValueError("tolerances and steps must be positive")


@dataclass
class MinimizeResult:
    w: sp.Field
    mu: float
    mu_b: float
    multiplier_gap: float
    beta: float
    u: sp.Field
    pde_residual: float
    constraint_residual: float
    iters: int
    converged: bool
    blown_up: bool
    gnorm: float


def _check_admissible(p: Problem, lam: float):
    fv = p.f0.values + lam
    if float(fv.mean()) >= 0.0:
        raise ValueError(f"integral of f_lambda must be negative at lambda={lam}")
    if fv.max() <= 0.0 or fv.min() >= 0.0:
        raise ValueError(f"f_lambda must change sign at lambda={lam}")


def project_constraint(p: Problem, lam: float, u: sp.Field,
                       c_tol: float = C_TOL, subtract_mean: bool = True,
                       t_max: float = 1e4) -> sp.Field:
    """Retract u onto the constraint set along f_lambda.

    Solves g(t) = integral f_lambda e^{2(u + t f_lambda)} = 0; g is
    strictly increasing (g' = 2 integral f_lambda^2 e^{...} > 0), so the
    root is unique. The result is mean-subtracted, which leaves the
    constraint zero untouched (the zero set is shift invariant).
    """
    _check_admissible(p, lam)
    fv = p.f0.values + lam
    uv = u.values

    def g(t):
        ef, _ = sp.exp2_values(uv + t * fv)
        return float(np.mean(fv * ef))

    scale = max(float(np.max(np.abs(fv))), 1e-12)
    lo, hi = -0.5 / scale, 0.5 / scale
    glo, ghi = g(lo), g(hi)
    while glo > 0.0:
        lo *= 2.0
        if abs(lo) > t_max:
            raise RootNotBracketed(f"no lower bracket within |t| <= {t_max}")
        glo = g(lo)
    while ghi < 0.0:
        hi *= 2.0
        if abs(hi) > t_max:
            raise RootNotBracketed(f"no upper bracket within |t| <= {t_max}")
        ghi = g(hi)
    t = brentq(g, lo, hi, xtol=1e-15, rtol=8.9e-16, maxiter=200)
    # one Newton polish in case brentq stopped on the interval tolerance
    ef, _ = sp.exp2_values(uv + t * fv)
    val = float(np.mean(fv * ef))
    slope = 2.0 * float(np.mean(fv * fv * ef))
    if slope > 0.0 and abs(val) > 0.0:
        t_ref = t - val / slope
        ef2, _ = sp.exp2_values(uv + t_ref * fv)
        if abs(float(np.mean(fv * ef2))) < abs(val):
            t = t_ref
    out = uv + t * fv
    if subtract_mean:
        out = out - out.mean()
    return sp.Field(u.grid, out)


def _descent_direction(p, lam, w, l2_gradient):
    """Tangent descent direction and its gradient norm.

    Preconditioned path: the H1 representer of dE at w is w itself (up to
    a constant), and of the constraint is q = (-Delta)^{-1} of the
    mean-zero part of f e^{2w}; the tangency multiplier is the gradient
    pairing ratio. At a stationary point w = mu q, so the multiplier
    estimate converges to the Lagrange multiplier of the discrete system.
    """
    fv = p.f0.values + lam
    ef, capped = sp.exp2_values(w.values)
    Sv = fv * ef
    S0 = sp.Field(w.grid, Sv - Sv.mean())
    if l2_gradient:
        lap_w = sp.laplacian(w).values
        num = float(np.mean(-lap_w * S0.values))
        den = float(np.mean(S0.values * S0.values))
        mu_hat = num / den if den > 0 else 0.0
        dv = lap_w + mu_hat * S0.values
        dv = dv - dv.mean()
        d = sp.Field(w.grid, dv)
        gnorm = float(np.sqrt(max(np.mean(dv * dv), 0.0)))
        return d, gnorm, mu_hat, capped
    q = sp.solve_poisson(S0)
    qq = sp.inner_grad(q, q)
    mu_hat = sp.inner_grad(w, q) / qq if qq > 0 else 0.0
    d = sp.Field(w.grid, -(w.values - mu_hat * q.values))
    gnorm = float(np.sqrt(max(sp.inner_grad(d, d), 0.0)))
    return d, gnorm, mu_hat, capped


def minimize(p: Problem, lam: float, cfg: SolverConfig = None) -> MinimizeResult:
    """Minimize the Dirichlet energy over the constraint set at lambda."""
    cfg = cfg or SolverConfig()
    grid = p.grid
    if cfg.warm_start is not None:
        w0 = cfg.warm_start
        if w0.grid.n != grid.n:
            w0 = sp.Field(grid, sp.pad_to(w0, grid.n))
    else:
        w0 = sp.constant(grid, 0.0)

    w = project_constraint(p, lam, w0, cfg.c_tol, cfg.subtract_mean)
    E = sp.dirichlet_energy(w)
    t_prev = cfg.step0
    blown_up = False
    gnorm = np.inf
    converged = False
    floor_strikes = 0
    it = 0
    for it in range(1, cfg.max_iters + 1):
        d, gnorm, mu_hat, capped = _descent_direction(p, lam, w, cfg.l2_gradient)
        blown_up = blown_up or capped
        if gnorm <= cfg.grad_tol:
            converged = True
            break
        t = min(cfg.step0, cfg.step_growth * t_prev)
        accepted = False
        # Armijo phase, valid while the predicted decrease is measurable in E
        floor = 64.0 * np.finfo(float).eps * max(E, 1.0)
        while True:
            trial = sp.Field(grid, w.values + t * d.values)
            w_new = project_constraint(p, lam, trial, cfg.c_tol, cfg.subtract_mean)
            E_new = sp.dirichlet_energy(w_new)
            if E_new <= E - cfg.armijo * t * gnorm * gnorm:
                accepted = True
                break
            if cfg.armijo * t * gnorm * gnorm < floor:
                break
            t *= cfg.backtrack
        if not accepted:
            # switch to gradient-norm decrease; energy differences are
            # below round-off here but the iteration still contracts
            t = min(cfg.step0, cfg.step_growth * t_prev)
            for _ in range(cfg.max_backtracks):
                trial = sp.Field(grid, w.values + t * d.values)
                w_new = project_constraint(p, lam, trial, cfg.c_tol, cfg.subtract_mean)
                d2, gn2, _, _ = _descent_direction(p, lam, w_new, cfg.l2_gradient)
                if gn2 < gnorm * (1.0 - 1e-3 * t):
                    accepted = True
                    break
                t *= cfg.backtrack
            if accepted:
                floor_strikes = 0
            else:
                floor_strikes += 1
                if floor_strikes > 3:
                    break  # converged to the round-off floor of this grid
        if accepted:
            w = w_new
            E = sp.dirichlet_energy(w)
            t_prev = t

    constraint_residual = abs(float(np.mean((p.f0.values + lam)
                                            * sp.exp2_values(w.values)[0])))
    mu_a, mu_b = extract_multiplier(p, lam, w, pad=cfg.dealias_pad)
    u = sp.Field(grid, w.values + 0.5 * np.log(mu_a))
    res = pde_residual(p, lam, u)
    beta = sp.dirichlet_energy(w)
    if not converged:
        # the floor exit still counts as converged when the gradient is
        # tiny relative to the attainable scale
        converged = gnorm <= max(cfg.grad_tol, 1e2 * cfg.grad_tol * max(1.0, np.sqrt(beta)))
    return MinimizeResult(
        w=w, mu=mu_a, mu_b=mu_b,
        multiplier_gap=abs(mu_a - mu_b) / abs(mu_a),
        beta=beta, u=u, pde_residual=res,
        constraint_residual=constraint_residual,
        iters=it, converged=converged, blown_up=blown_up, gnorm=gnorm,
    )


def extract_multiplier(p: Problem, lam: float, w: sp.Field, pad: int = 2):
    """Two independent Lagrange multiplier values (mu_a, mu_b).

    mu_a = -2 integral |grad w|^2 e^{-2w} / integral f_lambda;
    mu_b = integral (grad w, grad f_lambda) / integral f_lambda^2 e^{2w}.

    Quadratures are evaluated on a zero-padded grid (factor `pad`): the
    integrands mix sharply peaked exponentials with band-limited factors,
    and the padded trapezoid rule integrates the trigonometric
    interpolant of the products with far less aliasing. Both formulas
    then agree to the interpolant's own accuracy.
    """
    n = w.grid.n
    std = float(w.values.std())
    if std < 1e-14:
        raise MultiplierNonpositive("w is constant; no multiplier is defined")
    m = max(pad, 1) * n
    wx, wy = sp.gradient(w)
    if m == n:
        wP, wxP, wyP = w.values, wx.values, wy.values
        fP = p.f0.values + lam
    else:
        wP = sp.pad_to(w, m)
        wxP = sp.pad_to(wx, m)
        wyP = sp.pad_to(wy, m)
        fP = sp.pad_to(p.f0, m) + lam
    f_bar = p.f0_bar + lam
    if f_bar >= 0.0:
        raise DivisionDegenerate("integral of f_lambda is not negative")
    gw2 = wxP * wxP + wyP * wyP
    e_neg = np.exp(np.clip(-2.0 * wP, -sp.EXP_CAP, sp.EXP_CAP))
    mu_a = -2.0 * float(np.mean(gw2 * e_neg)) / f_bar
    num_b = sp.inner_grad(w, sp.Field(w.grid, p.f0.values + lam))
    e_pos = np.exp(np.clip(2.0 * wP, -sp.EXP_CAP, sp.EXP_CAP))
    den_b = float(np.mean(fP * fP * e_pos))
    if den_b < 1e-14:
        raise DivisionDegenerate(f"integral f^2 e^(2w) = {den_b:.3e}")
    mu_b = num_b / den_b
    if mu_a <= 0.0:
        raise MultiplierNonpositive(f"mu_a = {mu_a:.3e}")
    return mu_a, mu_b


def pde_residual(p: Problem, lam: float, u: sp.Field) -> float:
    """Sup-norm of Delta u + f_lambda e^{2u} on the grid."""
    lap_u = sp.laplacian(u).values
    ef, _ = sp.exp2_values(u.values)
    return float(np.max(np.abs(lap_u + (p.f0.values + lam) * ef)))
