"""Parameter continuation across the admissible interval.

Sweeps lambda with warm starts, one diagnostics record per solve, plus
the machinery for the degenerate end: the slice construction near
lambda_max and the trend report on beta, mu, and the sup norms.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import spectral as sp
from .minimize import MinimizeResult, SolverConfig, minimize, project_constraint
from .problem import Problem, build_problem, problem_from_field

RES_TOL = 1e-5
ESCALATION_CAP = 512
BLOWUP_MARK = 1.0

CSV_COLUMNS = (
    "lambda", "beta", "mu", "vol", "lambda_times_vol", "total_curvature",
    "gb_residual", "u_max", "u_min", "w_sup", "blowup_point", "converged",
)


@dataclass
class ContinuationRecord:
    lam: float
    beta: float
    mu: float
    vol: float
    lambda_times_vol: float
    total_curvature: float
    gb_residual: float
    u_max: float
    u_min: float
    w_sup: float
    blowup_point: Optional[tuple]
    converged: bool
    # diagnostics outside the CSV schema
    n: int = 0
    pde_residual: float = float("nan")
    iters: int = 0

    def csv_row(self):
        bp = "" if self.blowup_point is None else \
            f"{self.blowup_point[0]:.8f} {self.blowup_point[1]:.8f}"
        return [
            repr(self.lam), repr(self.beta), repr(self.mu), repr(self.vol),
            repr(self.lambda_times_vol), repr(self.total_curvature),
            repr(self.gb_residual), repr(self.u_max), repr(self.u_min),
            repr(self.w_sup), bp, "1" if self.converged else "0",
        ]


@dataclass
class SweepConfig:
    solver: SolverConfig = field(default_factory=SolverConfig)
    res_tol: float = RES_TOL
    escalate: bool = True
    n_cap: int = ESCALATION_CAP
    blowup_mark: float = BLOWUP_MARK
    on_solution: Optional[Callable] = None  # called as (lam, problem, result)


@dataclass(frozen=True)
class SliceResult:
    s0: float
    v_lambda: sp.Field
    theta_norm: float
    energy_upper: float


def record_from_result(p: Problem, lam: float, res: MinimizeResult,
                       blowup_mark: float = BLOWUP_MARK) -> ContinuationRecord:
    fv = p.f0.values + lam
    ef, _ = sp.exp2_values(res.u.values)
    vol = float(np.mean(ef))
    gb = abs(float(np.mean(fv * ef)))
    total = float(np.mean(np.abs(fv) * ef))
    u_max = float(res.u.values.max())
    point = None
    if u_max >= blowup_mark:
        i, j = np.unravel_index(int(np.argmax(res.u.values)), res.u.values.shape)
        point = (i * p.grid.h, j * p.grid.h)
    return ContinuationRecord(
        lam=lam, beta=res.beta, mu=res.mu, vol=vol,
        lambda_times_vol=lam * vol, total_curvature=total, gb_residual=gb,
        u_max=u_max, u_min=float(res.u.values.min()),
        w_sup=float(np.max(np.abs(res.w.values))), blowup_point=point,
        converged=res.converged, n=p.grid.n, pde_residual=res.pde_residual,
        iters=res.iters,
    )


def _refined_problem(p: Problem, m: int) -> Problem:
    fine = sp.Grid(m)
    if p.family.variant in ("cosine", "multibump"):
        return build_problem(p.family, fine, strict=p.validated)
    f0 = sp.Field(fine, sp.pad_to(p.f0, m))
    return problem_from_field(f0, p.family.describe())


def sweep(p: Problem, lams, cfg: SweepConfig = None):
    """Minimize along the given lambda order, warm-starting each solve.

    Failures are recorded and the chain continues from the last good w.
    With escalation on, any solve whose pde_residual exceeds res_tol is
    redone on doubled grids (up to n_cap) before its record is taken;
    the warm-start chain itself stays on the base grid.
    """
    cfg = cfg or SweepConfig()
    records = []
    warm = cfg.solver.warm_start
    for lam in lams:
        solver = replace(cfg.solver, warm_start=warm)
        try:
            res = minimize(p, lam, solver)
        except Exception:
            records.append(ContinuationRecord(
                lam=lam, beta=float("nan"), mu=float("nan"), vol=float("nan"),
                lambda_times_vol=float("nan"), total_curvature=float("nan"),
                gb_residual=float("nan"), u_max=float("nan"),
                u_min=float("nan"), w_sup=float("nan"), blowup_point=None,
                converged=False, n=p.grid.n,
            ))
            continue
        warm = res.w
        p_out, out = p, res
        if cfg.escalate and res.pde_residual > cfg.res_tol:
            m = p.grid.n
            while out.pde_residual > cfg.res_tol and m < cfg.n_cap:
                m *= 2
                p_out = _refined_problem(p, m)
                fine_cfg = replace(cfg.solver, warm_start=out.w)
                out = minimize(p_out, lam, fine_cfg)
        records.append(record_from_result(p_out, lam, out, cfg.blowup_mark))
        if cfg.on_solution is not None:
            cfg.on_solution(lam, p_out, out)
    return records


def estimate_beta_prime(records):
    """Centered finite differences of beta over the converged records."""
    rows = sorted((r for r in records if r.converged and np.isfinite(r.beta)),
                  key=lambda r: r.lam)
    if len(rows) < 3:
        raise ValueError("need at least 3 converged records")
    out = []
    for a, b, c in zip(rows, rows[1:], rows[2:]):
        h1 = b.lam - a.lam
        h2 = c.lam - b.lam
        d = (h1 * h1 * c.beta - h2 * h2 * a.beta
             - (h1 * h1 - h2 * h2) * b.beta) / (h1 * h2 * (h1 + h2))
        out.append((b.lam, d))
    return out


def empirical_c0(pairs, lam_cut: float = 0.2) -> float:
    """max of lambda * |beta'| over the small-lambda estimates."""
    small = [(lam, d) for lam, d in pairs if lam <= lam_cut] or list(pairs)
    return max(lam * abs(d) for lam, d in small)


def slice_construct(p: Problem, lam: float) -> SliceResult:
    """First-order slice field near lambda_max and its actual correction.

    With u = 0 the slice coefficient is s0 = -1/(2 int (f0 - f0_bar)^2);
    the predicted displacement v0 = s0 (lambda - lambda_max)(f0 - f0_bar)
    is then retracted exactly onto the constraint set, and the distance
    between prediction and retraction is the measured Theta.
    """
    dev = p.f0.values - p.f0_bar
    s0 = -1.0 / (2.0 * float(np.mean(dev * dev)))
    if lam >= p.lambda_max:
        zero = sp.constant(p.grid, 0.0)
        return SliceResult(s0=s0, v_lambda=zero, theta_norm=0.0, energy_upper=0.0)
    v0 = sp.Field(p.grid, s0 * (lam - p.lambda_max) * dev)
    proj = project_constraint(p, lam, v0)
    diff = sp.Field(p.grid, proj.values - v0.values)
    theta = float(np.sqrt(sp.dirichlet_energy(diff)
                          + float(np.mean(diff.values ** 2))))
    return SliceResult(s0=s0, v_lambda=proj, theta_norm=theta,
                       energy_upper=sp.dirichlet_energy(proj))


def lambda_max_report(p: Problem, records) -> dict:
    """Trend verdicts for the degeneration lambda -> lambda_max.

    Expects records ordered by increasing lambda in the upper range
    (lambda/lambda_max >= 0.9); verifies beta, mu, and the sup norms all
    decay along the sequence.
    """
    # ulp slack: lambda_max carries quadrature round-off, and a record at
    # exactly 0.9 lambda_max must not fall out of its own study
    rows = [r for r in records
            if r.converged and r.lam / p.lambda_max >= 0.9 * (1.0 - 1e-12)]
    rows.sort(key=lambda r: r.lam)
    if len(rows) < 3:
        raise ValueError("need at least 3 converged records with "
                         "lambda/lambda_max >= 0.9")

    def decreasing(key):
        vals = [getattr(r, key) for r in rows]
        return all(b < a for a, b in zip(vals, vals[1:]))

    def halves(key):
        vals = [getattr(r, key) for r in rows]
        return all(b <= 0.5 * a for a, b in zip(vals, vals[1:]))

    verdicts = {
        "beta_decreasing": decreasing("beta"),
        "mu_decreasing": decreasing("mu"),
        "w_sup_decreasing": decreasing("w_sup"),
        "u_max_decreasing": decreasing("u_max"),
        "beta_halves_each_step": halves("beta"),
        "mu_halves_each_step": halves("mu"),
    }
    summary = {
        "lambda_max": p.lambda_max,
        "rows": [
            {"lambda": r.lam, "fraction": r.lam / p.lambda_max,
             "beta": r.beta, "mu": r.mu, "w_sup": r.w_sup, "u_max": r.u_max}
            for r in rows
        ],
        "verdicts": verdicts,
        "pass": all(verdicts.values()),
    }
    return summary


def parse_schedule(text: str, lambda_max: float):
    """Schedule grammar: geo:<lo>:<hi>:<ratio>, list:<v1,v2,...>,
    or frac:<f1,f2,...> (fractions of lambda_max). geo yields a
    descending chain from hi by the ratio, with lo appended exactly."""
    kind, _, rest = text.partition(":")
    if kind == "geo":
        lo_s, hi_s, ratio_s = rest.split(":")
        lo, hi, ratio = float(lo_s), float(hi_s), float(ratio_s)
        if not (0.0 < lo <= hi and 0.0 < ratio < 1.0):
            raise ValueError(f"bad geometric schedule {text!r}")
        out = []
        lam = hi
        while lam > lo * (1.0 + 1e-12):
            out.append(lam)
            lam *= ratio
        out.append(lo)
        return out
    if kind == "list":
        return [float(v) for v in rest.split(",")]
    if kind == "frac":
        return [float(v) * lambda_max for v in rest.split(",")]
    raise ValueError(f"unknown schedule kind {text!r}")
