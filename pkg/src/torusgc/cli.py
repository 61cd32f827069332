"""Command-line driver: solve, sweep, blowup, compare, lmax.

Every command writes versioned JSON (and CSV/plain-data files where the
output is tabular) plus rendered PNG figures into the output directory.
Outputs embed the config hash and are byte-identical across reruns of
the same configuration on one build: no timestamps, no environment
stamps. Exit codes: 1 for configuration errors, 2 for solver failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import fields as dc_fields

import numpy as np

from . import __version__
from . import blowup as bl
from . import comparison as cmp
from . import continuation as ct
from . import figures as fig
from . import spectral as sp
from .minimize import SolverConfig, minimize
from .config import (RunConfig, build_from_config, config_dict, config_hash,
                     load_config)
from .errors import TorusGCError

FORMAT = "v1"


def _die_config(msg: str) -> int:
    print(f"config error: {msg}", file=sys.stderr)
    return 1


def _die_solver(msg: str) -> int:
    print(f"solver failure: {msg}", file=sys.stderr)
    return 2


def _envelope(cfg: RunConfig, p) -> dict:
    return {
        "format": FORMAT,
        "artifact_version": __version__,
        "config_hash": config_hash(cfg),
        "config": config_dict(cfg),
        "problem": {
            "family": p.family.describe(),
            "n": p.grid.n,
            "f0_bar": p.f0_bar,
            "lambda_max": p.lambda_max,
            "L": p.L,
        },
    }


def _write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_dat(path, rows, header):
    with open(path, "w") as fh:
        fh.write(f"# {header}\n")
        for row in rows:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def _record_dict(r: ct.ContinuationRecord) -> dict:
    return {
        "lambda": r.lam, "beta": r.beta, "mu": r.mu, "vol": r.vol,
        "lambda_times_vol": r.lambda_times_vol,
        "total_curvature": r.total_curvature, "gb_residual": r.gb_residual,
        "u_max": r.u_max, "u_min": r.u_min, "w_sup": r.w_sup,
        "blowup_point": list(r.blowup_point) if r.blowup_point else None,
        "converged": r.converged, "n": r.n, "pde_residual": r.pde_residual,
        "iters": r.iters,
    }


def _write_csv(path, records):
    with open(path, "w") as fh:
        fh.write(",".join(ct.CSV_COLUMNS) + "\n")
        for r in records:
            fh.write(",".join(r.csv_row()) + "\n")


def _solver_config(cfg: RunConfig, warm=None) -> SolverConfig:
    return SolverConfig(max_iters=cfg.max_iters, c_tol=cfg.c_tol,
                        grad_tol=cfg.grad_tol, warm_start=warm,
                        dealias_pad=cfg.dealias_pad)


def _sweep_config(cfg: RunConfig, on_solution=None) -> ct.SweepConfig:
    return ct.SweepConfig(solver=_solver_config(cfg), res_tol=cfg.res_tol,
                          escalate=cfg.escalate, n_cap=cfg.n_cap,
                          on_solution=on_solution)


def _check_lambda(p, lam) -> str:
    if not p.in_admissible_range(lam):
        return (f"lambda = {lam:g} outside the admissible range "
                f"Lambda = (0, {p.lambda_max:g})")
    return ""


def cmd_solve(cfg: RunConfig) -> int:
    p = build_from_config(cfg)
    msg = _check_lambda(p, cfg.lam)
    if msg:
        return _die_config(msg)
    warm = sp.load_field(cfg.warm_start) if cfg.warm_start else None
    try:
        res = minimize(p, cfg.lam, _solver_config(cfg, warm))
    except TorusGCError as exc:
        return _die_solver(str(exc))
    out = _envelope(cfg, p)
    out["result"] = {
        "lambda": cfg.lam, "beta": res.beta, "mu": res.mu, "mu_b": res.mu_b,
        "multiplier_gap": res.multiplier_gap, "pde_residual": res.pde_residual,
        "constraint_residual": res.constraint_residual, "iters": res.iters,
        "converged": res.converged, "blown_up": res.blown_up,
        "gnorm": res.gnorm,
        "u_max": float(res.u.values.max()), "u_min": float(res.u.values.min()),
    }
    os.makedirs(cfg.out, exist_ok=True)
    _write_json(out, os.path.join(cfg.out, "solve.json"))
    sp.save_field(res.w, os.path.join(cfg.out, "w.field"))
    sp.save_field(res.u, os.path.join(cfg.out, "u.field"))
    fig.fig_field(res.u, os.path.join(cfg.out, "fig_u.png"),
                  title=f"u at lambda = {cfg.lam:g}")
    print(f"lambda = {cfg.lam:g}: beta = {res.beta:.6f}, mu = {res.mu:.6f}, "
          f"converged = {res.converged}")
    return 0 if res.converged else 2


def _parse_and_check_schedule(cfg, p):
    lams = ct.parse_schedule(cfg.schedule, p.lambda_max)
    for lam in lams:
        msg = _check_lambda(p, lam)
        if msg:
            raise ValueError(msg)
    return lams


def cmd_sweep(cfg: RunConfig) -> int:
    p = build_from_config(cfg)
    try:
        lams = _parse_and_check_schedule(cfg, p)
    except ValueError as exc:
        return _die_config(str(exc))
    records = ct.sweep(p, lams, _sweep_config(cfg))
    good = [r for r in records if r.converged]
    out = _envelope(cfg, p)
    out["records"] = [_record_dict(r) for r in records]
    by_lam = sorted(good, key=lambda r: r.lam)
    out["beta_strictly_decreasing"] = all(
        a.beta > b.beta for a, b in zip(by_lam, by_lam[1:]))
    if len(good) >= 3:
        pairs = ct.estimate_beta_prime(records)
        out["beta_prime"] = [[lam, d] for lam, d in pairs]
        out["empirical_c0"] = ct.empirical_c0(pairs)
    os.makedirs(cfg.out, exist_ok=True)
    _write_json(out, os.path.join(cfg.out, "sweep.json"))
    _write_csv(os.path.join(cfg.out, "sweep.csv"), records)
    _write_dat(os.path.join(cfg.out, "beta_lambda.dat"),
               [(r.lam, r.beta) for r in good], "lambda beta")
    _write_dat(os.path.join(cfg.out, "lambda_vol.dat"),
               [(r.lam, r.lambda_times_vol) for r in good],
               "lambda lambda*volume")
    if good:
        fig.fig_beta(records, os.path.join(cfg.out, "fig_beta.png"))
        fig.fig_lambda_vol(records, os.path.join(cfg.out, "fig_lambda_vol.png"))
    print(f"sweep: {len(good)}/{len(records)} converged, "
          f"beta decreasing: {out['beta_strictly_decreasing']}")
    return 0 if good else 2


def cmd_blowup(cfg: RunConfig) -> int:
    p = build_from_config(cfg)
    try:
        lams = _parse_and_check_schedule(cfg, p)
    except ValueError as exc:
        return _die_config(str(exc))
    chain = []
    records = ct.sweep(p, lams, _sweep_config(
        cfg, on_solution=lambda lam, prob, res: chain.append((lam, prob, res))))
    converged = [(lam, prob, res) for lam, prob, res in chain if res.converged]
    if not converged:
        return _die_solver("no converged solution in the sweep")
    lam, prob, res = min(converged, key=lambda t: t[0])
    peaks = bl.locate_peaks(res.u, prob)
    reports = []
    for peak in peaks:
        try:
            reports.append(bl.classify_and_rescale(
                prob, res.u, lam, peak, R=cfg.R, n_rays=cfg.n_rays,
                n_radii=cfg.n_radii, regime_ratio=cfg.regime_ratio,
                peak_min=cfg.peak_min))
        except TorusGCError as exc:
            print(f"peak at {peak.point}: {exc}", file=sys.stderr)
    out = _envelope(cfg, p)
    out["records"] = [_record_dict(r) for r in records]
    out["analysis_lambda"] = lam
    out["bubbles"] = [{
        "lambda": b.lam, "p_n": list(b.p_n),
        "dist_to_f0max": b.dist_to_f0max, "u_peak": b.u_peak,
        "regime": b.regime, "r_n": b.r_n, "sup_dev": b.sup_dev,
        "local_mass": b.local_mass, "rescaled_residual": b.rescaled_residual,
        "ratio": b.ratio, "c_fit": b.c_fit, "chart_radius": b.chart_radius,
        "profile": [list(row) for row in b.profile],
    } for b in reports]
    fields_by_lam = [(l, res.u) for l, _, res in sorted(
        converged, key=lambda t: -t[0])]
    if len(fields_by_lam) >= 3:
        dich = bl.dichotomy_detect(p, fields_by_lam)
        out["dichotomy"] = {"case": dich.case, "slope": dich.slope,
                            "values": [list(v) for v in dich.values]}
    os.makedirs(cfg.out, exist_ok=True)
    _write_json(out, os.path.join(cfg.out, "blowup.json"))
    if reports:
        b = reports[0]
        per_ray = len(b.profile) // cfg.n_rays
        for k in range(cfg.n_rays):
            rows = b.profile[k * per_ray:(k + 1) * per_ray]
            _write_dat(os.path.join(cfg.out, f"profile_ray{k}.dat"),
                       [(r, w) for r, w, _ in rows], "|x| w_n")
        model = sorted({(r, m) for r, _, m in b.profile})
        _write_dat(os.path.join(cfg.out, "profile_model.dat"), model,
                   "|x| w_model")
        fig.fig_profile(b, os.path.join(cfg.out, "fig_profile.png"))
        print(f"blowup at lambda = {lam:g}: {len(reports)} peak(s), "
              f"regime {b.regime}, sup_dev = {b.sup_dev:.4f}, "
              f"local mass / 2pi = {b.local_mass / (2 * np.pi):.3f}")
    return 0 if reports else 2


def cmd_compare(cfg: RunConfig) -> int:
    p = build_from_config(cfg)
    msg = _check_lambda(p, cfg.lam)
    if msg:
        return _die_config(msg)
    try:
        phi = cmp.build_phi(p, cfg.lam)
    except TorusGCError as exc:
        return _die_config(str(exc))
    try:
        res = minimize(p, cfg.lam, _solver_config(cfg))
    except TorusGCError as exc:
        return _die_solver(str(exc))
    if not res.converged:
        return _die_solver(f"minimize did not converge at lambda = {cfg.lam:g}")
    alpha = cmp.solve_alpha(p, cfg.lam, phi)
    eps = cmp.epsilon_star(res.u, phi)
    out = _envelope(cfg, p)
    out["phi"] = {
        "lambda": cfg.lam, "center": list(phi.center), "L": phi.L,
        "energy": phi.energy, "energy_analytic": phi.energy_analytic,
        "energy_grid": sp.dirichlet_energy(phi.field),
        "n_energy": phi.n_energy,
        "r_plateau": phi.r_plateau, "r_support": phi.r_support,
    }
    out["alpha"] = {
        "value": alpha, "bound": cfg.sigma + 2.0,
        "within_bound": alpha <= cfg.sigma + 2.0,
        "threshold_closed_form": cmp.alpha_threshold(p, cfg.sigma),
        "energy_upper": alpha * alpha * phi.energy,
        "beta": res.beta,
    }
    probe = None
    if eps > 0:
        probe = cmp.probe_h(p, cfg.lam, res.u, phi, eps, k=cfg.h_samples)
        a_lower = float(np.exp(2.0 * res.u.values.min()))
        lo, hi = cmp.eps_star_window(p.L, cfg.lam, a_lower)
        lam_mid = probe.h_samples[len(probe.h_samples) // 2][1]
        res_mid = minimize(p, lam_mid, _solver_config(cfg, res.w))
        out["monotonicity"] = {
            "eps_star": eps,
            "eps_star_window_approx": [lo, hi],
            "h0": probe.h_samples[0][1],
            "ell": probe.ell,
            "min_hprime": probe.min_hprime,
            "fd_max_rel_err": probe.fd_max_rel_err,
            "h_samples": [list(s) for s in probe.h_samples],
            "lambda_mid": lam_mid,
            "beta_mid": res_mid.beta,
            "beta_drops": res_mid.beta < res.beta,
        }
    os.makedirs(cfg.out, exist_ok=True)
    _write_json(out, os.path.join(cfg.out, "compare.json"))
    if probe is not None:
        _write_dat(os.path.join(cfg.out, "h_curve.dat"),
                   [(s[0], s[1]) for s in probe.h_samples], "eps h")
        fig.fig_h(probe, os.path.join(cfg.out, "fig_h.png"))
    print(f"compare at lambda = {cfg.lam:g}: E(phi) = {phi.energy:.4f} "
          f"(analytic {phi.energy_analytic:.4f}), alpha = {alpha:.4f}, "
          f"eps* = {eps:.4f}")
    return 0


def cmd_lmax(cfg: RunConfig) -> int:
    p = build_from_config(cfg)
    try:
        fracs = [float(v) for v in cfg.points.split(",")]
    except ValueError:
        return _die_config(f"bad points list {cfg.points!r}")
    if any(not 0.0 < f < 1.0 for f in fracs):
        return _die_config("points must be fractions of lambda_max in (0, 1)")
    lams = sorted(f * p.lambda_max for f in fracs)
    records = ct.sweep(p, lams, _sweep_config(cfg))
    slices = {}
    for lam in lams:
        sl = ct.slice_construct(p, lam)
        slices[lam] = {
            "s0": sl.s0, "theta_norm": sl.theta_norm,
            "theta_ratio": sl.theta_norm / abs(lam - p.lambda_max),
            "energy_upper": sl.energy_upper,
        }
    out = _envelope(cfg, p)
    out["records"] = [_record_dict(r) for r in records]
    out["slices"] = {repr(k): v for k, v in slices.items()}
    try:
        summary = ct.lambda_max_report(p, records)
    except ValueError as exc:
        return _die_solver(str(exc))
    out["report"] = summary
    os.makedirs(cfg.out, exist_ok=True)
    _write_json(out, os.path.join(cfg.out, "lmax.json"))
    _write_dat(os.path.join(cfg.out, "lmax_trends.dat"),
               [(p.lambda_max - r["lambda"], r["beta"], r["mu"], r["w_sup"])
                for r in summary["rows"]],
               "lambda_max-lambda beta mu w_sup")
    fig.fig_lmax(summary, os.path.join(cfg.out, "fig_lmax.png"))
    verdicts = ", ".join(f"{k}={v}" for k, v in summary["verdicts"].items())
    print(f"lmax study: pass = {summary['pass']} ({verdicts})")
    return 0 if summary["pass"] else 2


def _add_common(sub):
    sub.add_argument("--config", help="key=value config file")
    sub.add_argument("--family", help="cosine:A | multibump:cx,cy,a;... | "
                                      "tabulated:path")
    sub.add_argument("--n", help="grid points per axis (power of two)")
    sub.add_argument("--out", help="output directory")
    sub.add_argument("--grad-tol", dest="grad_tol")
    sub.add_argument("--c-tol", dest="c_tol")
    sub.add_argument("--res-tol", dest="res_tol")
    sub.add_argument("--max-iters", dest="max_iters")
    sub.add_argument("--seed")


class _Parser(argparse.ArgumentParser):
    """Usage mistakes are config errors; keep exit 2 for solver failures."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"config error: {message}\n")


def main(argv=None) -> int:
    parser = _Parser(
        prog="torusgc",
        description="Spectral solver for prescribed Gauss curvature on the "
                    "flat torus: -Delta u = (f0 + lambda) e^{2u}",
    )
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    s = subs.add_parser("solve", help="minimize at one lambda")
    _add_common(s)
    s.add_argument("--lambda", dest="lam", help="curvature offset, in (0, lambda_max)")
    s.add_argument("--warm-start", dest="warm_start", help="field snapshot")

    s = subs.add_parser("sweep", help="continuation over a lambda schedule")
    _add_common(s)
    s.add_argument("--schedule", help="geo:lo:hi:ratio | list:v1,v2 | frac:f1,f2")
    s.add_argument("--escalate", help="true/false resolution escalation")
    s.add_argument("--n-cap", dest="n_cap")

    s = subs.add_parser("blowup", help="sweep down and analyze concentration")
    _add_common(s)
    s.add_argument("--schedule")
    s.add_argument("--escalate")
    s.add_argument("--n-cap", dest="n_cap")
    s.add_argument("--R", dest="R", help="profile radius request")
    s.add_argument("--n-rays", dest="n_rays")
    s.add_argument("--n-radii", dest="n_radii")
    s.add_argument("--regime-ratio", dest="regime_ratio")
    s.add_argument("--peak-min", dest="peak_min")

    s = subs.add_parser("compare", help="comparison function and h probe")
    _add_common(s)
    s.add_argument("--lambda", dest="lam", help="curvature offset, in (0, lambda_max)")
    s.add_argument("--sigma")
    s.add_argument("--h-samples", dest="h_samples")

    s = subs.add_parser("lmax", help="degeneration study near lambda_max")
    _add_common(s)
    s.add_argument("--points", help="fractions of lambda_max, e.g. 0.9,0.99")

    args = parser.parse_args(argv)
    cfg_keys = {f.name for f in dc_fields(RunConfig)}
    overrides = {k: v for k, v in vars(args).items()
                 if k in cfg_keys and v is not None}
    try:
        cfg = load_config(args.config, overrides)
    except (ValueError, OSError) as exc:
        return _die_config(str(exc))
    handler = {
        "solve": cmd_solve, "sweep": cmd_sweep, "blowup": cmd_blowup,
        "compare": cmd_compare, "lmax": cmd_lmax,
    }[args.command]
    try:
        return handler(cfg)
    except ValueError as exc:
        return _die_config(str(exc))
    except TorusGCError as exc:
        return _die_solver(str(exc))


if __name__ == "__main__":
    sys.exit(main())
