"""File-rendered matplotlib figures for the report paths. Never interactive."""

from __future__ import annotations

import numpy as np
import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

DPI = 150


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return str(path)


def fig_field(field, path, title=""):
    fig, ax = plt.subplots(figsize=(5.2, 4.4))
    im = ax.imshow(field.values.T, origin="lower", extent=(0, 1, 0, 1),
                   cmap="viridis")
    fig.colorbar(im, ax=ax)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    if title:
        ax.set_title(title)
    return _save(fig, path)


def fig_beta(records, path):
    rows = [r for r in records if r.converged]
    lam = np.array([r.lam for r in rows])
    beta = np.array([r.beta for r in rows])
    fig, ax = plt.subplots(figsize=(5.6, 4.2))
    ax.semilogx(lam, beta, "o-", label="beta")
    guide = 18.0 * np.pi * np.log(1.0 / lam)
    small = lam <= 0.2
    if small.any():
        ax.semilogx(lam[small], guide[small], "--", color="gray",
                    label="18 pi log(1/lambda)")
    ax.set_xlabel("lambda")
    ax.set_ylabel("Dirichlet energy")
    ax.legend()
    return _save(fig, path)


def fig_lambda_vol(records, path):
    rows = [r for r in records if r.converged]
    lam = np.array([r.lam for r in rows])
    lv = np.array([r.lambda_times_vol for r in rows])
    fig, ax = plt.subplots(figsize=(5.6, 4.2))
    ax.semilogx(lam, lv, "s-")
    ax.set_xlabel("lambda")
    ax.set_ylabel("lambda * volume")
    return _save(fig, path)


def fig_profile(report, path):
    prof = np.array(report.profile)
    fig, ax = plt.subplots(figsize=(5.6, 4.2))
    ax.plot(prof[:, 0], prof[:, 1], ".", ms=3, label="rescaled solution")
    order = np.argsort(prof[:, 0])
    ax.plot(prof[order, 0], prof[order, 2], "-", color="crimson",
            label="limit model")
    ax.set_xlabel("|x|")
    ax.set_ylabel("w")
    ax.set_title(f"regime {report.regime}, lambda = {report.lam:g}")
    ax.legend()
    return _save(fig, path)


def fig_h(probe, path):
    s = np.array(probe.h_samples)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.4, 3.6))
    ax1.plot(s[:, 0], s[:, 1], "o-")
    ax1.axhline(probe.lambda_star, ls="--", color="gray", lw=0.8)
    ax1.set_xlabel("eps")
    ax1.set_ylabel("h(eps)")
    ax2.plot(s[:, 0], s[:, 2], "o-")
    ax2.axhline(0.0, ls="--", color="gray", lw=0.8)
    ax2.set_xlabel("eps")
    ax2.set_ylabel("h'(eps)")
    return _save(fig, path)


def fig_lmax(summary, path):
    rows = summary["rows"]
    gap = np.array([summary["lambda_max"] - r["lambda"] for r in rows])
    fig, ax = plt.subplots(figsize=(5.6, 4.2))
    for key in ("beta", "mu", "w_sup"):
        ax.loglog(gap, [r[key] for r in rows], "o-", label=key)
    ax.set_xlabel("lambda_max - lambda")
    ax.legend()
    return _save(fig, path)
