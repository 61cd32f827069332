"""Curvature datum f0, its maxima, the admissible interval, and the constant L.

The datum is a smooth nonpositive function with max f0 = 0 attained at
finitely many nondegenerate points. f_lambda = f0 + lambda is admissible
for lambda in (0, -mean(f0)): there the integral is negative while the
field still changes sign.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import spectral as sp
from .errors import DegenerateMaximum, NotNonpositive, VerificationFailed

HESS_TOL = 1e-6
F0_TOL = 1e-10
# safety factor on the sampled third-order remainder bound
C2_SAFETY = 1.5


@dataclass(frozen=True)
class F0Family:
    """Descriptor of a built-in curvature family.

    variant 'cosine': f0 = a (cos 2 pi x + cos 2 pi y - 2), params {'a': a}.
    variant 'multibump': f0 = -prod_i a_i W(x - c_i) with
        W(y) = 2 - cos 2 pi y1 - cos 2 pi y2; params {'bumps': [(cx, cy, a)]}.
        W vanishes quadratically exactly at each center, so the product
        has a nondegenerate zero-maximum at every center.
    variant 'tabulated': values loaded from a TORUS-FIELD snapshot,
        params {'path': str} (or {'values': array} when built in memory).
    """

    variant: str
    params: dict

    def describe(self) -> str:
        if self.variant == "cosine":
            return f"cosine:{self.params['a']:g}"
        if self.variant == "multibump":
            parts = [f"{cx:g},{cy:g},{a:g}" for cx, cy, a in self.params["bumps"]]
            return "multibump:" + ";".join(parts)
        if self.variant == "tabulated":
            return f"tabulated:{self.params.get('path', '<memory>')}"
        raise ValueError(f"unknown family variant {self.variant!r}")


def cosine(a: float) -> F0Family:
    if a <= 0:
        raise ValueError("cosine amplitude must be positive")
    return F0Family("cosine", {"a": float(a)})


def multibump(bumps) -> F0Family:
    bumps = [(float(cx), float(cy), float(a)) for cx, cy, a in bumps]
    if not bumps or any(a <= 0 for _, _, a in bumps):
        raise ValueError("multibump needs at least one bump with positive amplitude")
    return F0Family("multibump", {"bumps": bumps})


def tabulated(path) -> F0Family:
    return F0Family("tabulated", {"path": str(path)})


@dataclass(frozen=True)
class Problem:
    """Immutable statement of one curvature problem on a fixed grid."""

    family: F0Family
    grid: sp.Grid
    f0: sp.Field
    f0_bar: float
    lambda_max: float
    f0_min: float
    maxima: tuple  # ((point ndarray(2), hessian ndarray(2,2)), ...)
    L: float
    validated: bool = True

    def f_lambda(self, lam: float) -> sp.Field:
        return sp.Field(self.grid, self.f0.values + lam)

    def in_admissible_range(self, lam: float) -> bool:
        return 0.0 < lam < self.lambda_max


def _closed_form(family: F0Family):
    """Value/gradient/Hessian closures for differentiable families."""
    if family.variant == "cosine":
        a = family.params["a"]
        tp = 2.0 * np.pi

        def val(x, y):
            return a * (np.cos(tp * x) + np.cos(tp * y) - 2.0)

        def grad(x, y):
            return np.array([-a * tp * np.sin(tp * x), -a * tp * np.sin(tp * y)])

        def hess(x, y):
            return np.array([
                [-a * tp * tp * np.cos(tp * x), 0.0],
                [0.0, -a * tp * tp * np.cos(tp * y)],
            ])

        return val, grad, hess

    if family.variant == "multibump":
        bumps = family.params["bumps"]
        tp = 2.0 * np.pi

        def W(y1, y2):
            return 2.0 - np.cos(tp * y1) - np.cos(tp * y2)

        def Wg(y1, y2):
            return np.array([tp * np.sin(tp * y1), tp * np.sin(tp * y2)])

        def Wh(y1, y2):
            return np.array([
                [tp * tp * np.cos(tp * y1), 0.0],
                [0.0, tp * tp * np.cos(tp * y2)],
            ])

        def parts(x, y):
            return [(a * W(x - cx, y - cy), a * Wg(x - cx, y - cy), a * Wh(x - cx, y - cy))
                    for cx, cy, a in bumps]

        def val(x, y):
            out = -1.0
            for cx, cy, a in bumps:
                out = out * a * W(x - cx, y - cy)
            return out

        def grad(x, y):
            ps = parts(x, y)
            vals = [p[0] for p in ps]
            g = np.zeros(2)
            for i, (_, gi, _) in enumerate(ps):
                rest = 1.0
                for j, vj in enumerate(vals):
                    if j != i:
                        rest *= vj
                g += gi * rest
            return -g

        def hess(x, y):
            ps = parts(x, y)
            vals = [p[0] for p in ps]
            H = np.zeros((2, 2))
            m = len(ps)
            for i in range(m):
                rest = 1.0
                for j in range(m):
                    if j != i:
                        rest *= vals[j]
                H += ps[i][2] * rest
                for j in range(m):
                    if j == i:
                        continue
                    rest2 = 1.0
                    for k in range(m):
                        if k != i and k != j:
                            rest2 *= vals[k]
                    H += np.outer(ps[i][1], ps[j][1]) * rest2
            return -H

        return val, grad, hess

    return None


def _sample_field(family: F0Family, grid: sp.Grid) -> sp.Field:
    if family.variant == "tabulated":
        if "values" in family.params:
            vals = np.asarray(family.params["values"], dtype=float)
            if vals.shape != (grid.n, grid.n):
                raise ValueError("tabulated values do not match the grid")
            return sp.Field(grid, vals)
        f = sp.load_field(family.params["path"])
        if f.grid.n != grid.n:
            raise ValueError(
                f"tabulated snapshot has n={f.grid.n}, run grid has n={grid.n}"
            )
        return f
    cf = _closed_form(family)
    return sp.from_function(grid, lambda x, y: cf[0](x, y))


def _grid_local_maxima(values: np.ndarray, tol: float):
    """Indices of strict-or-flat local maxima over the 8-neighborhood,
    restricted to points within tol of the global maximum."""
    vmax = values.max()
    cand = []
    n = values.shape[0]
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            shifted = np.roll(np.roll(values, di, axis=0), dj, axis=1)
            cand.append(values >= shifted)
    mask = np.logical_and.reduce(cand) & (values >= vmax - tol)
    return list(zip(*np.nonzero(mask)))


def _quadratic_fit_hessian(values: np.ndarray, i: int, j: int, h: float):
    """Hessian and sub-grid offset from the 3x3 stencil around (i, j)."""
    n = values.shape[0]
    sten = np.array([
        [values[(i + di) % n, (j + dj) % n] for dj in (-1, 0, 1)]
        for di in (-1, 0, 1)
    ])
    fxx = (sten[2, 1] - 2 * sten[1, 1] + sten[0, 1]) / h**2
    fyy = (sten[1, 2] - 2 * sten[1, 1] + sten[1, 0]) / h**2
    fxy = (sten[2, 2] - sten[2, 0] - sten[0, 2] + sten[0, 0]) / (4 * h**2)
    fx = (sten[2, 1] - sten[0, 1]) / (2 * h)
    fy = (sten[1, 2] - sten[1, 0]) / (2 * h)
    H = np.array([[fxx, fxy], [fxy, fyy]])
    try:
        offset = np.linalg.solve(H, -np.array([fx, fy]))
    except np.linalg.LinAlgError:
        offset = np.zeros(2)
    return H, offset


def build_problem(family: F0Family, grid: sp.Grid, strict: bool = True,
                  allow_degenerate: bool = False) -> Problem:
    """Populate a Problem: sample f0, locate maxima, compute L.

    Maxima are found by a grid scan followed by two Newton refinements on
    the closed form (quadratic-fit refinement for tabulated data). With
    strict=True the datum must satisfy max f0 <= F0_TOL and every Hessian
    must be negative definite; allow_degenerate skips the Hessian check
    (useful for studies near the upper endpoint, which need no maxima).
    """
    f0 = _sample_field(family, grid)
    f0_bar = sp.integrate(f0)
    f0_min = float(f0.values.min())
    f0_max = float(f0.values.max())
    if strict and f0_max > F0_TOL:
        raise NotNonpositive(f"max f0 = {f0_max:.3e} exceeds {F0_TOL}")

    cf = _closed_form(family)
    h = grid.h
    maxima = []
    seen = []
    for (i, j) in _grid_local_maxima(f0.values, tol=max(F0_TOL, 1e-9)):
        if cf is not None:
            p = np.array([i * h, j * h])
            val, gradf, hessf = cf
            for _ in range(2):  # two Newton refinements on the closed form
                H = hessf(p[0], p[1])
                g = gradf(p[0], p[1])
                try:
                    p = p - np.linalg.solve(H, g)
                except np.linalg.LinAlgError:
                    break
            p = p % 1.0
            p[p >= 1.0] = 0.0  # x % 1.0 gives 1.0 exactly for tiny negative x
            H = hessf(p[0], p[1])
        else:
            H, offset = _quadratic_fit_hessian(f0.values, i, j, h)
            # clip the sub-grid shift to one cell to stay honest about fit range
            offset = np.clip(offset, -h, h)
            p = (np.array([i * h, j * h]) + offset) % 1.0
            p[p >= 1.0] = 0.0
        if any(_torus_dist(p, q) < 2 * h for q, _ in seen):
            continue
        eigs = np.linalg.eigvalsh(H)
        if not allow_degenerate:
            if np.any(np.abs(eigs) < HESS_TOL) or np.any(eigs > -HESS_TOL):
                raise DegenerateMaximum(
                    f"maximum near ({p[0]:.4f}, {p[1]:.4f}) has eigenvalues {eigs}"
                )
        seen.append((p, H))
    maxima = tuple((p, H) for p, H in seen)

    prob = Problem(
        family=family, grid=grid, f0=f0, f0_bar=f0_bar,
        lambda_max=-f0_bar, f0_min=f0_min, maxima=maxima, L=0.0,
        validated=strict,
    )
    if maxima:
        L = compute_L(prob)
    else:
        # no usable maxima (degenerate studies): chart constant from f0_min only
        L = float(np.sqrt(max(-f0_min, 1.0)) * 2.0)
    return dataclasses.replace(prob, L=L)


def _torus_dist(p, q):
    d = np.abs(np.asarray(p) - np.asarray(q))
    d = np.minimum(d, 1.0 - d)
    return float(np.hypot(d[0], d[1]))


def problem_from_field(f0: sp.Field, descriptor: str = "custom") -> Problem:
    """Lenient constructor for data that is not a curvature datum.

    Skips the nonpositivity and maxima machinery entirely; used for
    manufactured right-hand sides where only f_lambda, quadrature and the
    sign conditions matter. The result carries validated=False.
    """
    fam = F0Family("tabulated", {"values": f0.values, "path": descriptor})
    f0_bar = sp.integrate(f0)
    return Problem(
        family=fam, grid=f0.grid, f0=f0, f0_bar=f0_bar,
        lambda_max=-f0_bar, f0_min=float(f0.values.min()),
        maxima=(), L=2.0 * np.pi, validated=False,
    )


def f_lambda(p: Problem, lam: float) -> sp.Field:
    """The shifted datum f0 + lambda."""
    return p.f_lambda(lam)


def constraint_value(p: Problem, lam: float, u: sp.Field) -> float:
    """integral f_lambda e^{2u}; the overflow cap flags via exp2_values."""
    ef, _ = sp.exp2_values(u.values)
    return float(np.mean((p.f0.values + lam) * ef))


def compute_L(p: Problem, sample_lams=(0.02, 0.05, 0.1, 0.2, 0.5)) -> float:
    """The chart constant L: L^2 >= 4c and L^2 > -min f0.

    c = max(c1, c2) per maximum, where c1 bounds the quadratic model from
    below (half the largest Hessian eigenvalue magnitude) and c2 is a
    sampled third-order remainder bound times a safety factor. The disc
    condition f0 > -lambda/2 on B_{sqrt(lambda)/L} is then verified by
    sampling for each maximum and each sampled lambda below lambda_max.
    """
    if not p.maxima:
        raise VerificationFailed("no maxima recorded; L is undefined")
    c = 0.0
    for point, H in p.maxima:
        eigs = np.linalg.eigvalsh(H)
        c1 = 0.5 * float(np.max(np.abs(eigs)))
        c2 = _third_order_bound(p, point, H)
        c = max(c, c1, c2)
    L = float(np.sqrt(4.0 * c))
    if L * L <= -p.f0_min:
        # strict inequality L^2 > -min f0 keeps sqrt(lam)/L inside a chart
        L = float(np.sqrt(-p.f0_min) * (1.0 + 1e-9))

    # sampled verification of the disc bound
    x, y = p.grid.axes()
    for lam in sample_lams:
        if not (0.0 < lam < min(p.lambda_max, -p.f0_min)):
            continue
        rad = np.sqrt(lam) / L
        for point, _ in p.maxima:
            dx = (x - point[0] + 0.5) % 1.0 - 0.5
            dy = (y - point[1] + 0.5) % 1.0 - 0.5
            mask = dx * dx + dy * dy <= rad * rad
            if mask.any() and float(p.f0.values[mask].min()) <= -0.5 * lam:
                raise VerificationFailed(
                    f"f0 <= -lambda/2 inside B_{{sqrt(lam)/L}} at lam={lam}"
                )
    return L


def _third_order_bound(p: Problem, point, H, n_samples: int = 4096, seed: int = 7):
    """Sampled one-sided remainder bound on the punctured unit chart.

    Only the deficit of f0 below its quadratic model matters for the
    lower bound f0 >= -c|y|^2; remainders above the model (the cosine
    family everywhere, for instance) contribute nothing.
    """
    rng = np.random.default_rng(seed)
    rho = 0.5 * np.sqrt(rng.uniform(0.0, 1.0, n_samples))
    th = rng.uniform(0.0, 2.0 * np.pi, n_samples)
    ys = np.column_stack([rho * np.cos(th), rho * np.sin(th)])
    cf = _closed_form(p.family)
    if cf is not None:
        pts = point[None, :] + ys
        vals = cf[0](pts[:, 0], pts[:, 1])
    else:
        vals = sp.eval_at(p.f0, (point[None, :] + ys) % 1.0)
    quad = 0.5 * np.einsum("ai,ij,aj->a", ys, H, ys)
    deficit = np.maximum(quad - vals, 0.0)
    r3 = np.maximum(rho, 1e-12) ** 3
    return C2_SAFETY * float(np.max(deficit / r3))
