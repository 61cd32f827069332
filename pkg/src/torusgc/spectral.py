"""Periodic spectral arithmetic on the unit flat torus [0,1)^2.

Fields live on a uniform n x n grid (n a power of two). All operators
are realized through the FFT: the Laplacian acts as the multiplier
-4 pi^2 |k|^2 on integer frequencies, quadrature is the trapezoid rule
(exact for trigonometric polynomials, total weight exactly 1), and
off-grid evaluation uses trigonometric interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ChartTooLarge, MeanNotZero

MEAN_TOL = 1e-10
SOLVER_TOL = 1e-12
EXP_CAP = 300.0


def _is_power_of_two(n):
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [0,1)^2 with n points per axis."""

    n: int

    def __post_init__(self):
        if self.n < 16 or not _is_power_of_two(self.n):
            raise ValueError(f"grid size must be a power of two >= 16, got {self.n}")

    @property
    def h(self):
        return 1.0 / self.n

    def axes(self):
        """Coordinate arrays (x, y) with 'ij' indexing, shape (n, n) each."""
        t = np.arange(self.n) / self.n
        return np.meshgrid(t, t, indexing="ij")

    def wavenumbers(self):
        """Integer frequency grids (kx, ky), shape (n, n) each."""
        k = np.fft.fftfreq(self.n, d=1.0 / self.n)
        return np.meshgrid(k, k, indexing="ij")


@dataclass(frozen=True)
class Field:
    """Real-valued function sampled on a Grid, row-major values."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n, self.grid.n):
            raise ValueError(f"values shape {v.shape} does not match grid n={self.grid.n}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class SpectralCoeffs:
    """Fourier coefficients indexed by integer frequencies, |k_i| <= n/2.

    Stored in numpy fft layout; coefficient (0,0) equals the field mean.
    """

    grid: Grid
    coeffs: np.ndarray


def transform(f: Field) -> SpectralCoeffs:
    """Forward transform; coefficient (0,0) is the mean of f."""
    n = f.grid.n
    c = np.fft.fft2(f.values) / (n * n)
    return SpectralCoeffs(f.grid, c)


def inverse(c: SpectralCoeffs) -> Field:
    """Inverse transform back to a real field."""
    n = c.grid.n
    v = np.fft.ifft2(c.coeffs) * (n * n)
    return Field(c.grid, np.real(v))


def _laplacian_multiplier(grid: Grid):
    kx, ky = grid.wavenumbers()
    return 4.0 * np.pi**2 * (kx * kx + ky * ky)


def laplacian(f: Field) -> Field:
    """Apply the flat Laplacian spectrally."""
    mult = _laplacian_multiplier(f.grid)
    c = np.fft.fft2(f.values)
    return Field(f.grid, np.real(np.fft.ifft2(-mult * c)))


def gradient(f: Field):
    """Return (df/dx, df/dy) as Fields, computed spectrally."""
    kx, ky = f.grid.wavenumbers()
    c = np.fft.fft2(f.values)
    fx = np.real(np.fft.ifft2(2j * np.pi * kx * c))
    fy = np.real(np.fft.ifft2(2j * np.pi * ky * c))
    return Field(f.grid, fx), Field(f.grid, fy)


def solve_poisson(rhs: Field, strict: bool = False) -> Field:
    """Solve -Delta v = rhs - mean(rhs) with mean(v) = 0.

    On the torus the problem is solvable only for mean-zero data; the
    mean of rhs is projected out. With strict=True a rhs mean above
    MEAN_TOL raises MeanNotZero instead.
    """
    m = mean(rhs)
    if strict and abs(m) > MEAN_TOL:
        raise MeanNotZero(f"|mean(rhs)| = {abs(m):.3e} exceeds {MEAN_TOL}")
    mult = _laplacian_multiplier(rhs.grid)
    c = np.fft.fft2(rhs.values)
    out = np.zeros_like(c)
    nz = mult > 0
    out[nz] = c[nz] / mult[nz]
    # coefficient (0,0) zeroed: mean(v) = 0 exactly
    return Field(rhs.grid, np.real(np.fft.ifft2(out)))


def dirichlet_energy(f: Field) -> float:
    """E(f) = integral |grad f|^2, computed as sum 4 pi^2 |k|^2 |c_k|^2."""
    n = f.grid.n
    mult = _laplacian_multiplier(f.grid)
    c = np.fft.fft2(f.values) / (n * n)
    return float(np.sum(mult * (c.real**2 + c.imag**2)))


def inner_grad(f: Field, g: Field) -> float:
    """Gradient pairing integral (grad f, grad g)."""
    n = f.grid.n
    mult = _laplacian_multiplier(f.grid)
    cf = np.fft.fft2(f.values) / (n * n)
    cg = np.fft.fft2(g.values) / (n * n)
    return float(np.real(np.sum(mult * cf * np.conj(cg))))


def mean(f: Field) -> float:
    return float(np.mean(f.values))


def integrate(f: Field) -> float:
    """Quadrature over the unit-volume torus; integrate(1) = 1 exactly."""
    return float(np.mean(f.values))


def exp2_values(values: np.ndarray):
    """e^{2 v} with the exponent argument capped at +-EXP_CAP.

    Returns (array, capped flag); hitting the cap marks a blown-up
    iterate rather than overflowing.
    """
    z = 2.0 * values
    capped = bool(np.any(np.abs(z) > EXP_CAP))
    return np.exp(np.clip(z, -EXP_CAP, EXP_CAP)), capped


def integrate_exp(f: Field, weight: Field) -> float:
    """Quadrature of weight * e^{2 f}."""
    ef, _ = exp2_values(f.values)
    return float(np.mean(weight.values * ef))


def pad_to(f: Field, m: int) -> np.ndarray:
    """Values of the trigonometric interpolant of f on an m x m grid, m >= n.

    Zero-pads the spectrum; used for dealiased quadrature of products
    of sharply peaked factors.
    """
    n = f.grid.n
    if m == n:
        return f.values.copy()
    if m < n or m % 2:
        raise ValueError("padding target must be even and >= n")
    c = np.fft.fft2(f.values) / (n * n)
    cp = np.zeros((m, m), dtype=complex)
    h = n // 2
    cp[:h, :h] = c[:h, :h]
    cp[:h, m - h:] = c[:h, h:]
    cp[m - h:, :h] = c[h:, :h]
    cp[m - h:, m - h:] = c[h:, h:]
    return np.real(np.fft.ifft2(cp)) * (m * m)


def eval_at(f: Field, points: np.ndarray) -> np.ndarray:
    """Trigonometric interpolation of f at arbitrary points, shape (N, 2).

    The Nyquist row and column are split symmetrically between +n/2 and
    -n/2 so the interpolant is real and even in the highest mode.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = f.grid.n
    c = np.fft.fft2(f.values) / (n * n)
    k = np.fft.fftfreq(n, d=1.0 / n)
    # extend to a symmetric spectrum with both +n/2 and -n/2 at half weight
    ke = np.concatenate([k, [n / 2.0]])
    ce = np.zeros((n + 1, n + 1), dtype=complex)
    ce[:n, :n] = c
    ce[n, :] = ce[n // 2, :]
    ce[:, n] = ce[:, n // 2]
    ce[n // 2, :] *= 0.5
    ce[n, :] *= 0.5
    ce[:, n // 2] *= 0.5
    ce[:, n] *= 0.5
    px = np.exp(2j * np.pi * np.outer(pts[:, 0], ke))
    py = np.exp(2j * np.pi * np.outer(pts[:, 1], ke))
    return np.real(np.einsum("ak,kl,al->a", px, ce, py))


def sample_rescaled(u: Field, center, r: float, radii, n_rays: int = 8):
    """Profile samples of u on rays around center at radii scaled by r.

    Returns (offsets, values): offsets is the list of chart points x with
    |x| in radii along n_rays equispaced directions, values the
    trigonometric interpolant of u at center + r * x. The chart must
    stay inside a fundamental domain: r * max radius < 0.25.
    """
    radii = np.asarray(list(radii), dtype=float)
    if radii.size and r * float(np.max(np.abs(radii))) >= 0.25:
        raise ChartTooLarge(
            f"r*max|x| = {r * float(np.max(np.abs(radii))):.4f} leaves the chart (>= 0.25)"
        )
    center = np.asarray(center, dtype=float)
    angles = np.arange(n_rays) * (2.0 * np.pi / n_rays)
    offs = []
    for th in angles:
        d = np.array([np.cos(th), np.sin(th)])
        for rho in radii:
            offs.append(rho * d)
    offs = np.array(offs) if offs else np.zeros((0, 2))
    pts = center[None, :] + r * offs
    vals = eval_at(u, pts)
    return offs, vals


def save_field(f: Field, path):
    """Write the TORUS-FIELD v1 snapshot: a header line then raw float64."""
    with open(path, "wb") as fh:
        fh.write(f"TORUS-FIELD v1 n={f.grid.n}\n".encode("ascii"))
        fh.write(f.values.astype("<f8").tobytes(order="C"))


def load_field(path) -> Field:
    """Read a TORUS-FIELD v1 snapshot."""
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").strip()
        parts = header.split()
        if len(parts) != 3 or parts[0] != "TORUS-FIELD" or parts[1] != "v1":
            raise ValueError(f"bad snapshot header: {header!r}")
        n = int(parts[2].split("=", 1)[1])
        raw = fh.read(n * n * 8)
        if len(raw) != n * n * 8:
            raise ValueError("snapshot truncated")
        v = np.frombuffer(raw, dtype="<f8").reshape(n, n).copy()
    return Field(Grid(n), v)


def constant(grid: Grid, value: float) -> Field:
    return Field(grid, np.full((grid.n, grid.n), float(value)))


def from_function(grid: Grid, fn) -> Field:
    """Sample fn(x, y) on the grid; fn must accept meshgrid arrays."""
    x, y = grid.axes()
    return Field(grid, np.asarray(fn(x, y), dtype=float))
