"""Dirichlet Laplacian on the box D in its sine eigenbasis.

Basis: ``e_k(x) = prod_i sqrt(2/l) sin(k_i pi (x_i - a_i)/l)``, k in
``{1..M}^d``, eigenvalues ``lambda_k = (pi/l)^2 |k|^2``.  ``M`` is the number
of ambient grid nodes strictly inside D, so analysis and synthesis are
discrete sine transforms on nodes shared with the ambient grid.  With the
quadrature weight ``h**d`` the sampled basis is exactly orthonormal.

The generator is ``A = sigma2 * (-Delta_D)``; every operator here takes the
diffusion coefficient ``sigma2`` explicitly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .spectral import Grid, RealField, VectorField, relative_or_absolute

__all__ = [
    "SineCoeffs",
    "EigenIndex",
    "eigenvalues",
    "sine_analysis",
    "sine_analysis_with_defect",
    "sine_synthesis",
    "sine_gradient",
    "semigroup_apply",
    "fractional_power_apply",
    "eigen_norm",
    "smoothing_ratio",
    "holder_defect",
    "analytic_decay_ratio",
    "random_sine_coeffs",
    "eigenmode",
]


@dataclass(frozen=True, eq=False)
class SineCoeffs:
    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        M = self.grid.n_interior
        if c.shape != (M,) * self.grid.d:
            raise ValueError(f"sine coefficients must have shape {(M,) * self.grid.d}, got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("sine coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, grid: Grid) -> "SineCoeffs":
        return cls(grid, np.zeros((grid.n_interior,) * grid.d))

    def _other(self, other):
        if isinstance(other, SineCoeffs):
            if other.grid != self.grid:
                raise ValueError("coefficients live on different grids")
            return other.coeffs
        return other

    def __add__(self, other):
        return SineCoeffs(self.grid, self.coeffs + self._other(other))

    def __sub__(self, other):
        return SineCoeffs(self.grid, self.coeffs - self._other(other))

    def __mul__(self, other):
        return SineCoeffs(self.grid, self.coeffs * self._other(other))

    __rmul__ = __mul__

    def __neg__(self):
        return SineCoeffs(self.grid, -self.coeffs)


@dataclass(frozen=True)
class EigenIndex:
    s: float


def _order(idx) -> float:
    return idx.s if isinstance(idx, EigenIndex) else float(idx)


def eigenvalues(grid: Grid) -> np.ndarray:
    """``lambda_k`` of ``-Delta_D`` on the coefficient array layout."""
    k = np.arange(1, grid.n_interior + 1)
    lam1 = (np.pi * k / grid.domain_side) ** 2
    if grid.d == 1:
        return lam1
    return lam1[:, None] + lam1[None, :]


def _norm_factor(grid: Grid) -> float:
    return np.sqrt(2.0 / grid.domain_side) / 2.0


def sine_analysis_with_defect(f: RealField) -> tuple:
    """Sine coefficients of ``f`` on D and the relative L2 mass outside D."""
    g = f.grid
    v = f.values[g.interior_slices]
    c = sfft.dstn(v, type=1) * (g.h * _norm_factor(g)) ** g.d
    outside = np.sqrt(np.sum(f.values[~g.domain_mask] ** 2) * g.cell_volume)
    return SineCoeffs(g, c), relative_or_absolute(float(outside), f.l2_norm())


def sine_analysis(f: RealField) -> SineCoeffs:
    return sine_analysis_with_defect(f)[0]


def sine_synthesis(c: SineCoeffs) -> RealField:
    """Evaluate the sine series on the ambient grid, zero outside D."""
    g = c.grid
    out = np.zeros(g.shape)
    out[g.interior_slices] = sfft.dstn(c.coeffs, type=1) * _norm_factor(g) ** g.d
    return RealField(g, out)


def sine_gradient(c: SineCoeffs) -> VectorField:
    """Exact gradient of the sine series on the nodes of the closed box.

    Values outside the closed box are zero.  The normal derivative does not
    vanish on the boundary, so the zero extension jumps there.
    """
    g = c.grid
    M = g.n_interior
    a = _norm_factor(g)
    k = np.arange(1, M + 1) * np.pi / g.domain_side
    comps = []
    for j in range(g.d):
        vals = c.coeffs
        for axis in range(g.d):
            if axis == j:
                shape = [1] * g.d
                shape[axis] = M
                padded = np.pad(vals * k.reshape(shape),
                                [(1, 1) if ax == axis else (0, 0) for ax in range(g.d)])
                vals = sfft.dct(padded, type=1, axis=axis) * a
            else:
                inner = sfft.dst(vals, type=1, axis=axis) * a
                vals = np.pad(inner, [(1, 1) if ax == axis else (0, 0) for ax in range(g.d)])
        full = np.zeros(g.shape)
        full[g.closure_slices] = vals
        comps.append(RealField(g, full))
    return VectorField(tuple(comps))


def semigroup_apply(c: SineCoeffs, t: float, sigma2: float = 1.0) -> SineCoeffs:
    """Heat semigroup ``P_t``: multiply mode k by ``exp(-sigma2 lambda_k t)``."""
    if t < 0:
        raise ValueError("semigroup time must be non-negative")
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    if t == 0:
        return c
    return SineCoeffs(c.grid, c.coeffs * np.exp(-sigma2 * eigenvalues(c.grid) * t))


def fractional_power_apply(c: SineCoeffs, alpha: float, sigma2: float = 1.0) -> SineCoeffs:
    """``A^{alpha/2}``: multiply mode k by ``(sigma2 lambda_k)^{alpha/2}``."""
    if alpha == 0:
        return c
    return SineCoeffs(c.grid, c.coeffs * (sigma2 * eigenvalues(c.grid)) ** (alpha / 2))


def eigen_norm(c: SineCoeffs, idx, sigma2: float = 1.0) -> float:
    """``(sum_k (1 + sigma2 lambda_k)^s c_k^2)^{1/2}``."""
    s = _order(idx)
    w = (1 + sigma2 * eigenvalues(c.grid)) ** s
    return float(np.sqrt(np.sum(w * c.coeffs**2)))


def smoothing_ratio(w: SineCoeffs, t: float, delta: float, beta: float,
                    sigma2: float = 1.0) -> float:
    """``||P_t w||_{1+delta} t^{(1+delta+beta)/2} / ||w||_{-beta}`` in eigen-norms."""
    if not 0 < beta < delta < 0.5:
        raise ValueError("smoothing ratio needs 0 < beta < delta < 1/2")
    if t <= 0:
        raise ValueError("t must be positive")
    den = eigen_norm(w, -beta, sigma2)
    if den < 1e-14:
        raise ValueError("w is zero")
    num = eigen_norm(semigroup_apply(w, t, sigma2), 1 + delta, sigma2)
    return num * t ** ((1 + delta + beta) / 2) / den


def holder_defect(x: SineCoeffs, t: float, alpha: float, sigma2: float = 1.0) -> float:
    """``||P_t x - x|| / (t^alpha ||A^alpha x||)`` in L2(D)."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if t <= 0:
        raise ValueError("t must be positive")
    ax = np.linalg.norm(fractional_power_apply(x, 2 * alpha, sigma2).coeffs)
    den = t**alpha * ax
    if den < 1e-300 or ax < 1e-14:
        raise ValueError("zero denominator in the Holder defect")
    # 1 - exp(-y) via expm1 keeps accuracy for small t
    num = np.linalg.norm(-np.expm1(-sigma2 * eigenvalues(x.grid) * t) * x.coeffs)
    return float(num / den)


def analytic_decay_ratio(grid: Grid, alpha: float, t: float, sigma2: float = 1.0,
                         theta=None) -> float:
    """``||A^alpha P_t||_{L(L2)} t^alpha e^{theta t}``; default theta is half the lowest rate."""
    mu = sigma2 * eigenvalues(grid)
    if theta is None:
        theta = mu.min() / 2
    return float(np.max(mu**alpha * np.exp(-mu * t)) * t**alpha * np.exp(theta * t))


def _nested_sine_order(grid: Grid) -> np.ndarray:
    k = np.meshgrid(*([np.arange(1, grid.n_interior + 1)] * grid.d), indexing="ij")
    k = [a.ravel() for a in k]
    ring = np.max(np.stack(k), axis=0)
    return np.lexsort(tuple(reversed(k)) + (ring,))


def random_sine_coeffs(grid: Grid, s: float, seed: int, sigma2: float = 1.0,
                       eps: float = 0.05) -> SineCoeffs:
    """Gaussian sine series with finite eigen-norm of order ``s``.

    Standard deviation ``(1 + sigma2 lambda_k)^{-(s/2 + d/4 + eps/2)}``;
    low modes are shared across resolutions for a fixed seed.
    """
    rng = np.random.default_rng(seed)
    draws = rng.standard_normal(grid.n_interior**grid.d)
    z = np.empty_like(draws)
    z[_nested_sine_order(grid)] = draws
    sd = (1 + sigma2 * eigenvalues(grid)) ** (-(s / 2 + grid.d / 4 + eps / 2))
    return SineCoeffs(grid, sd * z.reshape((grid.n_interior,) * grid.d))


def eigenmode(grid: Grid, k) -> SineCoeffs:
    """Unit coefficient vector of the eigenfunction ``e_k`` (1-based index)."""
    k = np.broadcast_to(np.asarray(k, dtype=int), (grid.d,))
    c = np.zeros((grid.n_interior,) * grid.d)
    c[tuple(k - 1)] = 1.0
    return SineCoeffs(grid, c)
