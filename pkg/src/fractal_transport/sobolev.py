"""Bessel potential norms, Besov increment norms and regularity probes."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from .sampling import hermitian_normals
from .spectral import (
    Grid,
    RealField,
    bessel_potential,
    dft_forward,
    dft_inverse,
    SpectralCoeffs,
    relative_or_absolute,
)

# excess decay used by random_field_with_regularity
REGULARITY_EPS = 0.05


@dataclass(frozen=True)
class SobolevIndex:
    """Smoothness ``s`` and integrability ``p`` of ``H^s_p``."""

    s: float
    p: float = 2.0

    def __post_init__(self):
        if not np.isfinite(self.p) or self.p < 2:
            raise ValueError(f"integrability exponent p={self.p} must be finite and >= 2")


IndexLike = Union[SobolevIndex, float, int]


def _as_index(idx: IndexLike) -> SobolevIndex:
    return idx if isinstance(idx, SobolevIndex) else SobolevIndex(float(idx))


def lp_norm(values: np.ndarray, grid: Grid, p: float = 2.0) -> float:
    """Grid L_p norm with quadrature weight ``h**d``."""
    a = np.abs(values)
    if p == 2:
        return float(np.sqrt(np.sum(a * a) * grid.cell_volume))
    return float((np.sum(a**p) * grid.cell_volume) ** (1.0 / p))


def norm_Hsp(f: RealField, idx: IndexLike) -> float:
    """``|| J^s f ||_{L_p}`` evaluated on the grid."""
    idx = _as_index(idx)
    return lp_norm(bessel_potential(f, idx.s).values, f.grid, idx.p)


def norm_Hs_coeff(f: RealField, s: float) -> float:
    """p = 2 norm from coefficients, ``L^{d/2} (sum (1+|xi|^2)^s |c_k|^2)^{1/2}``."""
    c = dft_forward(f).coeffs
    g = f.grid
    return float(np.sqrt(g.L**g.d * np.sum((1 + g.xi_sq) ** s * np.abs(c) ** 2)))


def tilde_norm(f: RealField, idx: IndexLike) -> tuple:
    """Ambient norm plus the support defect for the space on ``D``.

    The defect is the fraction of squared L2 mass outside the closed box; it
    is reported, never enforced.
    """
    idx = _as_index(idx)
    if idx.s <= -0.5:
        raise ValueError(f"tilde spaces are only defined for s > -1/2 (got s={idx.s})")
    v = f.values
    outside = float(np.sum(v[~f.grid.domain_mask] ** 2))
    total = float(np.sum(v**2))
    defect = relative_or_absolute(outside, total)
    return norm_Hsp(f, idx), defect


def _shift_vectors(grid: Grid, radius: float = 1.0) -> np.ndarray:
    m = int(np.floor(radius / grid.h + 1e-12))
    axes = [np.arange(-m, m + 1)] * grid.d
    n = np.stack([a.ravel() for a in np.meshgrid(*axes, indexing="ij")], axis=1)
    r = np.linalg.norm(n, axis=1) * grid.h
    keep = (r > 0) & (r <= radius * (1 + 1e-12))
    return n[keep]


def besov_increment_norm(f: RealField, alpha_prime: float, p: float = 2.0) -> float:
    """``||f||_{L_p} + (int_{|y|<=1} ||f(.+y) - f||_{L_p}^2 / |y|^{d+2a} dy)^{1/2}``.

    The integral is a sum over lattice shifts with weight ``h**d``; shifts
    act periodically.  For p = 2 all increments come from one
    autocorrelation FFT.
    """
    if not 0 < alpha_prime < 1:
        raise ValueError("alpha_prime must lie in (0, 1)")
    if p < 2:
        raise ValueError("p must be >= 2")
    g = f.grid
    v = f.values
    n = _shift_vectors(g)
    r = np.linalg.norm(n, axis=1) * g.h
    if p == 2:
        F = np.fft.fftn(v)
        auto = np.fft.ifftn(np.abs(F) ** 2).real
        idx = tuple((n % g.N).T)
        sq = 2 * g.cell_volume * (np.sum(v * v) - auto[idx])
        sq = np.maximum(sq, 0.0)
    else:
        sq = np.empty(len(n))
        axes = tuple(range(g.d))
        for i, shift in enumerate(n):
            diff = np.roll(v, tuple(-shift), axis=axes) - v
            sq[i] = lp_norm(diff, g, p) ** 2
    integral = np.sum(sq / r ** (g.d + 2 * alpha_prime)) * g.cell_volume
    return lp_norm(v, g, p) + float(np.sqrt(integral))


def random_field_with_regularity(g: Grid, s: float, seed: int) -> RealField:
    """Gaussian field whose H^s norm stays bounded under refinement.

    Coefficient standard deviation is ``(1+|xi|^2)^{-(s + d/2 + eps)/2}``
    with ``eps = 0.05``.  Low-frequency draws are shared between grids with
    the same ``L`` and seed.
    """
    sd = (1 + g.xi_sq) ** (-(s + g.d / 2 + REGULARITY_EPS) / 2)
    return dft_inverse(SpectralCoeffs(g, sd * hermitian_normals(g, seed)))


class HolderEstimate(NamedTuple):
    exponent: float
    degenerate: bool
    lags: np.ndarray
    increments: np.ndarray


def dyadic_lags(grid: Grid) -> np.ndarray:
    """Lattice lags (in nodes) ``2, 4, ...`` with lag length in ``[2h, L/8]``."""
    lags = []
    n = 2
    while n * grid.h <= grid.L / 8 * (1 + 1e-12):
        lags.append(n)
        n *= 2
    return np.array(lags)


def holder_exponent_estimate(f: RealField) -> HolderEstimate:
    """Least-squares slope of ``log sup |f(x+h e_j) - f(x)|`` against ``log h``.

    Pairs are taken along the coordinate axes at exact dyadic lattice lags,
    without periodic wrap.  Constant fields are flagged degenerate and get
    exponent 1.
    """
    g = f.grid
    v = f.values
    lags = dyadic_lags(g)
    sups = np.zeros(len(lags))
    for i, n in enumerate(lags):
        best = 0.0
        for axis in range(g.d):
            lo = np.take(v, np.arange(0, g.N - n), axis=axis)
            hi = np.take(v, np.arange(n, g.N), axis=axis)
            best = max(best, float(np.abs(hi - lo).max()))
        sups[i] = best
    scale = max(float(np.abs(v).max()), 1.0)
    if np.all(sups <= 1e-14 * scale):
        return HolderEstimate(1.0, True, lags * g.h, sups)
    logs = np.log(np.maximum(sups, 1e-300))
    slope = np.polyfit(np.log(lags * g.h), logs, 1)[0]
    return HolderEstimate(float(np.clip(slope, 0.0, 1.0)), False, lags * g.h, sups)
