"""Pathwise fractional noise: fBm samples, cutoff noise Z = psi B and checks.

Three generators are available:

* ``fbm1d_exact``: Davies-Harte circulant embedding of fractional Gaussian
  noise followed by a cumulative sum, exact in law on the grid nodes.
* ``levy_spectral``: isotropic Levy fractional Brownian field from Gaussian
  spectral amplitudes with density ``|xi|^{-(2H+d)}``, on the lattice
  frequencies plus ten levels of subharmonic frequencies inside the
  central lattice cell.  The field is pinned to zero at the origin node
  and its amplitude is fixed by the exact variance at ``|x| = 0.25``.
* ``smooth_test``: a short deterministic sum of low Fourier modes with
  seeded signs, exactly band limited.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .reports import BoundReport
from .sampling import hermitian_normals
from .sobolev import SobolevIndex, norm_Hsp
from .spectral import Grid, RealField, SpectralCoeffs, dft_inverse

KINDS = ("fbm1d_exact", "levy_spectral", "smooth_test")
SUBHARMONIC_LEVELS = 10
REFERENCE_RADIUS = 0.25
REGULARITY_DRIFT = 0.15


@dataclass(frozen=True)
class NoiseSpec:
    H: float = 0.9
    seed: int = 0
    kind: str = "fbm1d_exact"
    band: int = 4

    def __post_init__(self):
        if not 0 < self.H < 1:
            raise ValueError(f"Hurst parameter H={self.H} must lie in (0, 1)")
        if self.kind not in KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}; expected one of {KINDS}")
        if self.band < 1:
            raise ValueError("band must be at least 1")


def fbm_covariance(x, y, H: float):
    """``E[B(x)B(y)] = (|x|^{2H} + |y|^{2H} - |x-y|^{2H}) / 2`` (Euclidean norms)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    nx, ny, nxy = (np.linalg.norm(v) for v in (x, y, x - y))
    return 0.5 * (nx ** (2 * H) + ny ** (2 * H) - nxy ** (2 * H))


# ---------------------------------------------------------------------------
# exact 1-d fBm
# ---------------------------------------------------------------------------

def _fgn_eigenvalues(N: int, h: float, H: float) -> np.ndarray:
    k = np.arange(N + 1, dtype=float)
    gam = 0.5 * h ** (2 * H) * (
        np.abs(k + 1) ** (2 * H) - 2 * k ** (2 * H) + np.abs(k - 1) ** (2 * H))
    row = np.concatenate([gam, gam[-2:0:-1]])
    return np.fft.fft(row).real


@lru_cache(maxsize=32)
def _fgn_sqrt_eigs(N: int, h: float, H: float) -> np.ndarray:
    lam = _fgn_eigenvalues(N, h, H)
    if lam.min() < -1e-9 * max(lam.max(), 1e-300):
        raise ArithmeticError(
            f"circulant embedding produced a negative eigenvalue {lam.min():.3e}")
    return np.sqrt(np.clip(lam, 0.0, None) / (2 * N))


def synthesize_fbm_1d(spec: NoiseSpec, g: Grid) -> RealField:
    """Exact fBm on the nodes ``x_i = i h`` with ``B(0) = 0``."""
    if g.d != 1:
        raise ValueError("exact fBm synthesis is one-dimensional")
    if spec.kind != "fbm1d_exact":
        raise ValueError("spec.kind must be 'fbm1d_exact'")
    N = g.N
    root = _fgn_sqrt_eigs(N, g.h, spec.H)
    rng = np.random.default_rng(spec.seed)
    w = rng.standard_normal(2 * N) + 1j * rng.standard_normal(2 * N)
    increments = np.fft.fft(root * w)[:N].real
    B = np.concatenate([[0.0], np.cumsum(increments[:-1])])
    return RealField(g, B)


# ---------------------------------------------------------------------------
# approximate Levy fBm
# ---------------------------------------------------------------------------

def _lattice_variances(g: Grid, H: float) -> np.ndarray:
    """Variance of each lattice coefficient before calibration."""
    cell = (2 * np.pi / g.L) ** g.d
    var = np.zeros(g.shape)
    nz = g.xi_sq > 0
    var[nz] = g.xi_sq[nz] ** (-(2 * H + g.d) / 2) * cell
    return var


def _subharmonics(g: Grid, H: float) -> tuple:
    """Half-set of subharmonic frequencies and the variance of each cos/sin pair."""
    base = 2 * np.pi / g.L
    offsets = np.stack([a.ravel() for a in np.meshgrid(*([[-1, 0, 1]] * g.d), indexing="ij")], 1)
    # keep one of each +-m pair: first nonzero component positive
    first = np.array([row[np.nonzero(row)[0][0]] if np.any(row) else 0 for row in offsets])
    offsets = offsets[first > 0]
    freqs, var = [], []
    for p in range(1, SUBHARMONIC_LEVELS + 1):
        step = base / 3**p
        xi = offsets * step
        r = np.linalg.norm(xi, axis=1)
        freqs.append(xi)
        var.append(2 * r ** (-(2 * H + g.d)) * step**g.d)
    return np.concatenate(freqs), np.concatenate(var)


def levy_variance_raw(g: Grid, H: float, x) -> float:
    """Exact ``Var[W(x) - W(0)]`` of the uncalibrated spectral field."""
    x = np.broadcast_to(np.asarray(x, dtype=float), (g.d,))
    phase = sum(np.broadcast_to(g.freqs[j], g.shape) * x[j] for j in range(g.d))
    total = np.sum(_lattice_variances(g, H) * 2 * (1 - np.cos(phase)))
    xi, var = _subharmonics(g, H)
    total += np.sum(var * 2 * (1 - np.cos(xi @ x)))
    return float(total)


@lru_cache(maxsize=64)
def levy_amplitude(g: Grid, H: float) -> float:
    """Scale making ``Var[B(x_ref)] = |x_ref|^{2H}`` at ``x_ref = 0.25 e_1``."""
    x_ref = np.zeros(g.d)
    x_ref[0] = REFERENCE_RADIUS
    return float(np.sqrt(REFERENCE_RADIUS ** (2 * H) / levy_variance_raw(g, H, x_ref)))


def levy_variance(g: Grid, H: float, x) -> float:
    """Exact ``Var[B(x)]`` of the calibrated generator."""
    return levy_amplitude(g, H) ** 2 * levy_variance_raw(g, H, x)


def synthesize_levy_fbm(spec: NoiseSpec, g: Grid) -> RealField:
    if spec.kind != "levy_spectral":
        raise ValueError("spec.kind must be 'levy_spectral'")
    lattice_seed, sub_seed = (int(s.generate_state(1)[0])
                              for s in np.random.SeedSequence(spec.seed).spawn(2))
    sd = np.sqrt(_lattice_variances(g, spec.H))
    W = dft_inverse(SpectralCoeffs(g, sd * hermitian_normals(g, lattice_seed))).values
    xi, var = _subharmonics(g, spec.H)
    draws = np.random.default_rng(sub_seed).standard_normal((len(var), 2))
    amp = np.sqrt(var)
    for j in range(len(var)):
        phase = sum(xi[j, a] * g.mesh[a] for a in range(g.d))
        W = W + amp[j] * (draws[j, 0] * np.cos(phase) + draws[j, 1] * np.sin(phase))
    W = W - W[(0,) * g.d]
    return RealField(g, levy_amplitude(g, spec.H) * W)


# ---------------------------------------------------------------------------
# smooth test drift, cutoff noise, regularity
# ---------------------------------------------------------------------------

def _smooth_modes(spec: NoiseSpec, g: Grid) -> list:
    """``(xi, amplitude, cos sign, sin sign)`` for every mode of the smooth test field."""
    if spec.band >= g.N // 2:
        raise ValueError("band must stay below the Nyquist index")
    rng = np.random.default_rng(spec.seed)
    axes = [np.arange(-spec.band, spec.band + 1)] * g.d
    ks = np.stack([a.ravel() for a in np.meshgrid(*axes, indexing="ij")], 1)
    first = np.array([row[np.nonzero(row)[0][0]] if np.any(row) else 0 for row in ks])
    ks = ks[first > 0]
    signs = rng.choice([-1.0, 1.0], size=(len(ks), 2))
    modes = []
    for k, (sc, ss) in zip(ks, signs):
        xi = 2 * np.pi * k / g.L
        amp = 1.0 / (2 * np.linalg.norm(xi) * np.dot(k, k)) / np.sqrt(2)
        modes.append((xi, amp, sc, ss))
    return modes


def synthesize_smooth_test(spec: NoiseSpec, g: Grid) -> RealField:
    """Sum of modes with ``0 < max_j |k_j| <= band`` and seeded signs.

    Each mode ``k`` carries amplitude ``1 / (2 |xi_k| |k|^2)`` so the gradient
    stays of order one.
    """
    Z = np.zeros(g.shape)
    for xi, amp, sc, ss in _smooth_modes(spec, g):
        phase = sum(xi[a] * g.mesh[a] for a in range(g.d))
        Z += amp * (sc * np.cos(phase) + ss * np.sin(phase))
    return RealField(g, Z)


def smooth_test_gradient(spec: NoiseSpec, g: Grid) -> tuple:
    """Closed-form gradient of ``synthesize_smooth_test`` at the grid nodes."""
    out = [np.zeros(g.shape) for _ in range(g.d)]
    for xi, amp, sc, ss in _smooth_modes(spec, g):
        phase = sum(xi[a] * g.mesh[a] for a in range(g.d))
        dphase = amp * (-sc * np.sin(phase) + ss * np.cos(phase))
        for a in range(g.d):
            out[a] += xi[a] * dphase
    return tuple(out)


def synthesize(spec: NoiseSpec, g: Grid) -> RealField:
    """Dispatch on ``spec.kind``."""
    if spec.kind == "fbm1d_exact":
        return synthesize_fbm_1d(spec, g)
    if spec.kind == "levy_spectral":
        return synthesize_levy_fbm(spec, g)
    return synthesize_smooth_test(spec, g)


def make_noise_Z(B: RealField, psi: RealField) -> RealField:
    """``Z = psi * B``."""
    if B.grid != psi.grid:
        raise ValueError("B and psi live on different grids")
    return RealField(B.grid, psi.values * B.values)


def coarsen(f: RealField) -> RealField:
    """Every other node, on the grid with half the resolution."""
    g = f.grid.with_N(f.grid.N // 2)
    return RealField(g, f.values[tuple(slice(None, None, 2) for _ in range(f.grid.d))])


def sobolev_regularity_report(Z: RealField, one_minus_beta: float, q: float,
                              threshold: float = REGULARITY_DRIFT) -> BoundReport:
    """Compare ``||Z||_{H_q^{1-beta}}`` at the working and the halved resolution.

    A relative drift below ``threshold`` is reported as "regular".
    """
    if q < 2:
        raise ValueError("q must be >= 2")
    idx = SobolevIndex(one_minus_beta, q)
    fine = norm_Hsp(Z, idx)
    coarse = norm_Hsp(coarsen(Z), idx)
    drift = abs(fine - coarse) / coarse if coarse > 1e-14 else abs(fine - coarse)
    ok = drift < threshold
    params = {"order": one_minus_beta, "q": q, "norm": fine, "norm_coarse": coarse,
              "N": Z.grid.N, "verdict": "regular" if ok else "irregular",
              "rule": "measured < reference"}
    return BoundReport("sobolev_regularity", float(drift), threshold, params, bool(ok))


def covariance_study(spec: NoiseSpec, g: Grid, pairs, n_samples: int, seeds=None) -> list:
    """Monte-Carlo ``E[B(x)B(y)]`` at node pairs along the first axis.

    Returns rows ``(x, y, empirical_cov, formula_cov, stderr)``.
    """
    if seeds is None:
        seeds = [spec.seed + i for i in range(n_samples)]
    idx = []
    for x, y in pairs:
        ix, iy = int(round(x / g.h)), int(round(y / g.h))
        idx.append((ix, iy))
    samples = np.empty((len(seeds), len(pairs), 2))
    for s, seed in enumerate(seeds):
        B = synthesize(NoiseSpec(spec.H, int(seed), spec.kind, spec.band), g).values
        line = B if g.d == 1 else B[:, 0]
        for p, (ix, iy) in enumerate(idx):
            samples[s, p] = line[ix], line[iy]
    rows = []
    for p, (x, y) in enumerate(pairs):
        prod = samples[:, p, 0] * samples[:, p, 1]
        rows.append((float(x), float(y), float(prod.mean()), float(fbm_covariance(x, y, spec.H)),
                     float(prod.std(ddof=1) / np.sqrt(len(prod)))))
    return rows
