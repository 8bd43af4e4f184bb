"""Products of functions and distributions through smooth frequency truncation.

``fg`` is approximated by ``S^j f * S^j g`` with ``S^j`` the Fourier
multiplier ``psi(|xi| / 2^j)``; ``psi`` is the same C-infinity step used for
the spatial cutoff, equal to 1 on ``|xi| <= 1`` and 0 on ``|xi| >= 3/2``.
On a finite grid the level saturates at ``j_max``, the first level whose
plateau covers every represented frequency; there the truncated product is
the plain grid product.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dirichlet import SineCoeffs, sine_analysis, sine_gradient
from .sobolev import norm_Hsp, SobolevIndex
from .spectral import (
    Grid,
    RealField,
    gradient,
    restrict_to_domain,
    smooth_step,
    relative_or_absolute,
)

J0 = 2


@dataclass(frozen=True, eq=False)
class ProductReport:
    value: RealField
    j_used: int
    tail: float
    converged: bool


def truncation_symbol(grid: Grid, j: int) -> np.ndarray:
    r = np.sqrt(grid.xi_sq) / 2.0**j
    return smooth_step(3.0 - 2.0 * r)


def max_level(grid: Grid) -> int:
    """Smallest ``j`` whose truncation plateau contains every grid frequency."""
    return int(np.ceil(np.log2(grid.xi_max)))


def smooth_truncate(f: RealField, j: int) -> RealField:
    F = np.fft.fftn(f.values) * truncation_symbol(f.grid, j)
    return RealField(f.grid, np.fft.ifftn(F).real)


def _neg_norm_weights(grid: Grid, beta: float) -> np.ndarray:
    return (1 + grid.xi_sq) ** (-beta)


def _padded_product(Fa: np.ndarray, Fb: np.ndarray) -> np.ndarray:
    """Dealiased product of two unnormalised spectra (3/2 rule)."""
    N = Fa.shape[0]
    d = Fa.ndim
    P = 3 * N // 2

    def pad(F):
        c = np.fft.fftshift(F / F.size)
        # split the Nyquist plane so the padded spectrum stays Hermitian
        for ax in range(d):
            c = np.concatenate([c, np.take(c, [0], axis=ax)], axis=ax)
            sl = [slice(None)] * d
            sl[ax] = [0, -1]
            c[tuple(sl)] *= 0.5
        widths = [((P - N) // 2, (P - N) // 2 - 1)] * d
        return np.fft.ifftshift(np.pad(c, widths))

    va = np.fft.ifftn(pad(Fa)).real * P**d
    vb = np.fft.ifftn(pad(Fb)).real * P**d
    prod = np.fft.fftshift(np.fft.fftn(va * vb) / P**d)
    lo = (P - N) // 2
    core = prod[tuple(slice(lo, lo + N + 1) for _ in range(d))].copy()
    for ax in range(d):
        first = np.take(core, [0], axis=ax)
        last = np.take(core, [-1], axis=ax)
        core = np.concatenate([first + last, np.take(core, np.arange(1, N), axis=ax)], axis=ax)
    return np.fft.ifftshift(core) * N**d


def paraproduct_product(f: RealField, g: RealField, tol: float = 1e-6,
                        beta_probe: float = 0.2, dealias: bool = False,
                        j0: int = J0) -> ProductReport:
    """Limit of ``S^j f * S^j g`` as far as the grid resolves it.

    Levels run from ``j0`` to the saturation level; iteration stops once the
    successive difference, measured in ``H^{-beta_probe}`` relative to the
    current product, drops below ``tol``.  Non-convergence is reported in the
    flag, not raised.
    """
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")
    grid = f.grid
    Ff = np.fft.fftn(f.values)
    Fg = np.fft.fftn(g.values)
    weights = _neg_norm_weights(grid, beta_probe)
    j_top = max_level(grid)

    def level(j):
        if j >= j_top:
            a, b = Ff, Fg
        else:
            sym = truncation_symbol(grid, j)
            a, b = Ff * sym, Fg * sym
        if dealias:
            return _padded_product(a, b)
        va = np.fft.ifftn(a).real
        vb = np.fft.ifftn(b).real
        return np.fft.fftn(va * vb)

    def probe(F):
        return float(np.sqrt(np.sum(weights * np.abs(F) ** 2)))

    j = min(j0, j_top)
    prev = level(j)
    tail = 0.0
    converged = j >= j_top
    while j < j_top:
        j += 1
        cur = level(j)
        tail = relative_or_absolute(probe(cur - prev), probe(cur))
        prev = cur
        if tail < tol:
            converged = True
            break
    value = RealField(grid, np.fft.ifftn(prev).real)
    return ProductReport(value, j, tail, converged)


def product_estimate_ratio(f: RealField, g: RealField, delta: float, beta: float,
                           p: float = 2.0, q: float = 4.0, tol: float = 1e-6) -> float:
    """``||fg||_{H_p^{-beta}} / (||f||_{H_p^delta} ||g||_{H_q^{-beta}})``."""
    d = f.grid.d
    if not 0 < beta < delta:
        raise ValueError("product estimate needs 0 < beta < delta")
    if not q > max(p, d / delta):
        raise ValueError(f"product estimate needs q > max(p, d/delta) = {max(p, d / delta)}")
    nf = norm_Hsp(f, SobolevIndex(delta, p))
    ng = norm_Hsp(g, SobolevIndex(-beta, q))
    if nf < 1e-14 or ng < 1e-14:
        raise ValueError("degenerate denominator in the product estimate")
    fg = paraproduct_product(f, g, tol=tol, beta_probe=beta).value
    return norm_Hsp(fg, SobolevIndex(-beta, p)) / (nf * ng)


def transport_product(u: SineCoeffs, Z: RealField, cfg, grad_Z=None) -> tuple:
    """``<grad u, grad Z>`` restricted to D, as sine coefficients.

    ``cfg`` supplies ``beta`` (probe order), ``tol_product`` and optionally
    ``dealias``.  Returns ``(m, report, leakage)`` where ``report`` merges the
    per-component product reports.
    """
    if u.grid != Z.grid:
        raise ValueError("u and Z live on different grids")
    grid = Z.grid
    if grad_Z is None:
        grad_Z = gradient(Z)
    grad_u = sine_gradient(u)
    total = np.zeros(grid.shape)
    j_used, tail, converged = 0, 0.0, True
    for j in range(grid.d):
        rep = paraproduct_product(grad_u[j], grad_Z[j], tol=cfg.tol_product,
                                  beta_probe=cfg.beta, dealias=getattr(cfg, "dealias", False))
        total += rep.value.values
        j_used = max(j_used, rep.j_used)
        tail = max(tail, rep.tail)
        converged = converged and rep.converged
    m_field = RealField(grid, total)
    restricted, leakage = restrict_to_domain(m_field)
    report = ProductReport(m_field, j_used, tail, converged)
    return sine_analysis(restricted), report, leakage
