"""Periodic grids, discrete Fourier transforms and Fourier multipliers.

The ambient space is a torus of side ``L`` discretised with ``N`` points per
axis.  The open box ``D`` sits in the middle of the cell with a margin of at
least ``cutoff_width`` on every side, so fields supported near ``D`` never
see the periodic wrap-around.

Transform convention: the forward transform carries the factor ``1/N**d`` and
the inverse carries 1, so the zero-frequency coefficient is the grid mean and

    f(x_j) = sum_k c_k exp(i xi_k . x_j),   xi_k = 2 pi k / L.

Coefficient arrays are kept in numpy FFT order (``0, 1, ..., N/2-1, -N/2,
..., -1`` along each axis).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence, Union

import numpy as np

__all__ = [
    "Grid",
    "RealField",
    "SpectralCoeffs",
    "VectorField",
    "GridError",
    "smooth_step",
    "dft_forward",
    "dft_inverse",
    "apply_multiplier",
    "bessel_potential",
    "gradient",
    "build_cutoff",
    "restrict_to_domain",
    "relative_or_absolute",
    "hermitian_defect",
]

# Denominators below this are considered zero; ratios fall back to the
# absolute numerator.
DENOM_FLOOR = 1e-14
HERMITIAN_TOL = 1e-10


class GridError(ValueError):
    """Raised when a grid violates its geometric invariants."""


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on ``[0, L)^d`` with an embedded box ``D``.

    ``domain_offset`` defaults to the centred position.  Both the offset and
    the side of ``D`` must fall on grid nodes so that the sine basis on ``D``
    shares nodes with the ambient grid.
    """

    d: int = 1
    N: int = 256
    L: float = 2.0
    domain_offset: Union[tuple, None] = None
    domain_side: float = 0.5
    cutoff_width: float = 0.25

    def __post_init__(self):
        if self.d not in (1, 2):
            raise GridError(f"dimension d={self.d} not supported (d must be 1 or 2)")
        N = int(self.N)
        if N != self.N or N < 16 or N & (N - 1):
            raise GridError(f"N={self.N} must be a power of two with N >= 16")
        object.__setattr__(self, "N", N)
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "domain_side", float(self.domain_side))
        object.__setattr__(self, "cutoff_width", float(self.cutoff_width))
        ell, w, L = self.domain_side, self.cutoff_width, self.L
        if not ell > 0:
            raise GridError("domain_side must be positive")
        if not (0 < w <= (L - ell) / 2):
            raise GridError(
                f"cutoff_width={w} must satisfy 0 < w <= (L - domain_side)/2 = {(L - ell) / 2}"
            )
        if self.domain_offset is None:
            offset = ((L - ell) / 2,) * self.d
        else:
            offset = tuple(float(a) for a in np.broadcast_to(self.domain_offset, (self.d,)))
        object.__setattr__(self, "domain_offset", offset)
        for a in offset:
            if not (a - w > 0 and a + ell + w < L):
                raise GridError(
                    "closure of D plus the cutoff margin must lie strictly inside the torus cell"
                )
        h = L / N
        for name, value in [("domain_side", ell)] + [("domain_offset", a) for a in offset]:
            if abs(value / h - round(value / h)) > 1e-9:
                raise GridError(f"{name}={value} is not a multiple of the grid spacing {h}")
        if round(ell / h) < 3:
            raise GridError("D must contain at least two interior nodes per axis")

    # geometry -------------------------------------------------------------
    @property
    def h(self) -> float:
        return self.L / self.N

    @property
    def shape(self) -> tuple:
        return (self.N,) * self.d

    @property
    def cell_volume(self) -> float:
        return self.h ** self.d

    @cached_property
    def axis(self) -> np.ndarray:
        return np.arange(self.N) * self.h

    @cached_property
    def mesh(self) -> tuple:
        return tuple(np.meshgrid(*([self.axis] * self.d), indexing="ij"))

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Integer frequencies ``k`` in FFT order."""
        return np.fft.fftfreq(self.N, d=1.0 / self.N)

    @cached_property
    def freqs(self) -> tuple:
        """Angular frequencies ``xi_j``, one broadcastable array per axis."""
        xi = 2 * np.pi * self.wavenumbers / self.L
        out = []
        for j in range(self.d):
            shape = [1] * self.d
            shape[j] = self.N
            out.append(xi.reshape(shape))
        return tuple(out)

    @cached_property
    def xi_sq(self) -> np.ndarray:
        return sum(np.broadcast_to(x**2, self.shape) for x in self.freqs)

    @property
    def xi_max(self) -> float:
        """Largest ``|xi|`` represented on the grid."""
        return float(np.sqrt(self.xi_sq.max()))

    @property
    def n_interior(self) -> int:
        """Number ``M`` of interior nodes of ``D`` per axis."""
        return int(round(self.N * self.domain_side / self.L)) - 1

    @cached_property
    def domain_index(self) -> tuple:
        """First node index of the closed box along each axis."""
        return tuple(int(round(a / self.h)) for a in self.domain_offset)

    @cached_property
    def closure_slices(self) -> tuple:
        """Slices selecting the nodes of the closed box ``D-bar``."""
        M = self.n_interior
        return tuple(slice(i, i + M + 2) for i in self.domain_index)

    @cached_property
    def interior_slices(self) -> tuple:
        M = self.n_interior
        return tuple(slice(i + 1, i + M + 1) for i in self.domain_index)

    @cached_property
    def domain_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        mask[self.closure_slices] = True
        return mask

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.d, self.N * factor, self.L, self.domain_offset,
                    self.domain_side, self.cutoff_width)

    def with_N(self, N: int) -> "Grid":
        return Grid(self.d, N, self.L, self.domain_offset, self.domain_side, self.cutoff_width)


@dataclass(frozen=True, eq=False)
class RealField:
    """Real grid function on the torus."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid shape {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, grid: Grid) -> "RealField":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable) -> "RealField":
        return cls(grid, fn(*grid.mesh))

    def _other(self, other):
        if isinstance(other, RealField):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return RealField(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return RealField(self.grid, self.values - self._other(other))

    def __mul__(self, other):
        return RealField(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __neg__(self):
        return RealField(self.grid, -self.values)

    def l2_norm(self) -> float:
        """Continuum-scaled grid L2 norm."""
        return float(np.sqrt(np.sum(self.values**2) * self.grid.cell_volume))


@dataclass(frozen=True, eq=False)
class SpectralCoeffs:
    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != self.grid.shape:
            raise ValueError("coefficient array does not match grid shape")
        object.__setattr__(self, "coeffs", c)


@dataclass(frozen=True, eq=False)
class VectorField:
    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("a vector field needs at least one component")
        g = comps[0].grid
        if any(c.grid != g for c in comps):
            raise ValueError("all components must share one grid")
        object.__setattr__(self, "components", comps)

    @property
    def grid(self) -> Grid:
        return self.components[0].grid

    def __getitem__(self, j) -> RealField:
        return self.components[j]

    def __len__(self):
        return len(self.components)


# ---------------------------------------------------------------------------
# transforms and multipliers
# ---------------------------------------------------------------------------

def relative_or_absolute(num: float, den: float) -> float:
    """``num/den``, or ``num`` itself when ``den`` is below the floor."""
    return num / den if den >= DENOM_FLOOR else num


def hermitian_defect(c: np.ndarray) -> float:
    """Relative size of the anti-Hermitian part of a coefficient array."""
    flipped = np.conj(c[tuple(np.s_[::-1] for _ in range(c.ndim))])
    flipped = np.roll(flipped, 1, axis=tuple(range(c.ndim)))
    scale = np.abs(c).max() if c.size else 0.0
    return relative_or_absolute(float(np.abs(c - flipped).max()), float(scale))


def dft_forward(f: RealField) -> SpectralCoeffs:
    return SpectralCoeffs(f.grid, np.fft.fftn(f.values) / f.values.size)


def dft_inverse(c: SpectralCoeffs) -> RealField:
    defect = hermitian_defect(c.coeffs)
    if defect > HERMITIAN_TOL:
        raise ValueError(f"coefficients are not Hermitian (defect {defect:.3e})")
    values = np.fft.ifftn(c.coeffs).real * c.coeffs.size
    return RealField(c.grid, values)


Symbol = Union[Callable[..., np.ndarray], np.ndarray, complex, float]


def _evaluate_symbol(grid: Grid, symbol: Symbol) -> np.ndarray:
    if callable(symbol):
        values = symbol(*grid.freqs)
    else:
        values = symbol
    values = np.broadcast_to(np.asarray(values), grid.shape)
    if not np.all(np.isfinite(values)):
        raise ValueError("multiplier symbol is not finite at every discrete frequency")
    return values


def apply_multiplier(c: SpectralCoeffs, symbol: Symbol) -> SpectralCoeffs:
    """Multiply coefficients by ``symbol(xi_1, ..., xi_d)``.

    ``symbol`` may be a callable receiving the broadcastable frequency
    arrays, or a precomputed array/scalar.
    """
    return SpectralCoeffs(c.grid, c.coeffs * _evaluate_symbol(c.grid, symbol))


def bessel_symbol(grid: Grid, s: float) -> np.ndarray:
    return (1.0 + grid.xi_sq) ** (s / 2)


def bessel_potential(f: RealField, s: float) -> RealField:
    """Apply ``J^s = ((1 + |xi|^2)^{s/2} f-hat)^vee``."""
    if s == 0:
        return f
    c = apply_multiplier(dft_forward(f), bessel_symbol(f.grid, s))
    return dft_inverse(c)


def derivative_symbol(grid: Grid, j: int) -> np.ndarray:
    """``i xi_j`` with the Nyquist plane set to zero."""
    xi = np.array(grid.freqs[j], dtype=complex)
    k = grid.wavenumbers.reshape(xi.shape)
    xi[k == -grid.N // 2] = 0.0
    return 1j * xi


def gradient(f: RealField) -> VectorField:
    c = dft_forward(f)
    return VectorField(tuple(
        dft_inverse(apply_multiplier(c, derivative_symbol(f.grid, j)))
        for j in range(f.grid.d)
    ))


# ---------------------------------------------------------------------------
# cutoff and support
# ---------------------------------------------------------------------------

def _exp_tail(x):
    out = np.zeros_like(x, dtype=float)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def smooth_step(x) -> np.ndarray:
    """C-infinity step: 0 for ``x <= 0``, 1 for ``x >= 1``."""
    x = np.asarray(x, dtype=float)
    a = _exp_tail(x)
    b = _exp_tail(1.0 - x)
    return a / (a + b)


def build_cutoff(g: Grid) -> RealField:
    """Smooth cutoff ``psi``: 1 on the closed box, 0 beyond distance ``w``.

    The profile is evaluated pointwise from the coordinates, so values on
    nodes shared by two resolutions agree exactly.
    """
    w = g.cutoff_width
    psi = np.ones(g.shape)
    for j, x in enumerate(g.mesh):
        a = g.domain_offset[j]
        b = a + g.domain_side
        dist = np.maximum(np.maximum(a - x, x - b), 0.0)
        # snap nodes that sit on the box faces up to round-off
        dist[dist < 1e-12 * g.L] = 0.0
        psi = psi * smooth_step(1.0 - dist / w)
    return RealField(g, psi)


def restrict_to_domain(f: RealField) -> tuple:
    """Zero ``f`` outside the closed box.

    Returns ``(restricted, leakage)`` where leakage is the L2 norm of the
    removed part relative to the L2 norm of ``f`` (absolute if ``f`` is
    numerically zero).
    """
    mask = f.grid.domain_mask
    out = RealField(f.grid, np.where(mask, f.values, 0.0))
    removed = np.sqrt(np.sum(f.values[~mask] ** 2) * f.grid.cell_volume)
    leakage = relative_or_absolute(float(removed), f.l2_norm())
    return out, leakage
