"""Seeded Gaussian coefficient streams shared by the random generators.

Coefficients are drawn in an order that does not depend on the resolution:
frequencies are visited ring by ring (``max_j |k_j|``), lexicographically
inside a ring.  Two grids with the same ``L`` and seed therefore share all
low-frequency draws, which is what makes refinement studies meaningful.

Seed fan-out: every random stream used by the package is seeded with
``derive_seed(root, stream, index)``, i.e. the first word of
``numpy.random.SeedSequence([root, stream, index])``.  One root seed fixes a
whole study.
"""
from __future__ import annotations

import numpy as np

from .spectral import Grid

# stream identifiers for derive_seed
STREAM_NOISE = 1
STREAM_TEST_FIELD = 2
STREAM_PATHS = 3
STREAM_STUDY = 4


def derive_seed(root: int, stream: int = 0, index: int = 0) -> int:
    ss = np.random.SeedSequence([int(root) & 0xFFFFFFFF, int(stream), int(index)])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def nested_order(grid: Grid) -> np.ndarray:
    """Flat indices of the grid frequencies in the canonical draw order."""
    k = np.meshgrid(*([grid.wavenumbers.astype(int)] * grid.d), indexing="ij")
    k = [a.ravel() for a in k]
    ring = np.max(np.abs(np.stack(k)), axis=0)
    # lexsort uses the last key as primary
    return np.lexsort(tuple(reversed(k)) + (ring,))


def flip(c: np.ndarray) -> np.ndarray:
    """``c[-k]`` for an FFT-ordered array."""
    out = c[tuple(np.s_[::-1] for _ in range(c.ndim))]
    return np.roll(out, 1, axis=tuple(range(c.ndim)))


def hermitian_normals(grid: Grid, seed: int) -> np.ndarray:
    """Hermitian complex Gaussian array with ``E|w_k|^2 = 1`` for every k.

    Self-conjugate frequencies (zero and Nyquist) get real standard normals.
    """
    rng = np.random.default_rng(seed)
    draws = rng.standard_normal((grid.N**grid.d, 2))
    z = np.empty(grid.N**grid.d, dtype=complex)
    z[nested_order(grid)] = (draws[:, 0] + 1j * draws[:, 1]) / np.sqrt(2)
    z = z.reshape(grid.shape)
    return (z + np.conj(flip(z))) / np.sqrt(2)
