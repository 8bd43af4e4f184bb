"""c(rho) over several noise realizations.

Some realizations show a plateau at small rho: the maximizing pair is frozen
after the first step, and its ratio does not feel rho while rho * dt is small.

    python3 demos/contraction_realizations.py
"""
import numpy as np

from fractal_transport import noise as nz
from fractal_transport import solver as sv
from fractal_transport.sampling import STREAM_NOISE, derive_seed
from fractal_transport.spectral import Grid, build_cutoff

RHOS = (1.0, 4.0, 16.0, 64.0)


def main(n_roots=10):
    cfg = sv.SolverConfig(grid=Grid(N=256), rho=1.0)
    psi = build_cutoff(cfg.grid)
    for root in range(n_roots):
        B = nz.synthesize_fbm_1d(nz.NoiseSpec(0.9, derive_seed(root, STREAM_NOISE, 0)), cfg.grid)
        c = sv.contraction_values(nz.make_noise_Z(B, psi), cfg, RHOS, 10, root_seed=root)
        strict = bool(np.all(np.diff(c) < 0))
        slope = np.polyfit(np.log(RHOS), np.log(c), 1)[0]
        print(f"root {root}: " + " ".join(f"{v:.5f}" for v in c)
              + f"  {'strict' if strict else 'plateau'}  slope {slope:+.3f}")


if __name__ == "__main__":
    main()
