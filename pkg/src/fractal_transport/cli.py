"""Command-line front end: ``fractal-transport {noise|solve|verify|contraction}``.

Config files hold flat ``key = value`` lines (``#`` starts a comment).  Keys
are the lower-cased field names of the grid, solver and noise parameters,
plus a few study sizes; see ``RunConfig``.  Any key can be overridden from
the environment as ``FT_<KEY>`` (e.g. ``FT_BETA=0.25``).

Exit codes: 0 success, 2 config or parameter-gate violation, 3 Picard
non-convergence, 4 failed bound check.

Seeds: the root ``seed`` fans out through ``derive_seed(seed, stream, i)``;
the noise field uses stream 1 index 0, covariance samples use stream 4
index ``i``, random test fields stream 2 and random paths stream 3.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import platform
import sys
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional, Union

import numpy as np
import scipy

from . import __version__
from . import dirichlet as dr
from . import noise as nz
from . import solver as sv
from .io import read_field, write_field
from .paraproduct import product_estimate_ratio
from .reports import BoundReport, check_below
from .sampling import STREAM_NOISE, STREAM_STUDY, STREAM_TEST_FIELD, derive_seed
from .sobolev import random_field_with_regularity
from .spectral import Grid, GridError, RealField, build_cutoff

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_BOUND = 0, 2, 3, 4
ENV_PREFIX = "FT_"


@dataclass(frozen=True)
class RunConfig:
    # grid
    d: int = 1
    n: int = 256
    l: float = 2.0
    domain_offset: Optional[float] = None
    domain_side: float = 0.5
    cutoff_width: float = 0.25
    # solver
    beta: float = 0.2
    delta: float = 0.3
    gamma: float = 0.2
    q: Optional[float] = None
    sigma2: float = 1.0
    t: float = 0.5
    m_t: int = 64
    rho: Union[float, str] = "auto"
    tol_picard: float = 1e-8
    tol_product: float = 1e-6
    max_iter: int = 30
    u0_kind: str = "interior_bump"
    dealias: bool = False
    # noise
    h: float = 0.9
    seed: int = 0
    kind: str = "fbm1d_exact"
    band: int = 4
    # study sizes
    n_samples: int = 2000
    cov_pairs: str = "0.5:1.0 1.0:1.0"
    n_pairs: int = 10
    rhos: str = "1 4 16 64"
    verify_pairs: int = 20

    def grid(self) -> Grid:
        return Grid(d=self.d, N=self.n, L=self.l, domain_offset=self.domain_offset,
                    domain_side=self.domain_side, cutoff_width=self.cutoff_width)

    def q_value(self) -> float:
        # default noise integrability: 4 in one dimension, 8 in two
        return self.q if self.q is not None else (4.0 if self.d == 1 else 8.0)

    def solver(self, grid: Grid = None) -> sv.SolverConfig:
        return sv.SolverConfig(beta=self.beta, delta=self.delta, gamma=self.gamma,
                               q=self.q_value(), sigma2=self.sigma2, T=self.t, M_t=self.m_t,
                               rho=self.rho, tol_picard=self.tol_picard,
                               tol_product=self.tol_product, max_iter=self.max_iter,
                               grid=grid or self.grid(), u0_kind=self.u0_kind,
                               dealias=self.dealias, seed=self.seed)

    def noise_spec(self) -> nz.NoiseSpec:
        return nz.NoiseSpec(H=self.h, seed=derive_seed(self.seed, STREAM_NOISE, 0),
                            kind=self.kind, band=self.band)

    def rho_list(self) -> list:
        return [float(x) for x in self.rhos.replace(",", " ").split()]

    def pair_list(self) -> list:
        out = []
        for item in self.cov_pairs.replace(",", " ").split():
            x, y = item.split(":")
            out.append((float(x), float(y)))
        return out


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _convert(key: str, text: str):
    text = text.strip()
    if key in ("domain_offset", "q"):
        return None if text.lower() in ("", "none") else float(text)
    if key == "rho":
        return "auto" if text.lower() == "auto" else float(text)
    if key == "dealias":
        return _parse_bool(text)
    kind = {f.name: f.type for f in fields(RunConfig)}[key]
    if kind == "int":
        value = float(text)
        if value != int(value):
            raise ValueError(f"{key} must be an integer")
        return int(value)
    if kind == "float":
        return float(text)
    return text


def parse_config(text: str, env=None) -> RunConfig:
    """Parse ``key = value`` lines, then apply ``FT_*`` environment overrides."""
    known = {f.name for f in fields(RunConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise sv.ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise sv.ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = value
    env = os.environ if env is None else env
    for key in known:
        name = ENV_PREFIX + key.upper()
        if name in env:
            values[key] = env[name]
    try:
        return RunConfig(**{k: _convert(k, v) for k, v in values.items()})
    except ValueError as exc:
        raise sv.ConfigError(str(exc)) from None


def load_config(path, env=None) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"), env)


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path: Path, rows: list, columns: list = None) -> Path:
    if columns is None:
        columns = []
        for r in rows:
            columns.extend(k for k in r if k not in columns)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) if c in r else "" for c in columns])
    return path


def write_reports(path: Path, reports: list) -> Path:
    return write_csv(path, [r.row() for r in reports])


class Run:
    """Collects artifacts and writes the manifest."""

    def __init__(self, command: str, cfg: RunConfig, out: Path):
        self.command = command
        self.cfg = cfg
        self.out = out
        self.out.mkdir(parents=True, exist_ok=True)
        self.artifacts = []
        self.seeds = {"root": cfg.seed}
        self.extra = {}
        self.start = time.perf_counter()

    def add(self, path: Path) -> Path:
        self.artifacts.append(str(Path(path).relative_to(self.out)))
        return path

    def finish(self, code: int) -> dict:
        manifest = {
            "command": self.command,
            "config": asdict(self.cfg),
            "seeds": self.seeds,
            "artifacts": self.artifacts,
            "versions": {"fractal_transport": __version__, "python": platform.python_version(),
                         "numpy": np.__version__, "scipy": scipy.__version__},
            "wallclock_s": time.perf_counter() - self.start,
            "exit_code": code,
        }
        manifest.update(self.extra)
        (self.out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str))
        return manifest


def _noise_field(cfg: RunConfig, grid: Grid, run: Run) -> RealField:
    """``Z = psi B`` from the config (``Z = B`` for the band-limited test kind)."""
    spec = cfg.noise_spec()
    run.seeds["noise"] = spec.seed
    B = nz.synthesize(spec, grid)
    if spec.kind == "smooth_test":
        return B
    return nz.make_noise_Z(B, build_cutoff(grid))


def _solver_noise_gate(cfg: RunConfig):
    if cfg.kind != "smooth_test" and not (0.5 < cfg.h and 1 - cfg.beta < cfg.h):
        raise sv.ConfigError(f"the solver needs 1/2 < H and 1 - beta < H (H={cfg.h}, beta={cfg.beta})")


def _load_or_make_noise(cfg: RunConfig, grid: Grid, noise_path, run: Run) -> RealField:
    if noise_path is None:
        _solver_noise_gate(cfg)
        return _noise_field(cfg, grid, run)
    Z = read_field(noise_path)
    if Z.grid != grid:
        raise sv.ConfigError(f"noise grid {Z.grid} does not match the configured grid {grid}")
    run.extra["noise_file"] = str(noise_path)
    return Z


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_noise(cfg: RunConfig, out: Path, noise_path=None) -> tuple:
    grid = cfg.grid()
    run = Run("noise", cfg, out)
    spec = cfg.noise_spec()
    run.seeds["noise"] = spec.seed
    B = nz.synthesize(spec, grid)
    Z = B if spec.kind == "smooth_test" else nz.make_noise_Z(B, build_cutoff(grid))
    run.add(write_field(out / "B.ftf", B))
    run.add(write_field(out / "Z.ftf", Z))
    if spec.kind != "smooth_test":
        seeds = [derive_seed(cfg.seed, STREAM_STUDY, i) for i in range(cfg.n_samples)]
        run.seeds["covariance"] = f"derive_seed(root, {STREAM_STUDY}, 0..{cfg.n_samples - 1})"
        rows = nz.covariance_study(spec, grid, cfg.pair_list(), cfg.n_samples, seeds)
        cols = ["x", "y", "empirical_cov", "formula_cov", "stderr"]
        run.add(write_csv(out / "covariance.csv", [dict(zip(cols, r)) for r in rows], cols))
    report = nz.sobolev_regularity_report(Z, 1 - cfg.beta, cfg.q_value())
    run.add(write_reports(out / "regularity.csv", [report]))
    run.extra["regularity"] = report.params["verdict"]
    return run, EXIT_OK


def cmd_solve(cfg: RunConfig, out: Path, noise_path=None) -> tuple:
    scfg = cfg.solver()
    run = Run("solve", cfg, out)
    Z = _load_or_make_noise(cfg, scfg.grid, noise_path, run)
    reg = nz.sobolev_regularity_report(Z, 1 - cfg.beta, scfg.q)
    if not reg.passed:
        print(f"warning: noise looks irregular at order {1 - cfg.beta} (drift {reg.measured:.3g})",
              file=sys.stderr)
    u, diag = sv.picard_solve(Z, scfg)
    path_dir = out / "path"
    path_dir.mkdir(exist_ok=True)
    lines = []
    for m, f in enumerate(sv.path_fields(u)):
        name = f"u_{m:05d}.ftf"
        run.add(write_field(path_dir / name, f))
        lines.append(f"{m} {_fmt(u.times[m])} {name}")
    index = path_dir / "index.txt"
    index.write_text("\n".join(lines) + "\n")
    run.add(index)
    run.add(write_csv(out / "diagnostics.csv", diag.rows(),
                      ["iteration", "diff_norm", "ratio", "max_leakage", "wallclock_s"]))
    run.extra.update({"rho": diag.rho, "converged": diag.converged,
                      "iterations": diag.iterations, "regularity": reg.params["verdict"],
                      "product_converged_all": bool(all(diag.product_converged))})
    if not diag.converged:
        print(f"Picard iteration did not converge in {scfg.max_iter} iterations", file=sys.stderr)
        return run, EXIT_NONCONVERGED
    return run, EXIT_OK


def product_reports(cfg: RunConfig, n_pairs: int) -> list:
    """Growth of the max product-estimate ratio from ``N/4`` to ``N``."""
    fine = cfg.grid()
    coarse = fine.with_N(fine.N // 4)
    q = cfg.q_value()
    best = {}
    for g in (coarse, fine):
        vals = []
        for i in range(n_pairs):
            f = random_field_with_regularity(g, cfg.delta + 1,
                                             derive_seed(cfg.seed, STREAM_TEST_FIELD, 2 * i))
            h = random_field_with_regularity(g, -cfg.beta,
                                             derive_seed(cfg.seed, STREAM_TEST_FIELD, 2 * i + 1))
            vals.append(product_estimate_ratio(f, h, cfg.delta, cfg.beta, 2.0, q,
                                               tol=cfg.tol_product))
        best[g.N] = max(vals)
    growth = best[fine.N] / best[coarse.N]
    return [
        BoundReport("product_ratio_max", best[coarse.N], float("nan"),
                    {"N": coarse.N, "d": fine.d, "rule": "informational"}, True),
        BoundReport("product_ratio_max", best[fine.N], float("nan"),
                    {"N": fine.N, "d": fine.d, "rule": "informational"}, True),
        check_below("product_ratio_growth", growth, 1.2, N_coarse=coarse.N, N_fine=fine.N,
                    d=fine.d, pairs=n_pairs),
    ]


def smoothing_reports(cfg: RunConfig, t_grid=None) -> list:
    """Sup over t of the smoothing ratio at ``N/2`` and ``N`` and its drift."""
    if t_grid is None:
        t_grid = np.geomspace(1e-4, 1.0, 25)
    fine = cfg.grid()
    sups = {}
    for g in (fine.with_N(fine.N // 2), fine):
        w = dr.random_sine_coeffs(g, -cfg.beta, derive_seed(cfg.seed, STREAM_TEST_FIELD, 1000),
                                  cfg.sigma2)
        sups[g.N] = max(dr.smoothing_ratio(w, t, cfg.delta, cfg.beta, cfg.sigma2) for t in t_grid)
    a, b = sups.values()
    drift = abs(b - a) / a
    out = [BoundReport("smoothing_ratio_sup", v, float("nan"), {"N": n, "rule": "informational"},
                       bool(np.isfinite(v))) for n, v in sups.items()]
    out.append(check_below("smoothing_ratio_drift", drift, 0.2, N_coarse=fine.N // 2, N_fine=fine.N))
    return out


def holder_defect_reports(cfg: RunConfig, alphas=(0.25, 0.5, 1.0), t_grid=None) -> list:
    """``sup_t ||P_t x - x|| / (t^a ||A^a x||)`` against the constant 1."""
    if t_grid is None:
        t_grid = np.geomspace(1e-6, 1.0, 31)
    g = cfg.grid()
    out = []
    for a in alphas:
        x = dr.random_sine_coeffs(g, 2 * a, derive_seed(cfg.seed, STREAM_TEST_FIELD, 2000),
                                  cfg.sigma2)
        sup = max(dr.holder_defect(x, t, a, cfg.sigma2) for t in t_grid)
        out.append(check_below("holder_defect_sup", sup, 1.0 + 1e-12, alpha=a))
    return out


def semigroup_reports(cfg: RunConfig, t=0.01, s=0.03, alpha=0.7) -> list:
    g = cfg.grid()
    c = dr.random_sine_coeffs(g, 1.0, derive_seed(cfg.seed, STREAM_TEST_FIELD, 3000), cfg.sigma2)
    both = dr.semigroup_apply(dr.semigroup_apply(c, t, cfg.sigma2), s, cfg.sigma2)
    once = dr.semigroup_apply(c, t + s, cfg.sigma2)
    law = np.abs(both.coeffs - once.coeffs).max() / np.abs(once.coeffs).max()
    left = dr.semigroup_apply(dr.fractional_power_apply(c, alpha, cfg.sigma2), t, cfg.sigma2)
    right = dr.fractional_power_apply(dr.semigroup_apply(c, t, cfg.sigma2), alpha, cfg.sigma2)
    comm = np.abs(left.coeffs - right.coeffs).max() / np.abs(right.coeffs).max()
    return [check_below("semigroup_law", law, 1e-12, t=t, s=s),
            check_below("semigroup_commutation", comm, 1e-12, t=t, alpha=alpha)]


def gamma_reports(cfg: RunConfig) -> list:
    out = []
    for theta in (0.3, 0.5, 0.75):
        out.extend(sv.verify_gamma_bounds(theta, cfg.gamma, (1, 10, 100)))
    theta = (1 + cfg.delta + cfg.beta) / 2
    if theta + cfg.gamma < 1 and theta not in (0.3, 0.5, 0.75):
        out.extend(sv.verify_gamma_bounds(theta, cfg.gamma, (1, 10, 100)))
    return out


def cmd_verify(cfg: RunConfig, out: Path, noise_path=None) -> tuple:
    cfg.solver()  # parameter gates before any computation
    run = Run("verify", cfg, out)
    groups = {
        "product_estimate.csv": product_reports(cfg, cfg.verify_pairs),
        "smoothing_ratio.csv": smoothing_reports(cfg),
        "holder_defect.csv": holder_defect_reports(cfg),
        "semigroup_law.csv": semigroup_reports(cfg),
        "gamma_bounds.csv": gamma_reports(cfg),
    }
    failures = []
    for name, reports in groups.items():
        run.add(write_reports(out / name, reports))
        failures.extend(f"{name}:{r.name}" for r in reports if not r.passed)
    run.extra["failures"] = failures
    if failures:
        print("failed bound checks: " + ", ".join(failures), file=sys.stderr)
        return run, EXIT_BOUND
    return run, EXIT_OK


def cmd_contraction(cfg: RunConfig, out: Path, noise_path=None) -> tuple:
    scfg = cfg.solver()
    run = Run("contraction", cfg, out)
    Z = _load_or_make_noise(cfg, scfg.grid, noise_path, run)
    rhos = cfg.rho_list()
    run.seeds["paths"] = f"derive_seed(root, 3, 0..{2 * cfg.n_pairs - 1})"
    reports = sv.contraction_estimate(Z, scfg, rhos, cfg.n_pairs)
    rows = [{"rho": r.params["rho"], "c_rho": r.measured}
            for r in reports if r.name == "contraction_constant"]
    run.add(write_csv(out / "contraction.csv", rows, ["rho", "c_rho"]))
    run.add(write_reports(out / "reports.csv", reports))
    slope = reports[-1]
    run.extra["slope"] = slope.measured
    run.extra["slope_reference"] = slope.reference
    failures = [f"{r.name}@{r.params.get('rho', '')}" for r in reports if not r.passed]
    run.extra["failures"] = failures
    if failures:
        print("failed bound checks: " + ", ".join(failures), file=sys.stderr)
        return run, EXIT_BOUND
    return run, EXIT_OK


COMMANDS = {"noise": cmd_noise, "solve": cmd_solve, "verify": cmd_verify,
            "contraction": cmd_contraction}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fractal-transport", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="flat 'key = value' config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--noise", help="FTF1 noise field Z (solve, contraction)")
    return parser


def run_command(command: str, config_path, out_dir, noise_path=None, env=None) -> int:
    """Run one subcommand; returns the exit code."""
    try:
        cfg = load_config(config_path, env)
        cfg.grid()
        cfg.noise_spec()
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        run, code = COMMANDS[command](cfg, Path(out_dir), noise_path)
    except (sv.ConfigError, GridError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    run.finish(code)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run_command(args.command, args.config, args.out, args.noise)


if __name__ == "__main__":
    sys.exit(main())
