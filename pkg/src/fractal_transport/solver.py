"""Mild solutions of the transport equation driven by a rough potential.

The unknown is a path of sine coefficients on D sampled at ``t_m = m dt``.
The mild form is

    u(t) = P_t u0 + I_t(u),   I_t(u) = int_0^t P_{t-r} <grad u(r), grad Z> dr,

and Picard iteration in the weighted Holder norm

    ||f||^(rho) = sup_t e^{-rho t} (||f(t)|| + sup_{s<t} ||f(t)-f(s)|| / (t-s)^gamma)

(space norm: eigen-norm of order ``1 + delta``) converges to its unique
fixed point once ``rho`` is large enough.

Time integration of ``I`` is product integration: the transport term is
interpolated linearly between nodes and the kernel ``exp(-mu (t - r))`` is
integrated exactly on every subinterval, mode by mode.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np
from scipy import integrate, special
from scipy.interpolate import CubicSpline

from .dirichlet import (
    SineCoeffs,
    eigenvalues,
    sine_analysis,
    sine_gradient,
    sine_synthesis,
)
from .paraproduct import transport_product
from .reports import BoundReport, check_within
from .sampling import STREAM_PATHS, derive_seed
from .spectral import Grid, RealField, gradient, restrict_to_domain

U0_KINDS = ("interior_bump", "eigenmode_smooth")
SERIES_THRESHOLD = 0.5
AUTO_RHO_TARGET = 0.5
AUTO_RHO_CAP = 256.0


class ConfigError(ValueError):
    """A solver parameter violates one of the well-posedness inequalities."""


@dataclass(frozen=True)
class SolverConfig:
    beta: float = 0.2
    delta: float = 0.3
    gamma: float = 0.2
    q: float = 4.0
    sigma2: float = 1.0
    T: float = 0.5
    M_t: int = 64
    rho: Union[float, str] = "auto"
    tol_picard: float = 1e-8
    tol_product: float = 1e-6
    max_iter: int = 30
    grid: Grid = field(default_factory=Grid)
    u0_kind: str = "interior_bump"
    dealias: bool = False
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self):
        b, dl, g = self.beta, self.delta, self.gamma
        if not 0 < b < dl < 0.5:
            raise ConfigError(f"need 0 < beta < delta < 1/2 (beta={b}, delta={dl})")
        if not 0 < 2 * g < 1 - b - dl:
            raise ConfigError(
                f"need 0 < 2 gamma < 1 - beta - delta (2 gamma={2 * g}, 1 - beta - delta={1 - b - dl})")
        d = self.grid.d
        if not self.q > max(2.0, d / dl):
            raise ConfigError(f"need q > max(2, d/delta) = {max(2.0, d / dl)} (q={self.q})")
        if isinstance(self.rho, str):
            if self.rho != "auto":
                raise ConfigError(f"rho must be a number >= 1 or 'auto' (got {self.rho!r})")
        elif not self.rho >= 1:
            raise ConfigError(f"need rho >= 1 (rho={self.rho})")
        if not self.sigma2 > 0:
            raise ConfigError("sigma2 must be positive")
        if not self.T > 0:
            raise ConfigError("T must be positive")
        if int(self.M_t) != self.M_t or self.M_t < 1:
            raise ConfigError("M_t must be a positive integer")
        if not (self.tol_picard > 0 and self.tol_product > 0):
            raise ConfigError("tolerances must be positive")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ConfigError("max_iter must be a positive integer")
        if self.u0_kind not in U0_KINDS:
            raise ConfigError(f"u0_kind must be one of {U0_KINDS}")
        if self.u0_kind == "eigenmode_smooth" and not 1 + dl + 2 * g < 1.5:
            raise ConfigError(
                "eigenmode_smooth initial data lies in the zero-extension space only below "
                f"order 3/2, but 1 + delta + 2 gamma = {1 + dl + 2 * g}")

    @property
    def dt(self) -> float:
        return self.T / self.M_t

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.M_t + 1) * self.dt

    @property
    def order(self) -> float:
        """Space order ``1 + delta`` of the solution norm."""
        return 1.0 + self.delta


# ---------------------------------------------------------------------------
# paths and norms
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TimePath:
    """Sine coefficients at uniform time nodes; ``states[m]`` is flat per node."""

    grid: Grid
    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        s = np.asarray(self.states, dtype=float)
        n_modes = self.grid.n_interior ** self.grid.d
        if t.ndim != 1 or len(t) < 2 or t[0] != 0 or np.any(np.diff(t) <= 0):
            raise ValueError("times must increase strictly from 0")
        if s.shape != (len(t), n_modes):
            raise ValueError(f"states must have shape {(len(t), n_modes)}, got {s.shape}")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", s)

    @classmethod
    def zeros(cls, grid: Grid, times) -> "TimePath":
        return cls(grid, times, np.zeros((len(times), grid.n_interior ** grid.d)))

    @classmethod
    def from_coeffs(cls, times, coeffs: list) -> "TimePath":
        grid = coeffs[0].grid
        return cls(grid, times, np.stack([c.coeffs.ravel() for c in coeffs]))

    def __len__(self):
        return len(self.times)

    def __getitem__(self, m) -> SineCoeffs:
        shape = (self.grid.n_interior,) * self.grid.d
        return SineCoeffs(self.grid, self.states[m].reshape(shape))

    def _other(self, other):
        if isinstance(other, TimePath):
            if other.grid != self.grid or not np.array_equal(other.times, self.times):
                raise ValueError("paths live on different grids or time nodes")
            return other.states
        return other

    def __add__(self, other):
        return TimePath(self.grid, self.times, self.states + self._other(other))

    def __sub__(self, other):
        return TimePath(self.grid, self.times, self.states - self._other(other))

    def __mul__(self, a):
        return TimePath(self.grid, self.times, self.states * a)

    __rmul__ = __mul__


def _weighted_states(p: TimePath, s: float, sigma2: float) -> np.ndarray:
    w = np.sqrt((1 + sigma2 * eigenvalues(p.grid)) ** s).ravel()
    return p.states * w


def holder_parts(p: TimePath, gamma: float, s: float, sigma2: float = 1.0) -> tuple:
    """Per-node space norms and Holder quotients ``max_{j<m} ||u_m - u_j|| / (t_m - t_j)^gamma``."""
    from scipy.spatial.distance import cdist

    W = _weighted_states(p, s, sigma2)
    norms = np.linalg.norm(W, axis=1)
    dist = cdist(W, W)
    t = p.times
    gap = t[:, None] - t[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        quot = np.where(gap > 0, dist / np.where(gap > 0, gap, 1.0) ** gamma, 0.0)
    return norms, quot.max(axis=1)


def weighted_holder_norm(p: TimePath, rho: float, gamma: float, s: float,
                         sigma2: float = 1.0) -> float:
    """``sup_m e^{-rho t_m} (||u_m||_s + max_{j<m} ||u_m-u_j||_s / (t_m-t_j)^gamma)``.

    Exact discrete sup over all node pairs; ``rho = 0`` is the plain norm.
    """
    if rho < 0:
        raise ValueError("rho must be non-negative")
    norms, quot = holder_parts(p, gamma, s, sigma2)
    return float(np.max(np.exp(-rho * p.times) * (norms + quot)))


def path_norm(p: TimePath, cfg: SolverConfig, rho: float) -> float:
    return weighted_holder_norm(p, rho, cfg.gamma, cfg.order, cfg.sigma2)


# ---------------------------------------------------------------------------
# initial data and the initial term
# ---------------------------------------------------------------------------

def interior_bump(grid: Grid, radius_fraction: float = 0.4) -> SineCoeffs:
    """Smooth bump ``e * exp(-1/(1-r^2))`` centred in D, support radius ``0.4 l``."""
    centre = np.asarray(grid.domain_offset) + grid.domain_side / 2
    radius = radius_fraction * grid.domain_side
    r2 = sum(((grid.mesh[j] - centre[j]) / radius) ** 2 for j in range(grid.d))
    vals = np.zeros(grid.shape)
    inside = r2 < 1
    vals[inside] = np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
    return sine_analysis(RealField(grid, vals))


def initial_data(cfg: SolverConfig) -> SineCoeffs:
    if cfg.u0_kind == "interior_bump":
        return interior_bump(cfg.grid)
    c = np.zeros((cfg.grid.n_interior,) * cfg.grid.d)
    c[(0,) * cfg.grid.d] = 1.0
    return SineCoeffs(cfg.grid, c)


def initial_term(u0: SineCoeffs, cfg: SolverConfig) -> TimePath:
    """``P_{t_m} u0`` at every node."""
    if u0.grid != cfg.grid:
        raise ValueError("u0 does not live on the configured grid")
    rates = cfg.sigma2 * eigenvalues(cfg.grid).ravel()
    states = np.exp(-np.outer(cfg.times, rates)) * u0.coeffs.ravel()
    return TimePath(cfg.grid, cfg.times, states)


# ---------------------------------------------------------------------------
# the integral operator
# ---------------------------------------------------------------------------

def _series_phi1(z):
    return sum((-z) ** n / special.factorial(n + 1) for n in range(20))


def _series_phi2(z):
    return sum((-1) ** n * (n + 1) * z**n / special.factorial(n + 2) for n in range(20))


def product_weights(rates: np.ndarray, dt: float) -> tuple:
    """Exact weights of ``int_0^dt exp(-mu (dt - s)) l(s) ds`` for linear ``l``.

    Returns ``(decay, w_old, w_new)`` such that the integral equals
    ``w_old * l(0) + w_new * l(dt)``; ``decay = exp(-mu dt)``.
    """
    z = np.asarray(rates, dtype=float) * dt
    small = z < SERIES_THRESHOLD
    zs = np.where(small, 1.0, z)
    phi1 = np.where(small, _series_phi1(z), -np.expm1(-zs) / zs)
    phi2 = np.where(small, _series_phi2(z), (1 - (1 + zs) * np.exp(-zs)) / zs**2)
    w_old = dt * phi2
    w_new = dt * (phi1 - phi2)
    return np.exp(-z), w_old, w_new


def convolve_in_time(m_states: np.ndarray, rates: np.ndarray, dt: float) -> np.ndarray:
    """``int_0^{t_m} exp(-mu (t_m - r)) m(r) dr`` with ``m`` piecewise linear."""
    decay, w_old, w_new = product_weights(rates, dt)
    out = np.zeros_like(m_states)
    for j in range(len(m_states) - 1):
        out[j + 1] = decay * out[j] + w_old * m_states[j] + w_new * m_states[j + 1]
    return out


@dataclass
class ProductLog:
    leakage: list = field(default_factory=list)
    converged: list = field(default_factory=list)
    levels: list = field(default_factory=list)


def transport_states(p: TimePath, Z: RealField, cfg: SolverConfig, grad_Z=None,
                     log: ProductLog = None) -> np.ndarray:
    """``<grad u(t_m), grad Z>`` restricted to D, as sine coefficients per node."""
    if grad_Z is None:
        grad_Z = gradient(Z)
    out = np.empty_like(p.states)
    for m in range(len(p)):
        if not np.any(p.states[m]):
            out[m] = 0.0
            continue
        coeffs, rep, leak = transport_product(p[m], Z, cfg, grad_Z)
        out[m] = coeffs.coeffs.ravel()
        if log is not None:
            log.leakage.append(leak)
            log.converged.append(rep.converged)
            log.levels.append(rep.j_used)
    return out


def integral_operator(p: TimePath, Z: RealField, cfg: SolverConfig, grad_Z=None,
                      log: ProductLog = None) -> TimePath:
    """``I_{t_m}(u)`` by product integration; the output starts at zero."""
    if p.grid != Z.grid or Z.grid != cfg.grid:
        raise ValueError("path, noise and config must share one grid")
    m_states = transport_states(p, Z, cfg, grad_Z, log)
    rates = cfg.sigma2 * eigenvalues(cfg.grid).ravel()
    return TimePath(p.grid, p.times, convolve_in_time(m_states, rates, p.times[1] - p.times[0]))


# ---------------------------------------------------------------------------
# random test paths and the contraction constant
# ---------------------------------------------------------------------------

def random_path(cfg: SolverConfig, seed: int, variation: float = 1.0, n_knots: int = 6,
                eps: float = 0.05) -> TimePath:
    """Eigenmode expansion ``a_k(t) = sd_k (g_k + variation * s_k(t))``.

    ``s_k`` is a cubic spline through Gaussian knot values and
    ``sd_k = (1 + sigma2 lambda_k)^{-(1+delta)/2 - d/4 - eps}``, so the path
    has finite ``||.||_{gamma, 1+delta}`` norm at every resolution.
    ``variation = 0`` gives a path constant in time.
    """
    grid = cfg.grid
    rng = np.random.default_rng(seed)
    lam = eigenvalues(grid).ravel()
    sd = (1 + cfg.sigma2 * lam) ** (-(cfg.order / 2 + grid.d / 4 + eps))
    base = rng.standard_normal(lam.size)
    knots = np.linspace(0.0, cfg.T, n_knots)
    values = rng.standard_normal((n_knots, lam.size))
    spline = CubicSpline(knots, values, axis=0)(cfg.times)
    return TimePath(grid, cfg.times, sd * (base + variation * spline))


def pair_variation(i: int, n_pairs: int) -> float:
    """Time-variation amplitude of pair ``i``: evenly spread over [0, 1]."""
    return i / (n_pairs - 1) if n_pairs > 1 else 0.0


def _log_slope(rhos, values) -> float:
    rhos, values = np.asarray(rhos, float), np.asarray(values, float)
    if len(rhos) < 2 or np.any(values <= 0):
        return float("nan")
    return float(np.polyfit(np.log(rhos), np.log(values), 1)[0])


def theoretical_slope(cfg: SolverConfig) -> float:
    """Slower-decaying exponent ``(delta + beta + 2 gamma - 1)/2`` of ``c(rho)``."""
    return (cfg.delta + cfg.beta + 2 * cfg.gamma - 1) / 2


def stop_nodes(M_t: int) -> list:
    """Stopping nodes ``1, 2, 4, ..., M_t`` used to localise test paths in time."""
    out, m = [], 1
    while m < M_t:
        out.append(m)
        m *= 2
    return out + [M_t]


def stopped(p: TimePath, m: int) -> TimePath:
    """``u(min(t, t_m))``: the path frozen after node ``m``."""
    idx = np.minimum(np.arange(len(p)), m)
    return TimePath(p.grid, p.times, p.states[idx])


def contraction_values(Z: RealField, cfg: SolverConfig, rhos, n_pairs: int = 10,
                       root_seed: int = None) -> np.ndarray:
    """``c(rho)``: max over random pairs of ``||I(u)-I(v)||^(rho) / ||u-v||^(rho)``.

    Pair ``i`` uses time variation ``pair_variation(i, n_pairs)``, so the pool
    holds paths whose norm is carried by the sup part as well as paths whose
    norm is carried by the Holder part.  Every pair also enters frozen after
    each node of ``stop_nodes(M_t)``.  Freezing never raises a Holder
    quotient and, by causality, leaves ``I`` unchanged up to the stopping
    time, so the pool holds paths concentrated at early times, which are the
    near-extremal ones for large ``rho``.
    """
    rhos = list(rhos)
    if any(r < 1 for r in rhos):
        raise ValueError("rho values must be >= 1")
    root = cfg.seed if root_seed is None else root_seed
    grad_Z = gradient(Z)
    stops = stop_nodes(cfg.M_t)
    best = np.zeros(len(rhos))
    for i in range(n_pairs):
        var = pair_variation(i, n_pairs)
        u = random_path(cfg, derive_seed(root, STREAM_PATHS, 2 * i), var)
        v = random_path(cfg, derive_seed(root, STREAM_PATHS, 2 * i + 1), var)
        for m in stops:
            ue, ve = stopped(u, m), stopped(v, m)
            diff_in = ue - ve
            diff_out = (integral_operator(ue, Z, cfg, grad_Z)
                        - integral_operator(ve, Z, cfg, grad_Z))
            for a, rho in enumerate(rhos):
                den = path_norm(diff_in, cfg, rho)
                if den < 1e-14:
                    continue
                best[a] = max(best[a], path_norm(diff_out, cfg, rho) / den)
    return best


def contraction_estimate(Z: RealField, cfg: SolverConfig, rhos=(1, 4, 16, 64),
                         n_pairs: int = 10, root_seed: int = None) -> list:
    """Per-rho reports (strict decrease) followed by the fitted log-log slope."""
    if n_pairs < 1:
        raise ValueError("n_pairs must be positive")
    rhos = sorted(float(r) for r in rhos)
    c = contraction_values(Z, cfg, rhos, n_pairs, root_seed)
    reports = []
    prev = float("inf")
    for rho, val in zip(rhos, c):
        reports.append(BoundReport("contraction_constant", float(val), prev,
                                   {"rho": rho, "n_pairs": n_pairs, "rule": "measured < reference"},
                                   bool(val < prev)))
        prev = float(val)
    slope = _log_slope(rhos, c)
    reports.append(check_within("contraction_slope", slope, theoretical_slope(cfg), 0.15,
                                rhos=" ".join(f"{r:g}" for r in rhos)))
    return reports


def choose_rho(Z: RealField, cfg: SolverConfig, grad_Z=None) -> tuple:
    """Double rho from 1 until a single random pair contracts below 1/2 (cap 256)."""
    if grad_Z is None:
        grad_Z = gradient(Z)
    u = random_path(cfg, derive_seed(cfg.seed, STREAM_PATHS, 10_000))
    v = random_path(cfg, derive_seed(cfg.seed, STREAM_PATHS, 10_001))
    diff_in = u - v
    diff_out = integral_operator(u, Z, cfg, grad_Z) - integral_operator(v, Z, cfg, grad_Z)
    rho = 1.0
    while True:
        ratio = path_norm(diff_out, cfg, rho) / path_norm(diff_in, cfg, rho)
        if ratio < AUTO_RHO_TARGET or rho >= AUTO_RHO_CAP:
            return rho, ratio
        rho *= 2


# ---------------------------------------------------------------------------
# Picard iteration
# ---------------------------------------------------------------------------

@dataclass
class SolveDiagnostics:
    rho: float
    converged: bool
    diffs: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    leakage: list = field(default_factory=list)
    product_converged: list = field(default_factory=list)
    wallclock: list = field(default_factory=list)
    auto_ratio: float = float("nan")

    @property
    def iterations(self) -> int:
        return len(self.diffs)

    def rows(self) -> list:
        out = []
        for n, d in enumerate(self.diffs):
            out.append({"iteration": n + 1, "diff_norm": d,
                        "ratio": self.ratios[n], "max_leakage": self.leakage[n],
                        "wallclock_s": self.wallclock[n]})
        return out


def picard_solve(Z: RealField, cfg: SolverConfig, u0: SineCoeffs = None,
                 start: str = "initial_term") -> tuple:
    """Fixed point of ``u = P u0 + I(u)`` by Picard iteration.

    ``start`` picks the first iterate: ``"initial_term"``, ``"zero"`` or a
    ``TimePath``.
    Returns ``(path, diagnostics)``; non-convergence sets
    ``diagnostics.converged = False`` instead of raising.
    """
    if Z.grid != cfg.grid:
        raise ValueError("noise and config must share one grid")
    if u0 is None:
        u0 = initial_data(cfg)
    grad_Z = gradient(Z)
    t0 = time.perf_counter()
    if cfg.rho == "auto":
        rho, auto_ratio = choose_rho(Z, cfg, grad_Z)
    else:
        rho, auto_ratio = float(cfg.rho), float("nan")
    base = initial_term(u0, cfg)
    if isinstance(start, TimePath):
        u = start
    elif start == "initial_term":
        u = base
    elif start == "zero":
        u = TimePath.zeros(cfg.grid, cfg.times)
    else:
        raise ValueError("start must be 'initial_term' or 'zero'")
    diag = SolveDiagnostics(rho=rho, converged=False, auto_ratio=auto_ratio)
    for _ in range(cfg.max_iter):
        log = ProductLog()
        nxt = base + integral_operator(u, Z, cfg, grad_Z, log)
        diff = path_norm(nxt - u, cfg, rho)
        prev = diag.diffs[-1] if diag.diffs else float("nan")
        diag.diffs.append(diff)
        diag.ratios.append(diff / prev if prev > 0 else float("nan"))
        diag.leakage.append(max(log.leakage, default=0.0))
        diag.product_converged.append(all(log.converged))
        diag.wallclock.append(time.perf_counter() - t0)
        u = nxt
        if diff < cfg.tol_picard:
            diag.converged = True
            break
    return u, diag


def fixed_point_residual(u: TimePath, Z: RealField, cfg: SolverConfig, rho: float,
                         u0: SineCoeffs = None) -> float:
    if u0 is None:
        u0 = initial_data(cfg)
    return path_norm(u - (initial_term(u0, cfg) + integral_operator(u, Z, cfg)), cfg, rho)


# ---------------------------------------------------------------------------
# singular integral bounds
# ---------------------------------------------------------------------------

def laplace_power_integral(theta: float, rho: float, s: float, t: float) -> float:
    """``int_s^t e^{-rho r} r^{-theta} dr`` after ``r = v^{1/(1-theta)}``."""
    a = 1.0 / (1.0 - theta)
    val, _ = integrate.quad(lambda v: a * np.exp(-rho * v**a), s ** (1 - theta), t ** (1 - theta),
                            epsabs=1e-13, epsrel=1e-12, limit=200)
    return float(val)


def laplace_power_closed_form(theta: float, rho: float, s: float, t: float) -> float:
    g = special.gamma(1 - theta) * rho ** (theta - 1)
    return float(g * (special.gammainc(1 - theta, rho * t) - special.gammainc(1 - theta, rho * s)))


def convolution_power_integral(theta: float, gamma: float, rho: float, t: float) -> float:
    """``int_0^t e^{-rho(t-r)} (t-r)^{-theta} r^{-gamma} dr``.

    Split at ``t/2``; ``r = v^{1/(1-gamma)}`` on the left half and
    ``t - r = v^{1/(1-theta)}`` on the right half remove both endpoint
    singularities.
    """
    half = t / 2
    a = 1.0 / (1.0 - gamma)
    b = 1.0 / (1.0 - theta)

    def left(v):
        r = v**a
        return a * np.exp(-rho * (t - r)) * (t - r) ** (-theta)

    def right(v):
        s = v**b
        return b * np.exp(-rho * s) * (t - s) ** (-gamma)

    kw = dict(epsabs=0.0, epsrel=1e-11, limit=200)
    lv, _ = integrate.quad(left, 0.0, half ** (1 - gamma), **kw)
    rv, _ = integrate.quad(right, 0.0, half ** (1 - theta), **kw)
    return float(lv + rv)


def verify_gamma_bounds(theta: float, gamma: float, rhos=(1, 10, 100), t_grid=None,
                        interval=(0.0, 10.0), drift_tol: float = 0.10) -> list:
    """Check the Laplace-type bound and the stability of the convolution constant.

    For each ``rho`` one report compares ``int_s^t e^{-rho r} r^{-theta} dr``
    with ``Gamma(1-theta) rho^{theta-1}`` (``params["quad_error"]`` is the
    deviation from the incomplete-gamma closed form) and one report gives the
    fitted ``C(rho) = sup_t J(t) / rho^{theta+gamma-1}``.  A final report
    measures the relative spread of ``C`` across ``rho``.
    """
    if not 0 <= theta < 1:
        raise ValueError("need 0 <= theta < 1")
    if not 0 <= gamma < 1 or not theta + gamma < 1:
        raise ValueError("need 0 <= gamma and theta + gamma < 1")
    if t_grid is None:
        t_grid = np.geomspace(1e-4, 10.0, 161)
    s, t = interval
    reports, consts = [], []
    for rho in rhos:
        if rho <= 0:
            raise ValueError("rho must be positive")
        val = laplace_power_integral(theta, rho, s, t)
        err = abs(val - laplace_power_closed_form(theta, rho, s, t))
        bound = special.gamma(1 - theta) * rho ** (theta - 1)
        ok = val <= bound + 1e-6 and err <= 1e-6
        reports.append(BoundReport("laplace_power_bound", val, float(bound),
                                   {"theta": theta, "rho": rho, "s": s, "t": t, "quad_error": err,
                                    "rule": "measured <= reference and quad_error <= 1e-6"}, bool(ok)))
        J = np.array([convolution_power_integral(theta, gamma, rho, tt) for tt in t_grid])
        C = float(np.max(J) / rho ** (theta + gamma - 1))
        consts.append(C)
        reports.append(BoundReport("convolution_constant", C, float("nan"),
                                   {"theta": theta, "gamma": gamma, "rho": rho,
                                    "t_argmax": float(t_grid[np.argmax(J)]), "rule": "finite"},
                                   bool(np.isfinite(C))))
    drift = (max(consts) - min(consts)) / min(consts)
    reports.append(BoundReport("convolution_constant_drift", float(drift), drift_tol,
                               {"theta": theta, "gamma": gamma, "rule": "measured < reference"},
                               bool(drift < drift_tol)))
    return reports


# ---------------------------------------------------------------------------
# classical reference stepper
# ---------------------------------------------------------------------------

def classical_drift(c: np.ndarray, grad_Z: tuple, grid: Grid) -> np.ndarray:
    """Pointwise ``grad u . grad Z`` on the closed box, projected on the sine basis."""
    u = SineCoeffs(grid, c.reshape((grid.n_interior,) * grid.d))
    gu = sine_gradient(u)
    prod = sum(gu[j].values * grad_Z[j] for j in range(grid.d))
    restricted, _ = restrict_to_domain(RealField(grid, prod))
    return sine_analysis(restricted).coeffs.ravel()


def _etdrk4_coefficients(L: np.ndarray, dt: float, n_contour: int = 32) -> tuple:
    """Kassam-Trefethen coefficients for the diagonal linear part ``L``."""
    roots = np.exp(1j * np.pi * (np.arange(1, n_contour + 1) - 0.5) / n_contour)
    LR = dt * L[:, None] + roots[None, :]
    E = np.exp(dt * L)
    E2 = np.exp(dt * L / 2)
    Q = dt * np.real(np.mean((np.exp(LR / 2) - 1) / LR, axis=1))
    f1 = dt * np.real(np.mean((-4 - LR + np.exp(LR) * (4 - 3 * LR + LR**2)) / LR**3, axis=1))
    f2 = dt * np.real(np.mean((2 + LR + np.exp(LR) * (-2 + LR)) / LR**3, axis=1))
    f3 = dt * np.real(np.mean((-4 - 3 * LR - LR**2 + np.exp(LR) * (4 - LR)) / LR**3, axis=1))
    return E, E2, Q, f1, f2, f3


def reference_solution(u0: SineCoeffs, grad_Z: tuple, cfg: SolverConfig,
                       refine: int = 4) -> TimePath:
    """ETDRK4 for ``du/dt = sigma2 Laplace_D u + grad u . grad Z`` with ``dt / refine``.

    ``grad_Z`` is a tuple of arrays on the ambient grid, typically the exact
    gradient of a band-limited noise.  States are returned at the solver nodes.
    """
    grid = cfg.grid
    dt = cfg.dt / refine
    L = -cfg.sigma2 * eigenvalues(grid).ravel()
    E, E2, Q, f1, f2, f3 = _etdrk4_coefficients(L, dt)

    def N(v):
        return classical_drift(v, grad_Z, grid)

    v = u0.coeffs.ravel().copy()
    states = [v.copy()]
    for _ in range(cfg.M_t):
        for _ in range(refine):
            Nv = N(v)
            a = E2 * v + Q * Nv
            Na = N(a)
            b = E2 * v + Q * Na
            Nb = N(b)
            c = E2 * a + Q * (2 * Nb - Nv)
            Nc = N(c)
            v = E * v + f1 * Nv + 2 * f2 * (Na + Nb) + f3 * Nc
        states.append(v.copy())
    return TimePath(grid, cfg.times, np.stack(states))


def relative_sup_l2(p: TimePath, ref: TimePath) -> float:
    """``max_m ||p_m - ref_m|| / max_m ||ref_m||`` (coefficients are L2-orthonormal)."""
    num = np.max(np.linalg.norm(p.states - ref.states, axis=1))
    den = np.max(np.linalg.norm(ref.states, axis=1))
    return float(num / den) if den > 1e-14 else float(num)


def with_rho(cfg: SolverConfig, rho) -> SolverConfig:
    return replace(cfg, rho=rho)


def path_fields(p: TimePath) -> list:
    """Ambient-grid fields of every state (zero outside D)."""
    return [sine_synthesis(p[m]) for m in range(len(p))]
