import numpy as np
import pytest
from scipy import integrate, special

from fractal_transport import dirichlet as dr
from fractal_transport import noise as nz
from fractal_transport import solver as sv
from fractal_transport.spectral import Grid, RealField, build_cutoff


@pytest.fixture(scope="module")
def small_cfg():
    return sv.SolverConfig(grid=Grid(N=64), M_t=16, rho=4.0)


@pytest.fixture(scope="module")
def smooth_Z():
    g = Grid(N=64)
    return nz.synthesize_smooth_test(nz.NoiseSpec(kind="smooth_test", seed=1), g)


@pytest.fixture(scope="module")
def fbm_Z():
    g = Grid(N=64)
    return nz.make_noise_Z(nz.synthesize_fbm_1d(nz.NoiseSpec(0.9, 5), g), build_cutoff(g))


class TestConfig:
    def test_defaults_valid(self):
        cfg = sv.SolverConfig()
        assert cfg.dt == pytest.approx(0.5 / 64) and cfg.order == 1.3
        assert cfg.times[-1] == pytest.approx(0.5)

    @pytest.mark.parametrize("kwargs", [
        dict(beta=0.3, delta=0.2),
        dict(delta=0.5),
        dict(gamma=0.25),  # 2 gamma = 1 - beta - delta exactly
        dict(gamma=0.0),
        dict(q=2.0),
        dict(q=3.0),  # d/delta = 3.33
        dict(rho=0.5),
        dict(rho="large"),
        dict(u0_kind="eigenmode_smooth"),
        dict(M_t=0),
        dict(sigma2=0.0),
    ])
    def test_gates(self, kwargs):
        with pytest.raises(sv.ConfigError):
            sv.SolverConfig(**kwargs)

    def test_q_gate_two_dimensions(self):
        with pytest.raises(sv.ConfigError, match="q >"):
            sv.SolverConfig(grid=Grid(d=2, N=32), q=4.0)
        sv.SolverConfig(grid=Grid(d=2, N=32), q=8.0)

    def test_eigenmode_allowed_at_low_order(self):
        cfg = sv.SolverConfig(beta=0.05, delta=0.1, gamma=0.1, q=12, u0_kind="eigenmode_smooth")
        assert sv.initial_data(cfg).coeffs[0] == 1.0


class TestNorms:
    def test_constant_path(self, small_cfg):
        v = dr.random_sine_coeffs(small_cfg.grid, 1.5, 0)
        p = sv.TimePath.from_coeffs(small_cfg.times, [v] * len(small_cfg.times))
        for rho in (0.0, 3.0):
            assert sv.weighted_holder_norm(p, rho, 0.2, 1.3) == pytest.approx(dr.eigen_norm(v, 1.3), rel=1e-14)

    def test_linear_path_brute_force(self, small_cfg):
        g = small_cfg.grid
        t = small_cfg.times
        e1 = dr.eigenmode(g, 1)
        p = sv.TimePath.from_coeffs(t, [e1 * tm for tm in t])
        a = dr.eigen_norm(e1, 1.3)
        rho, gamma = 2.0, 0.2
        best = 0.0
        for m in range(len(t)):
            q = max([a * (t[m] - t[j]) / (t[m] - t[j]) ** gamma for j in range(m)], default=0.0)
            best = max(best, np.exp(-rho * t[m]) * (a * t[m] + q))
        assert sv.weighted_holder_norm(p, rho, gamma, 1.3) == pytest.approx(best, rel=1e-13)

    def test_random_path_brute_force(self, small_cfg):
        p = sv.random_path(small_cfg, 3)
        w = np.sqrt((1 + dr.eigenvalues(p.grid).ravel()) ** 1.3)
        W = p.states * w
        t = p.times
        best = 0.0
        for m in range(len(t)):
            q = max([np.linalg.norm(W[m] - W[j]) / (t[m] - t[j]) ** 0.2 for j in range(m)], default=0.0)
            best = max(best, np.exp(-5 * t[m]) * (np.linalg.norm(W[m]) + q))
        assert sv.weighted_holder_norm(p, 5.0, 0.2, 1.3) == pytest.approx(best, rel=1e-12)

    def test_norm_equivalence(self, small_cfg):
        T = small_cfg.T
        for seed in range(5):
            p = sv.random_path(small_cfg, seed)
            plain = sv.weighted_holder_norm(p, 0.0, 0.2, 1.3)
            for rho in (1.0, 10.0, 100.0):
                w = sv.weighted_holder_norm(p, rho, 0.2, 1.3)
                assert np.exp(-rho * T) * plain <= w * (1 + 1e-14) and w <= plain * (1 + 1e-14)

    def test_rejects_negative_rho(self, small_cfg):
        with pytest.raises(ValueError):
            sv.weighted_holder_norm(sv.random_path(small_cfg, 0), -1.0, 0.2, 1.3)


class TestInitialTerm:
    def test_zero(self, small_cfg):
        p = sv.initial_term(dr.SineCoeffs.zeros(small_cfg.grid), small_cfg)
        assert np.all(p.states == 0)

    def test_eigenmode_decay(self, small_cfg):
        g = small_cfg.grid
        lam1 = dr.eigenvalues(g)[0]
        p = sv.initial_term(dr.eigenmode(g, 1), small_cfg)
        np.testing.assert_allclose(p.states[:, 0], np.exp(-lam1 * small_cfg.times), rtol=1e-14)
        assert np.all(p.states[:, 1:] == 0)

    def test_bump_is_smooth_enough(self):
        g = Grid(N=256)
        u0 = sv.interior_bump(g)
        assert np.isfinite(dr.eigen_norm(u0, 1.7))
        f = dr.sine_synthesis(u0)
        assert np.all(f.values[~g.domain_mask] == 0)
        # support strictly inside D
        inside = np.abs(g.axis - 1.0) <= 0.4 * g.domain_side
        assert np.all(np.abs(f.values[~inside]) < 1e-12)

    def test_norm_stable_in_time_refinement(self):
        norms = []
        for M_t in (64, 128):
            cfg = sv.SolverConfig(M_t=M_t, rho=1.0)
            norms.append(sv.path_norm(sv.initial_term(sv.initial_data(cfg), cfg), cfg, 1.0))
        assert abs(norms[1] / norms[0] - 1) < 0.10


class TestProductIntegration:
    def test_weights_match_quadrature(self):
        dt = 0.01
        for mu in (0.0, 1e-3, 0.5, 10.0, 1e3, 1e5):
            decay, w_old, w_new = sv.product_weights(np.array([mu]), dt)
            k = lambda s: np.exp(-mu * (dt - s))
            a, _ = integrate.quad(lambda s: k(s) * (1 - s / dt), 0, dt, epsabs=0, epsrel=1e-13)
            b, _ = integrate.quad(lambda s: k(s) * s / dt, 0, dt, epsabs=0, epsrel=1e-13)
            assert w_old[0] == pytest.approx(a, rel=1e-10, abs=1e-300)
            assert w_new[0] == pytest.approx(b, rel=1e-10)
            assert decay[0] == pytest.approx(np.exp(-mu * dt))

    def test_series_branch_continuous(self):
        z = np.array([sv.SERIES_THRESHOLD * (1 - 1e-14), sv.SERIES_THRESHOLD * (1 + 1e-14)])
        _, w_old, w_new = sv.product_weights(z, 1.0)
        assert abs(w_old[0] - w_old[1]) < 1e-14 and abs(w_new[0] - w_new[1]) < 1e-14

    def test_linear_source_exact(self):
        # with m linear in time the recursion is exact
        mu, dt = np.array([3.0, 400.0]), 0.02
        t = np.arange(11) * dt
        m = np.outer(1 + 2 * t, [1.0, 1.0])
        got = sv.convolve_in_time(m, mu, dt)
        for j, rate in enumerate(mu):
            exact = [integrate.quad(lambda r: np.exp(-rate * (tm - r)) * (1 + 2 * r), 0, tm,
                                    epsabs=0, epsrel=1e-13)[0] for tm in t]
            np.testing.assert_allclose(got[:, j], exact, rtol=1e-10, atol=1e-16)


class TestIntegralOperator:
    def test_constant_Z(self, small_cfg):
        g = small_cfg.grid
        out = sv.integral_operator(sv.random_path(small_cfg, 1), RealField(g, np.full(g.shape, 2.0)), small_cfg)
        assert np.abs(out.states).max() < 1e-12

    def test_zero_path(self, small_cfg, fbm_Z):
        out = sv.integral_operator(sv.TimePath.zeros(small_cfg.grid, small_cfg.times), fbm_Z, small_cfg)
        assert np.all(out.states == 0)

    def test_linearity(self, small_cfg, fbm_Z):
        u, v = sv.random_path(small_cfg, 1), sv.random_path(small_cfg, 2)
        a, b = 0.7, -1.9
        lhs = sv.integral_operator(u * a + v * b, fbm_Z, small_cfg)
        rhs = sv.integral_operator(u, fbm_Z, small_cfg) * a + sv.integral_operator(v, fbm_Z, small_cfg) * b
        assert np.abs(lhs.states - rhs.states).max() <= 1e-10 * np.abs(rhs.states).max()

    def test_quadrature_oracle(self, small_cfg, smooth_Z):
        # path e_2 scaled by cos(3 t): compare every mode with adaptive quadrature of the
        # same piecewise-linear integrand
        g = small_cfg.grid
        t = small_cfg.times
        e = dr.eigenmode(g, 2)
        p = sv.TimePath.from_coeffs(t, [e * np.cos(3 * tm) for tm in t])
        out = sv.integral_operator(p, smooth_Z, small_cfg)
        m_nodes = sv.transport_states(p, smooth_Z, small_cfg)
        mu = dr.eigenvalues(g)
        scale = np.abs(out.states).max()
        for k in (0, 1, 2, 5, 14):
            for mi in (1, 5, len(t) - 1):
                f = lambda r: np.exp(-mu[k] * (t[mi] - r)) * np.interp(r, t, m_nodes[:, k])
                val, _ = integrate.quad(f, 0, t[mi], points=t[1:mi], epsabs=0, epsrel=1e-12, limit=200)
                assert abs(out.states[mi, k] - val) <= 1e-6 * max(abs(val), 1e-6 * scale)

    def test_causality(self, small_cfg, fbm_Z):
        u = sv.random_path(small_cfg, 1)
        v = sv.stopped(u, 5)
        a, b = sv.integral_operator(u, fbm_Z, small_cfg), sv.integral_operator(v, fbm_Z, small_cfg)
        np.testing.assert_allclose(a.states[:6], b.states[:6], rtol=1e-13, atol=1e-300)


class TestPicard:
    def test_zero_noise_is_heat_flow(self, small_cfg):
        g = small_cfg.grid
        u, diag = sv.picard_solve(RealField.zeros(g), small_cfg)
        base = sv.initial_term(sv.initial_data(small_cfg), small_cfg)
        assert diag.converged and diag.iterations == 1 and diag.diffs[0] == 0
        assert np.abs(u.states - base.states).max() <= 1e-10 * np.abs(base.states).max()

    def test_converges_and_is_unique(self, small_cfg, fbm_Z):
        u, diag = sv.picard_solve(fbm_Z, small_cfg)
        assert diag.converged
        assert sv.fixed_point_residual(u, fbm_Z, small_cfg, diag.rho) <= 2 * small_cfg.tol_picard
        w, diag2 = sv.picard_solve(fbm_Z, small_cfg, start="zero")
        assert diag2.converged
        assert sv.path_norm(u - w, small_cfg, diag.rho) < 10 * small_cfg.tol_picard
        rows = diag.rows()
        assert rows[0]["iteration"] == 1 and set(rows[0]) == {
            "iteration", "diff_norm", "ratio", "max_leakage", "wallclock_s"}

    def test_non_convergence_flagged(self, small_cfg, fbm_Z):
        cfg = sv.SolverConfig(grid=small_cfg.grid, M_t=16, rho=4.0, max_iter=2, tol_picard=1e-14)
        _, diag = sv.picard_solve(fbm_Z, cfg)
        assert not diag.converged and diag.iterations == 2

    def test_auto_rho(self, fbm_Z):
        cfg = sv.SolverConfig(grid=fbm_Z.grid, M_t=16)
        rho, ratio = sv.choose_rho(fbm_Z, cfg)
        assert rho >= 1 and (ratio < sv.AUTO_RHO_TARGET or rho == sv.AUTO_RHO_CAP)
        assert np.log2(rho) == int(np.log2(rho))

    def test_bad_start(self, small_cfg, fbm_Z):
        with pytest.raises(ValueError):
            sv.picard_solve(fbm_Z, small_cfg, start="random")


class TestContraction:
    def test_zero_noise(self, small_cfg):
        c = sv.contraction_values(RealField.zeros(small_cfg.grid), small_cfg, (1, 4), n_pairs=2)
        assert np.all(c == 0)

    def test_stop_nodes(self):
        assert sv.stop_nodes(64) == [1, 2, 4, 8, 16, 32, 64]
        assert sv.stop_nodes(1) == [1]

    def test_single_application_decreasing(self, fbm_Z):
        cfg = sv.SolverConfig(grid=fbm_Z.grid, M_t=16, rho=1.0)
        u = sv.random_path(cfg, 7)
        Iu = sv.integral_operator(u, fbm_Z, cfg)
        ratios = [sv.path_norm(Iu, cfg, r) / sv.path_norm(u, cfg, r) for r in (1, 4, 16, 64)]
        assert np.all(np.isfinite(ratios))
        assert all(b < a for a, b in zip(ratios, ratios[1:]))

    def test_report_structure(self, fbm_Z):
        cfg = sv.SolverConfig(grid=fbm_Z.grid, M_t=8, rho=1.0)
        reps = sv.contraction_estimate(fbm_Z, cfg, (1, 4), n_pairs=2)
        assert [r.name for r in reps] == ["contraction_constant"] * 2 + ["contraction_slope"]
        assert reps[-1].reference == pytest.approx(sv.theoretical_slope(cfg)) == pytest.approx(-0.05)

    def test_rejects_small_rho(self, small_cfg, fbm_Z):
        with pytest.raises(ValueError):
            sv.contraction_values(fbm_Z, small_cfg, (0.5,), n_pairs=1)


class TestGammaBounds:
    def test_sqrt_pi(self):
        val = sv.laplace_power_integral(0.5, 1.0, 0.0, 10.0)
        assert val <= np.sqrt(np.pi)
        assert val == pytest.approx(np.sqrt(np.pi) * special.gammainc(0.5, 10.0), abs=1e-10)

    def test_theta_zero(self):
        for rho in (1.0, 10.0):
            val = sv.laplace_power_integral(0.0, rho, 0.0, 3.0)
            assert val == pytest.approx((1 - np.exp(-3 * rho)) / rho, rel=1e-12)
            assert val <= 1 / rho

    def test_convolution_beta_function(self):
        # rho = 0 reduces to t^{1-theta-gamma} B(1-theta, 1-gamma)
        th, ga, t = 0.55, 0.2, 0.7
        val = sv.convolution_power_integral(th, ga, 0.0, t)
        assert val == pytest.approx(t ** (1 - th - ga) * special.beta(1 - th, 1 - ga), rel=1e-9)

    def test_reports(self):
        reps = sv.verify_gamma_bounds(0.55, 0.2, (1, 10, 100))
        assert all(r.passed for r in reps)
        drift = reps[-1]
        assert drift.name == "convolution_constant_drift" and drift.measured < 0.10

    def test_gates(self):
        with pytest.raises(ValueError):
            sv.verify_gamma_bounds(1.0, 0.0)
        with pytest.raises(ValueError):
            sv.verify_gamma_bounds(0.7, 0.4)


class TestReference:
    def test_zero_noise_matches_heat_flow(self):
        cfg = sv.SolverConfig(grid=Grid(N=64), M_t=8, rho=1.0)
        g = cfg.grid
        u0 = sv.initial_data(cfg)
        ref = sv.reference_solution(u0, (np.zeros(g.shape),), cfg, refine=1)
        base = sv.initial_term(u0, cfg)
        assert sv.relative_sup_l2(ref, base) < 1e-12

    def test_classical_drift_linear(self, smooth_Z):
        g = smooth_Z.grid
        dZ = nz.smooth_test_gradient(nz.NoiseSpec(kind="smooth_test", seed=1), g)
        a = dr.random_sine_coeffs(g, 2.0, 1).coeffs.ravel()
        b = dr.random_sine_coeffs(g, 2.0, 2).coeffs.ravel()
        lhs = sv.classical_drift(2 * a - b, dZ, g)
        rhs = 2 * sv.classical_drift(a, dZ, g) - sv.classical_drift(b, dZ, g)
        assert np.abs(lhs - rhs).max() <= 1e-12 * np.abs(rhs).max()

    def test_oracle_small(self, smooth_Z):
        cfg = sv.SolverConfig(grid=smooth_Z.grid, M_t=64, tol_picard=1e-12, rho=1.0)
        spec = nz.NoiseSpec(kind="smooth_test", seed=1)
        u, diag = sv.picard_solve(smooth_Z, cfg)
        ref = sv.reference_solution(sv.initial_data(cfg), nz.smooth_test_gradient(spec, smooth_Z.grid), cfg)
        assert diag.converged
        assert sv.relative_sup_l2(u, ref) < 2e-3


def test_path_fields(small_cfg):
    p = sv.random_path(small_cfg, 0)
    fields = sv.path_fields(p)
    assert len(fields) == len(p)
    np.testing.assert_allclose(dr.sine_analysis(fields[3]).coeffs.ravel(), p.states[3], atol=1e-12)
