import numpy as np
import pytest
from scipy import stats

from fractal_transport import noise as nz
from fractal_transport.sobolev import holder_exponent_estimate
from fractal_transport.spectral import Grid, RealField, build_cutoff, dft_forward


def test_spec_validation():
    for bad in (dict(H=0.0), dict(H=1.0), dict(kind="white"), dict(band=0)):
        with pytest.raises(ValueError):
            nz.NoiseSpec(**bad)


def test_covariance_formula():
    assert nz.fbm_covariance(1.0, 1.0, 0.5) == pytest.approx(1.0)
    assert nz.fbm_covariance(0.5, 1.0, 0.75) == pytest.approx(0.5)
    assert nz.fbm_covariance([0.3, 0.4], [0.3, 0.4], 0.6) == pytest.approx(0.5**1.2)


class TestExactFbm:
    def test_pinned_and_deterministic(self):
        g = Grid(N=256)
        a = nz.synthesize_fbm_1d(nz.NoiseSpec(0.7, 11), g)
        b = nz.synthesize_fbm_1d(nz.NoiseSpec(0.7, 11), g)
        assert a.values[0] == 0.0
        assert a.values.tobytes() == b.values.tobytes()

    def test_embedding_nonnegative(self):
        for H in (0.1, 0.5, 0.75, 0.95):
            lam = nz._fgn_eigenvalues(256, 2.0 / 256, H)
            assert lam.min() >= -1e-9 * lam.max()

    def test_rejects_two_dimensions(self):
        with pytest.raises(ValueError):
            nz.synthesize_fbm_1d(nz.NoiseSpec(0.7, 0), Grid(d=2, N=32))

    @pytest.mark.parametrize("H,x,y", [(0.5, 1.0, 1.0), (0.75, 0.5, 1.0), (0.3, 0.25, 1.5)])
    def test_covariance_within_three_sigma(self, H, x, y):
        rows = nz.covariance_study(nz.NoiseSpec(H, 0), Grid(N=256), [(x, y)], 2000)
        _, _, emp, formula, se = rows[0]
        assert abs(emp - formula) < 3 * se

    def test_increment_variance_exact(self):
        # with many seeds the lag-one increment variance is h^{2H}
        g = Grid(N=64)
        H = 0.8
        inc = np.array([np.diff(nz.synthesize_fbm_1d(nz.NoiseSpec(H, s), g).values)
                        for s in range(3000)])
        var = inc.var(axis=0).mean()
        assert var == pytest.approx(g.h ** (2 * H), rel=0.03)

    def test_gaussian_marginals(self):
        g = Grid(N=64)
        nodes = [5, 13, 27, 40, 63]
        samples = np.array([nz.synthesize_fbm_1d(nz.NoiseSpec(0.9, s), g).values[nodes]
                            for s in range(5000)])
        z = (samples - samples.mean(0)) / samples.std(0)
        assert np.all(np.abs(stats.skew(z, axis=0)) < 0.1)
        assert np.all(np.abs(stats.kurtosis(z, axis=0, fisher=False) - 3) < 0.2)


class TestLevy:
    def test_pinned(self):
        for d, N in ((1, 128), (2, 32)):
            B = nz.synthesize_levy_fbm(nz.NoiseSpec(0.8, 1, "levy_spectral"), Grid(d=d, N=N))
            assert B.values.flat[0] == 0.0

    def test_exact_variance_matches_formula(self):
        g = Grid(N=256)
        for x in np.linspace(0.1, 0.4, 7):
            assert nz.levy_variance(g, 0.9, x) == pytest.approx(x**1.8, rel=0.1)
        assert nz.levy_variance(g, 0.9, nz.REFERENCE_RADIUS) == pytest.approx(0.25**1.8, rel=1e-12)

    def test_monte_carlo_variance_curve(self):
        g = Grid(N=256)
        spec = nz.NoiseSpec(0.9, 0, "levy_spectral")
        xs = np.array([0.1, 0.2, 0.3, 0.4])
        idx = np.round(xs / g.h).astype(int)
        samples = np.array([nz.synthesize_levy_fbm(nz.NoiseSpec(0.9, s, "levy_spectral"), g).values[idx]
                            for s in range(2000)])
        var = (samples**2).mean(0)
        # stated accuracy of the approximate method plus 3 sigma of the estimator
        se = var * np.sqrt(2 / 2000)
        assert np.all(np.abs(var - xs**1.8) <= 0.1 * xs**1.8 + 3 * se)
        assert spec.kind == "levy_spectral"

    def test_isotropy_two_dimensions(self):
        g = Grid(d=2, N=32)
        i = int(round(0.25 / g.h))
        samples = np.array([nz.synthesize_levy_fbm(nz.NoiseSpec(0.8, s, "levy_spectral"), g).values[[i, 0], [0, i]]
                            for s in range(2000)])
        v = (samples**2).mean(0)
        assert abs(v[0] / v[1] - 1) < 0.05
        exact = nz.levy_variance(g, 0.8, [0.25, 0.0]), nz.levy_variance(g, 0.8, [0.0, 0.25])
        assert exact[0] == pytest.approx(exact[1], rel=1e-12)


class TestSmoothTest:
    def test_band_limited(self):
        for d, N in ((1, 64), (2, 32)):
            g = Grid(d=d, N=N)
            Z = nz.synthesize_smooth_test(nz.NoiseSpec(kind="smooth_test", band=3, seed=2), g)
            c = dft_forward(Z).coeffs
            k = np.abs(g.wavenumbers)
            kmax = np.max(np.stack(np.meshgrid(*([k] * d), indexing="ij")), axis=0)
            assert np.abs(c[kmax > 3]).max() < 1e-15
            assert np.abs(c[kmax <= 3]).max() > 1e-3

    def test_gradient_closed_form(self):
        from fractal_transport.spectral import gradient
        g = Grid(d=2, N=32)
        spec = nz.NoiseSpec(kind="smooth_test", band=4, seed=1)
        spectral = gradient(nz.synthesize_smooth_test(spec, g))
        exact = nz.smooth_test_gradient(spec, g)
        for j in range(2):
            np.testing.assert_allclose(spectral[j].values, exact[j], atol=1e-12)


class TestCutoffNoise:
    def test_unit_B(self):
        g = Grid(N=128)
        psi = build_cutoff(g)
        np.testing.assert_array_equal(nz.make_noise_Z(RealField(g, np.ones(128)), psi).values, psi.values)

    def test_plateau_and_support(self):
        g = Grid(N=256)
        B = nz.synthesize_fbm_1d(nz.NoiseSpec(0.9, 3), g)
        Z = nz.make_noise_Z(B, build_cutoff(g))
        np.testing.assert_array_equal(Z.values[g.domain_mask], B.values[g.domain_mask])
        far = (g.axis < g.domain_offset[0] - g.cutoff_width) | (
            g.axis > g.domain_offset[0] + g.domain_side + g.cutoff_width)
        assert np.all(Z.values[far] == 0)

    def test_grid_mismatch(self):
        with pytest.raises(ValueError):
            nz.make_noise_Z(RealField.zeros(Grid(N=64)), build_cutoff(Grid(N=128)))

    @pytest.mark.parametrize("H", [0.7, 0.9])
    def test_holder_exponent(self, H):
        g = Grid(N=1024)
        psi = build_cutoff(g)
        est = [holder_exponent_estimate(nz.make_noise_Z(nz.synthesize_fbm_1d(nz.NoiseSpec(H, s), g), psi)).exponent
               for s in range(20)]
        assert H - 0.2 <= np.mean(est) <= H + 0.05


class TestRegularity:
    def test_smooth_field_regular(self):
        g = Grid(N=256)
        Z = nz.synthesize_smooth_test(nz.NoiseSpec(kind="smooth_test"), g) * build_cutoff(g)
        rep = nz.sobolev_regularity_report(Z, 0.8, 4)
        assert rep.params["verdict"] == "regular" and rep.measured < 0.01 and rep.passed

    def test_rejects_small_q(self):
        with pytest.raises(ValueError):
            nz.sobolev_regularity_report(RealField.zeros(Grid(N=64)), 0.8, 1.5)

    def test_row_shape(self):
        g = Grid(N=64)
        rep = nz.sobolev_regularity_report(build_cutoff(g), 0.8, 4)
        row = rep.row()
        assert row["name"] == "sobolev_regularity" and row["param_q"] == 4

    def test_fbm_regular_and_negative_control(self):
        g = Grid(N=4096)
        psi = build_cutoff(g)
        regular = [nz.sobolev_regularity_report(
            nz.make_noise_Z(nz.synthesize_fbm_1d(nz.NoiseSpec(0.9, s), g), psi), 0.8, 4) for s in range(5)]
        rough = [nz.sobolev_regularity_report(
            nz.make_noise_Z(nz.synthesize_fbm_1d(nz.NoiseSpec(0.6, s), g), psi), 0.9, 4) for s in range(5)]
        assert all(r.params["verdict"] == "regular" for r in regular)
        assert all(r.params["verdict"] == "irregular" for r in rough)
        # the rough norm grows under refinement
        assert all(r.params["norm"] > r.params["norm_coarse"] for r in rough)


def test_coarsen_shares_nodes():
    g = Grid(N=128)
    f = RealField(g, np.arange(128.0))
    c = nz.coarsen(f)
    assert c.grid.N == 64 and np.all(c.values == np.arange(0, 128, 2))
