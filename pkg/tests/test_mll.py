import numpy as np
import pytest
from scipy import integrate, special

from gpvine import bicop
from gpvine.errors import BandwidthError, DomainError, SizeError, WindowError
from gpvine.mll import (DEFAULT_GRID, MLLModel, epanechnikov, fit_mll, loo_bandwidth,
                        loo_score, mll_estimate, mll_latent)
from gpvine.mll import _local_fit

from conftest import pair_sample


def varying_pairs(n, seed, tau_fn):
    """Pairs whose Gaussian-copula tau follows tau_fn(z), z uniform on [-6, 6]."""
    rng = np.random.default_rng(seed)
    z = rng.uniform(-6, 6, n)
    rho = np.sin(np.pi / 2 * tau_fn(z))
    e1, e2 = rng.normal(size=(2, n))
    return special.ndtr(np.c_[e1, rho * e1 + np.sqrt(1 - rho ** 2) * e2]), z


def local_objective(pairs, z, z0, h, b0, b1):
    """Kernel-weighted log-likelihood of f = b0 + b1 (z0 - z_i), from first principles."""
    w = 0.75 / h * np.maximum(0.0, 1 - ((z0 - z) / h) ** 2)
    f = b0 + b1 * (z0 - z)
    theta = np.clip(np.sin(np.pi / 2 * (2 * special.ndtr(f) - 1)), -1 + 1e-6, 1 - 1e-6)
    return np.sum(w * bicop.gaussian_logpdf(pairs[:, 0], pairs[:, 1], theta))


class TestEpanechnikov:
    def test_peak_and_boundary(self):
        assert epanechnikov(0.0, 2.0) == pytest.approx(3 / 8)
        assert epanechnikov(2.0, 2.0) == 0.0
        assert epanechnikov(5.0, 2.0) == 0.0

    @pytest.mark.parametrize("h", [0.1, 1.0, 10.0])
    def test_unit_mass(self, h):
        val, _ = integrate.quad(lambda x: epanechnikov(x, h), -h, h, epsabs=1e-13)
        assert val == pytest.approx(1.0, abs=1e-9)

    def test_even(self, rng):
        x = rng.normal(size=100)
        np.testing.assert_array_equal(epanechnikov(x, 1.3), epanechnikov(-x, 1.3))

    @pytest.mark.parametrize("h", [0.0, -1.0])
    def test_bad_bandwidth(self, h):
        with pytest.raises(DomainError):
            epanechnikov(0.0, h)


class TestModel:
    def test_multivariate_inputs_rejected(self):
        with pytest.raises(SizeError):
            MLLModel(np.full((4, 2), 0.5), np.zeros((4, 2)), 1.0)

    def test_column_input_accepted(self):
        m = MLLModel(np.full((4, 2), 0.5), np.zeros((4, 1)), 1.0)
        assert m.inputs.shape == (4,)


class TestEstimate:
    def test_constant_tau(self):
        pairs = pair_sample(300, 0.8, 7)
        z = np.random.default_rng(7).uniform(-6, 6, 300)
        h = loo_bandwidth(pairs, z)
        m = MLLModel(pairs, z, h)
        truth = bicop.theta_to_tau("gaussian", 0.8)
        for z0 in (-3.0, 0.0, 2.5):
            assert 2 * special.ndtr(mll_estimate(m, z0)) - 1 == pytest.approx(truth, abs=0.1)

    def test_reflection_symmetric_data(self, rng):
        base = rng.uniform(0.05, 0.95, size=(40, 2))
        pairs = np.vstack([base, np.c_[1 - base[:, 0], base[:, 1]]])
        z = np.tile(rng.uniform(-1, 1, 40), 2)
        assert mll_estimate(MLLModel(pairs, z, 5.0), 0.0) == pytest.approx(0.0, abs=1e-5)

    def test_huge_bandwidth_matches_global_mle(self):
        pairs = pair_sample(200, 0.5, 3)
        z = np.random.default_rng(3).uniform(0, 1, 200)
        b0 = mll_estimate(MLLModel(pairs, z, 1e6), 0.5)
        tau = bicop.fit_theta_mle(pairs).tau
        assert b0 == pytest.approx(special.ndtri((tau + 1) / 2), abs=0.05)

    def test_window_error(self):
        m = MLLModel(pair_sample(5, 0.3, 0), np.array([0.0, 0.1, 0.2, 5.0, 5.1]), 0.5)
        with pytest.raises(WindowError):
            mll_estimate(m, 3.0)

    def test_exclusion(self):
        pairs, z = varying_pairs(50, 1, lambda z: 0.5 + 0 * z)
        m = MLLModel(pairs, z, 3.0)
        keep = np.arange(50) != 4
        assert mll_estimate(m, 0.3, exclude=4) == mll_estimate(MLLModel(pairs[keep], z[keep], 3.0), 0.3)

    def test_translation_equivariance(self):
        pairs, z = varying_pairs(100, 2, lambda z: 2 / np.pi * np.arcsin(0.75 * np.sin(z)))
        for z0 in (-2.0, 0.5, 3.0):
            a = mll_estimate(MLLModel(pairs, z, 1.5), z0)
            b = mll_estimate(MLLModel(pairs, z + 17.25, 1.5), z0 + 17.25)
            assert b == pytest.approx(a, abs=1e-9)

    def test_optimizer_not_beaten_by_grid(self):
        rng = np.random.default_rng(11)
        for k in range(10):
            pairs, z = varying_pairs(80, 100 + k, lambda z: 2 / np.pi * np.arcsin(0.75 * np.sin(z)))
            m = MLLModel(pairs, z, rng.uniform(0.5, 3.0))
            z0 = rng.uniform(-4, 4)
            b0, b1, _ = _local_fit(m._a, m._b, z, z0, m.bandwidth)
            best = local_objective(pairs, z, z0, m.bandwidth, b0, b1)
            h = m.bandwidth
            g0 = np.clip(b0 + np.linspace(-0.05, 0.05, 41), -4, 4)
            g1 = np.clip(b1 + np.linspace(-0.05, 0.05, 41) / h, -8 / h, 8 / h)
            grid = max(local_objective(pairs, z, z0, h, x, y) for x in g0 for y in g1)
            assert grid <= best + 1e-6

    def test_widening(self):
        pairs, z = varying_pairs(30, 4, lambda z: 0.3 + 0 * z)
        m = MLLModel(pairs, np.linspace(-6, 0, 30), 0.5)
        out, widened = mll_latent(m, np.array([-3.0, 4.0]))
        assert widened == 1 and np.all(np.isfinite(out))


class TestBandwidth:
    def test_single_element_grid(self):
        pairs, z = varying_pairs(20, 0, lambda z: 0 * z)
        assert loo_bandwidth(pairs, z, [0.7]) == 0.7

    def test_empty_grid(self):
        with pytest.raises(BandwidthError):
            loo_bandwidth(np.full((3, 2), 0.5), np.arange(3.0), [])

    def test_all_windowless(self):
        pairs = pair_sample(4, 0.3, 0)
        z = np.array([0.0, 10.0, 20.0, 30.0])
        assert loo_score(pairs, z, 1.0) == -np.inf
        with pytest.raises(BandwidthError):
            loo_bandwidth(pairs, z, [0.5, 1.0])

    def test_default_grid(self):
        assert len(DEFAULT_GRID) == 30
        assert DEFAULT_GRID[0] == pytest.approx(0.05) and DEFAULT_GRID[-1] == pytest.approx(10.0)
        assert np.allclose(np.diff(np.log(DEFAULT_GRID)), np.log(200) / 29)

    def test_smooth_data_selects_wider_window(self):
        flat = varying_pairs(200, 5, lambda z: 0.5 + 0 * z)
        wavy = varying_pairs(200, 5, lambda z: 2 / np.pi * np.arcsin(0.75 * np.sin(z)))
        assert loo_bandwidth(*flat) > loo_bandwidth(*wavy)

    def test_fit_records_bandwidth(self):
        pairs, z = varying_pairs(60, 6, lambda z: 0.4 + 0 * z)
        m = fit_mll(pairs, z)
        assert m.diagnostics["bandwidth"] == m.bandwidth
        assert m.bandwidth in DEFAULT_GRID
