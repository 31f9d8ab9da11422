import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from vfp.grid import DistField, build_grid, sample_function
from vfp.moments import (DegenerateTemperature, compute_moments, density_temperature_constant,
                         density_temperature_ratio, discrete_maxwellian, entropy,
                         entropy_dissipation, gaussian_values, local_maxwellian, third_moment,
                         weighted_norm)

from conftest import gauss


def test_gaussian_moments(std_gauss):
    m = compute_moments(std_gauss)
    np.testing.assert_allclose(m.rho, 1, atol=1e-8)
    np.testing.assert_allclose(m.u, 0, atol=1e-8)
    np.testing.assert_allclose(m.T, 1, atol=1e-8)


def test_vacuum_convention(grid1):
    m = compute_moments(DistField(grid1, np.zeros(grid1.shape)))
    assert not m.rho.any() and not m.u.any() and not m.T.any()


def test_shifted_maxwellian_moments(grid128):
    f = sample_function(grid128, lambda x, v: 2 * gauss(v, 0.5, 0.25) + 0 * x)
    m = compute_moments(f)
    np.testing.assert_allclose(m.rho, 2, atol=1e-8)
    np.testing.assert_allclose(m.mom[..., 0], 1, atol=1e-8)
    np.testing.assert_allclose(m.T, 0.25, atol=1e-8)


def test_maxwellian_closure(grid128):
    shp = grid128.spatial_shape
    f = local_maxwellian(compute_moments(sample_function(grid128, lambda x, v: gauss(v, 0.3, 0.5) + 0 * x)),
                         grid128)
    m = compute_moments(f)
    np.testing.assert_allclose(m.rho, np.ones(shp), atol=1e-8)
    np.testing.assert_allclose(m.u[..., 0], 0.3, atol=1e-8)
    np.testing.assert_allclose(m.T, 0.5, atol=1e-8)


@pytest.mark.parametrize("u,T", [(0.0, 0.05), (1.5, 0.3), (-2.0, 2.0), (0.0, 10.0)])
def test_closure_parameter_range(u, T):
    vmax = max(8.0, 8 * math.sqrt(T) + abs(u))
    g = build_grid(1, 4, 512, vmax)
    f = DistField(g, gaussian_values(g, 1.0, u, T))
    m = compute_moments(f)
    np.testing.assert_allclose(m.u[..., 0], u, atol=1e-8)
    np.testing.assert_allclose(m.T, T, rtol=1e-7)


def test_maxwellian_vacuum_region(grid1):
    rho = np.ones(grid1.spatial_shape)
    rho[:4] = 0
    f = discrete_maxwellian(grid1, rho, np.zeros(grid1.spatial_shape + (1,)), 1.0)
    assert not f.values[:4].any()


def test_degenerate_temperature(grid1):
    with pytest.raises(DegenerateTemperature, match="degenerate temperature"):
        gaussian_values(grid1, 1.0, 0.0, 0.0)


def test_entropy_gaussian(std_gauss):
    assert entropy(std_gauss) == pytest.approx(-(1 + math.log(2 * math.pi)) / 2, abs=1e-6)


def test_entropy_zero_and_scaling(grid1, std_gauss):
    assert entropy(DistField(grid1, np.zeros(grid1.shape))) == 0.0
    two = DistField(std_gauss.grid, 2 * std_gauss.values)
    assert entropy(two) == pytest.approx(2 * entropy(std_gauss) + 2 * math.log(2) * std_gauss.mass(), rel=1e-12)


def test_dissipation_vanishes_at_maxwellian(std_gauss):
    assert entropy_dissipation(std_gauss) < 1e-6


def test_dissipation_bimodal_temperature_matches_quadrature(grid128):
    def f(v):
        return 0.5 * gauss(v, 0, 0.5) + 0.5 * gauss(v, 0, 2.0)

    def df(v):
        return -0.5 * v / 0.5 * gauss(v, 0, 0.5) - 0.5 * v / 2.0 * gauss(v, 0, 2.0)

    T = 1.25
    oracle, _ = integrate.quad(lambda v: (T * df(v) + v * f(v)) ** 2 / (T * f(v)), -8, 8, limit=200)
    field = sample_function(grid128, lambda x, v: f(v) + 0 * x)
    D = entropy_dissipation(field)
    assert D > 0
    assert D == pytest.approx(oracle, rel=1e-3)
    fine = sample_function(build_grid(1, 4, 256, 8.0), lambda x, v: f(v) + 0 * x)
    assert abs(entropy_dissipation(fine) - oracle) < abs(D - oracle) / 8


def test_dissipation_zero_field(grid1):
    assert entropy_dissipation(DistField(grid1, np.zeros(grid1.shape))) == 0.0


def test_weighted_norms(std_gauss, grid1):
    assert weighted_norm(std_gauss, 1, 0) == pytest.approx(2.0, abs=1e-8)
    assert weighted_norm(std_gauss, math.inf, 0) == pytest.approx(2 / math.sqrt(2 * math.pi), rel=2e-3)
    zero = DistField(grid1, np.zeros(grid1.shape))
    assert weighted_norm(zero, 2, 6) == 0.0 and weighted_norm(zero, math.inf, 3) == 0.0
    with pytest.raises(ValueError):
        weighted_norm(std_gauss, 0.5, 0)


def test_third_moment(grid1):
    # |v|^3 is only C^2 at the origin, so the midpoint rule needs nv = 256 for 1e-6
    g = build_grid(1, 4, 256, 8.0)
    std = sample_function(g, lambda x, v: gauss(v) + 0 * x)
    assert third_moment(std) == pytest.approx(2 * math.sqrt(2 / math.pi), abs=1e-6)
    assert third_moment(DistField(grid1, np.zeros(grid1.shape))) == 0.0
    g = build_grid(1, 4, 512, 16.0)
    hot = sample_function(g, lambda x, v: gauss(v, 0, 4.0) + 0 * x)
    assert third_moment(hot) == pytest.approx(8 * 2 * math.sqrt(2 / math.pi), abs=1e-5)


@given(st.integers(0, 2 ** 31))
def test_moment_identities_random(seed):
    g = build_grid(1, 8, 16, 4.0)
    rng = np.random.default_rng(seed)
    vals = rng.random(g.shape) ** 3
    vals[rng.random(g.shape) < 0.3] = 0
    m = compute_moments(DistField(g, vals))
    mom_sq = np.sum(m.mom ** 2, axis=-1)
    assert np.all(mom_sq <= m.rho * m.en2 * (1 + 1e-12) + 1e-300)
    occ = m.rho > 0
    recon = g.dim * m.rho * m.T + m.rho * np.sum(m.u ** 2, axis=-1)
    np.testing.assert_allclose(recon[occ], m.en2[occ], rtol=1e-12, atol=1e-300)
    assert np.all(m.rho * np.sum(m.u ** 2, axis=-1) <= m.en2 * (1 + 1e-12))


def test_density_temperature_constant_values():
    assert density_temperature_constant(1) == pytest.approx(3 ** 1.5)
    assert density_temperature_constant(2) == pytest.approx((2 + math.pi) ** 2)


def test_density_temperature_uniform_extremal():
    # f = 1 on [-a, a]: rho = 2a, T = a^2 / 3, ratio 2 sqrt(3)
    g = build_grid(1, 4, 1024, 4.0)
    f = sample_function(g, lambda x, v: (np.abs(v) < 2.0) * 1.0 + 0 * x)
    r = density_temperature_ratio(f)
    np.testing.assert_allclose(r, 2 * math.sqrt(3), rtol=1e-4)
    assert r.max() <= density_temperature_constant(1)


@given(st.integers(0, 2 ** 31), st.sampled_from([1, 2]))
def test_density_temperature_bound_random(seed, dim):
    g = build_grid(dim, 4, 16, 4.0)
    rng = np.random.default_rng(seed)
    vals = rng.random(g.shape) ** rng.integers(1, 6)
    r = density_temperature_ratio(DistField(g, vals))
    assert r.max() <= density_temperature_constant(dim)
