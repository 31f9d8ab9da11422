import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vfp.grid import DistField, build_grid, sample_function
from vfp.moments import compute_moments, moments_from_raw
from vfp.regularize import (KernelResolutionError, RegParams, build_mollifier, mollify,
                            regularize_initial, regularized_fields, regularized_temperature,
                            regularized_velocity, saturating_ratio)

from conftest import bimodal


@pytest.fixture
def g64():
    return build_grid(1, 64, 32, 8.0)


def uniform_moments(grid, rho=1.0, mom=0.0, en2=1.0):
    shp = grid.spatial_shape
    return moments_from_raw(np.full(shp, rho), np.full(shp + (grid.dim,), mom), np.full(shp, en2), grid)


def test_kernel_unit_mass(g64):
    k = build_mollifier(g64, 0.1)
    assert math.fsum(k.weights) == 1.0
    assert k.dense().sum() * g64.dx == pytest.approx(1.0, abs=1e-14)


def test_mollify_constant_and_integral(g64):
    k = build_mollifier(g64, 0.1)
    np.testing.assert_allclose(mollify(k, np.full(64, 3.7)), 3.7, rtol=1e-15)
    rng = np.random.default_rng(0)
    g = rng.random(64)
    assert mollify(k, g).sum() == pytest.approx(g.sum(), rel=1e-12)


def test_mollify_point_mass_reproduces_kernel(g64):
    k = build_mollifier(g64, 0.1)
    delta = np.zeros(64)
    delta[0] = 1 / g64.dx
    np.testing.assert_allclose(mollify(k, delta), k.dense(), atol=1e-12)


def test_kernel_resolution(g64):
    with pytest.raises(KernelResolutionError, match="under-resolved"):
        build_mollifier(g64, 0.01)
    with pytest.warns(UserWarning):
        build_mollifier(g64, 0.02)


def test_2d_mollifier_unit_mass():
    g = build_grid(2, 16, 8, 4.0)
    k = build_mollifier(g, 0.2)
    np.testing.assert_allclose(mollify(k, np.full((16, 16), 2.0)), 2.0, rtol=1e-14)


def test_reg_params_validation():
    with pytest.raises(ValueError):
        RegParams(0.0, 0.1)
    with pytest.raises(ValueError):
        RegParams(0.1, 1.0)


def test_regularized_velocity_examples(g64):
    k = build_mollifier(g64, 0.1)
    assert not regularized_velocity(uniform_moments(g64), k, 0.1).any()
    u = regularized_velocity(uniform_moments(g64, mom=1.0, en2=2.0), k, 0.1)
    np.testing.assert_allclose(u, 1 / 1.2, rtol=1e-14)


def test_regularized_temperature_examples(g64):
    k = build_mollifier(g64, 0.1)
    phi, T = regularized_temperature(uniform_moments(g64), k, 0.1, 0.1)
    np.testing.assert_allclose(phi, 1.0, rtol=1e-14)
    np.testing.assert_allclose(T, 1.01 / 1.2, rtol=1e-14)
    phi0, T0 = regularized_temperature(uniform_moments(g64, rho=0, en2=0), k, 0.1, 0.1)
    assert not phi0.any()
    np.testing.assert_allclose(T0, 0.1, rtol=1e-14)


@given(st.integers(0, 2 ** 31), st.sampled_from([0.05, 0.1, 0.3]), st.sampled_from([0.05, 0.2, 0.9]))
def test_surrogate_bounds_random(seed, eps, delta):
    g = build_grid(1, 64, 16, 6.0)
    rng = np.random.default_rng(seed)
    vals = rng.random(g.shape) ** 4 * rng.choice([1e-6, 1.0, 1e3])
    vals[rng.random(g.shape) < 0.5] = 0
    m = compute_moments(DistField(g, vals))
    rf = regularized_fields(m, build_mollifier(g, eps), RegParams(eps, delta))
    assert np.max(np.abs(rf.u_eps)) * eps <= 1 + 1e-12
    assert rf.t_eps_delta.max() * delta <= 1 + 1e-12
    assert rf.t_eps_delta.min() >= 0
    scale = max(1.0, rf.en2_moll.max())
    assert np.all(rf.phi - rf.rhoT_moll >= -1e-12 * scale)
    assert rf.rhoT_moll.min() >= 0


def test_regularize_initial_zero(g64):
    f = regularize_initial(DistField(g64, np.zeros(g64.shape)), 0.5)
    np.testing.assert_allclose(f.values, 0.5 * np.exp(-g64.v ** 2)[None, :] * np.ones((64, 1)), rtol=1e-15)


def test_regularize_initial_mass_and_floor():
    g = build_grid(1, 32, 128, 8.0)
    f0 = sample_function(g, bimodal(amp=0.5))
    f = regularize_initial(f0, 0.1)
    assert f.mass() == pytest.approx(f0.mass() + 0.1 * math.sqrt(math.pi), rel=1e-10)
    assert f.values.min() >= 0.1 * math.exp(-g.vmax ** 2)


def test_saturating_ratio_monotone():
    x = np.linspace(0, 100, 1001)
    for a, b in [(0.1, 0.1), (1, 5), (3, 0.01)]:
        assert np.all(np.diff(saturating_ratio(x, a, b)) > 0)


def test_coefficients_lipschitz_in_data():
    g = build_grid(1, 32, 64, 8.0)
    f = sample_function(g, bimodal(amp=0.5))
    rng = np.random.default_rng(2)
    h = rng.random(g.shape) * f.values
    params = RegParams(0.1, 0.1)
    k = build_mollifier(g, 0.1)
    base = regularized_fields(compute_moments(f), k, params)
    diffs = []
    for t in (1e-1, 1e-2, 1e-3):
        rf = regularized_fields(compute_moments(DistField(g, f.values + t * h)), k, params)
        diffs.append(max(np.abs(rf.u_eps - base.u_eps).max(), np.abs(rf.t_eps_delta - base.t_eps_delta).max()))
    assert diffs[0] > diffs[1] > diffs[2]
    assert diffs[2] < 1e-2 * diffs[0] * 1.5
