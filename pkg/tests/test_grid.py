import numpy as np
import pytest

from vfp.grid import (DistField, FieldError, GridError, build_grid, integrate_phase, read_snapshot,
                      sample_function, write_snapshot)

from conftest import gauss


def test_build_grid_spacing():
    g = build_grid(1, 32, 64, 8.0, 1.0)
    assert g.dx == 0.03125 and g.dv == 0.25


def test_odd_nv_rejected():
    with pytest.raises(GridError, match="nv must be even"):
        build_grid(1, 32, 63, 8.0, 1.0)


@pytest.mark.parametrize("args", [(3, 32, 64, 8.0), (1, 3, 64, 8.0), (1, 32, 6, 8.0),
                                  (1, 32, 64, -1.0), (1, 32, 64, 8.0, 0.0)])
def test_invalid_grids(args):
    with pytest.raises(GridError):
        build_grid(*args)


def test_2d_cell_count():
    g = build_grid(2, 16, 32, 6.0, 1.0)
    assert np.prod(g.shape) == 16 ** 2 * 32 ** 2


def test_velocity_nodes_symmetric(grid1):
    assert np.array_equal(grid1.v, -grid1.v[::-1])
    assert not np.any(grid1.v == 0)


def test_sample_gaussian_peak(grid128):
    f = sample_function(grid128, lambda x, v: gauss(v) + 0 * x)
    assert f.values.max() == pytest.approx(1 / np.sqrt(2 * np.pi), rel=5e-3)


def test_sample_zero_and_negative(grid1):
    assert not sample_function(grid1, lambda x, v: 0 * x + 0 * v).values.any()
    with pytest.raises(FieldError):
        sample_function(grid1, lambda x, v: -1.0 + 0 * x + 0 * v)


def test_field_rejects_nan_and_reports_location(grid1):
    vals = np.ones(grid1.shape)
    vals[2, 5] = np.nan
    with pytest.raises(FieldError, match="NaN"):
        DistField(grid1, vals)
    vals[2, 5] = -1.0
    with pytest.raises(FieldError, match=r"\(2, 5\)"):
        DistField(grid1, vals)


def test_field_is_read_only(std_gauss):
    with pytest.raises(ValueError):
        std_gauss.values[0, 0] = 1.0


def test_gaussian_quadrature(std_gauss):
    assert integrate_phase(std_gauss) == pytest.approx(1.0, abs=1e-10)
    assert abs(integrate_phase(std_gauss, lambda x, v: v)) < 1e-12
    assert integrate_phase(std_gauss, lambda x, v: v * v) == pytest.approx(1.0, abs=1e-8)


def test_integrate_linear(grid1):
    rng = np.random.default_rng(1)
    a, b = rng.random(grid1.shape), rng.random(grid1.shape)
    fa, fb, fab = DistField(grid1, a), DistField(grid1, b), DistField(grid1, 2 * a + 3 * b)
    assert integrate_phase(fab) == pytest.approx(2 * integrate_phase(fa) + 3 * integrate_phase(fb), rel=1e-13)


def test_midpoint_second_order():
    # Gaussians converge spectrally; exp(v) on [-1, 1] shows the O(dv^2) rate
    errs = []
    for nv in (16, 32):
        g = build_grid(1, 4, nv, 1.0)
        f = sample_function(g, lambda x, v: np.exp(v) + 0 * x)
        errs.append(abs(integrate_phase(f) - (np.e - 1 / np.e)))
    assert errs[0] / errs[1] >= 3.9


def test_snapshot_roundtrip(tmp_path, grid1):
    rng = np.random.default_rng(3)
    f = DistField(grid1, rng.random(grid1.shape) * 1e-3)
    p = tmp_path / "s.txt"
    write_snapshot(p, f, 0.125)
    g, grid, t = read_snapshot(p)
    assert g == f and grid == grid1 and t == 0.125


def test_snapshot_bad_header(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("nonsense\n1 2 3\n")
    with pytest.raises(FieldError):
        read_snapshot(p)
