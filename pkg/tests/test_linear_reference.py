import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cascade_nls import linear_reference as lr
from cascade_nls.model import make_params
from cascade_nls.nls_solver import initial_data
from cascade_nls.spectral_grid import FormulationTag, GridSpec, WaveField, l2_norm_array, sample

from conftest import unit_gaussian


def chirped(grid, eps):
    vals = sample(grid, unit_gaussian).values * np.exp(-0.5j * grid.radius_sq / eps)
    return WaveField(grid, vals, 0.0, FormulationTag.physical_u)


class TestFreePropagate:
    def test_zero_time_is_identity(self):
        u = chirped(GridSpec(1, 256, 10.0), 0.1)
        assert np.array_equal(lr.free_propagate(u, 0.1, 0.0).values, u.values)

    @given(t1=st.floats(-2, 2), t2=st.floats(-2, 2))
    def test_group_property(self, t1, t2):
        u = chirped(GridSpec(1, 128, 10.0), 0.1)
        a = lr.free_propagate(lr.free_propagate(u, 0.1, t1), 0.1, t2)
        b = lr.free_propagate(u, 0.1, t1 + t2)
        assert np.abs(a.values - b.values).max() < 1e-12

    @given(seed=st.integers(0, 2**31 - 1), t=st.floats(-5, 5))
    def test_mass_conserved(self, seed, t):
        g = GridSpec(2, 32, 4.0)
        rng = np.random.default_rng(seed)
        u = WaveField(g, rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape))
        m0 = l2_norm_array(u.values, g)
        assert l2_norm_array(lr.free_propagate(u, 0.3, t).values, g) == pytest.approx(m0, rel=1e-12)

    def test_gaussian_beam(self):
        eps = 0.05
        g = GridSpec(1, 2048, 12.0)
        assert math.pi / g.spacing > 12.0 / eps
        u = lr.free_propagate(chirped(g, eps), eps, 0.5)
        assert np.abs(u.values - lr.gaussian_beam(g.axis, eps, 0.5)).max() < 1e-8

    def test_beam_against_fresnel_integral(self):
        eps, t = 0.05, 0.5
        x = np.array([-1.0, 0.0, 0.7, 2.0])
        quad = lr.fresnel_quadrature(lambda y: np.exp(-0.5 * y * y), eps, t, x)
        assert np.abs(quad - lr.gaussian_beam(x, eps, t)).max() < 1e-8


class TestWkb:
    def test_matches_initial_data(self):
        p = make_params(0.01, 1.5, 2)
        g = GridSpec(2, 128, 8.0)
        v = lr.wkb_linear(lr.LinearWkbProfile(p.eps, unit_gaussian), g, 0.0)
        assert np.array_equal(v.values, initial_data(p, unit_gaussian, g).values)

    @pytest.mark.parametrize("t", [0.0, 0.25, 0.5])
    def test_mass(self, t):
        g = GridSpec(2, 256, 12.0)
        v = lr.wkb_linear(lr.LinearWkbProfile(0.01, unit_gaussian), g, t)
        assert l2_norm_array(v.values, g) == pytest.approx(math.sqrt(math.pi), abs=1e-8)

    def test_sup(self):
        g = GridSpec(2, 64, 8.0)
        v = lr.wkb_linear(lr.LinearWkbProfile(0.01, unit_gaussian), g, 0.75)
        # (1-t)^{-n/2} sup|a0| = 0.25^{-1} in two dimensions
        assert np.abs(v.values).max() == pytest.approx(4.0, abs=1e-10)

    def test_focus_rejected(self):
        with pytest.raises(ValueError):
            lr.wkb_linear(lr.LinearWkbProfile(0.01, unit_gaussian), GridSpec(1, 64, 8.0), 1.0)


class TestLinearLayer:
    grid = GridSpec(1, 1024, 12.0)

    def test_zero_at_start(self):
        assert lr.lens_error(unit_gaussian, self.grid, 1e-2, 0.0) < 1e-14

    def test_lens_matches_direct(self):
        eps, g = 0.05, GridSpec(1, 4096, 12.0)
        for t in (0.3, 0.6):
            assert lr.lens_error(unit_gaussian, GridSpec(1, 1024, 12.0), eps, t) == pytest.approx(
                lr.direct_error(unit_gaussian, g, eps, t), rel=1e-6
            )

    def test_slopes(self):
        table = lr.linear_layer_error([1e-2, 1e-3, 1e-4], [0.8, 0.9, 0.95, 0.975], unit_gaussian, self.grid)
        assert table.slope_eps.slope == pytest.approx(1.0, abs=0.15)
        assert table.slope_layer.slope == pytest.approx(-1.0, abs=0.15)

    def test_report_files(self, tmp_path):
        table = lr.linear_layer_error([1e-2, 1e-3], [0.5, 0.8], unit_gaussian, self.grid)
        table.write_csv(tmp_path / "rows.csv", "h")
        table.write_report(tmp_path / "fit.json")
        assert (tmp_path / "rows.csv").read_text().splitlines()[0] == "config_hash,eps,t,l2_error"
        assert "slope_eps" in (tmp_path / "fit.json").read_text()


def test_far_field_sup_at_focus():
    g = GridSpec(1, 2048, 40.0)
    eps = 1e-2
    at_focus = lr.sup_linear(unit_gaussian, g, eps, 1.0)
    # Fraunhofer limit of the unit Gaussian: sup = sqrt(2 pi) / sqrt(2 pi eps)
    assert at_focus == pytest.approx(eps**-0.5, rel=1e-10)
    assert at_focus == pytest.approx(abs(lr.gaussian_beam(np.array(0.0), eps, 1.0)), rel=1e-10)


def test_amplitude_bound():
    g = GridSpec(1, 2048, 40.0)
    cal = lr.focal_samples([1e-1, 3e-2, 1e-2], [4, 2, 1, 0.5, 0.25, -0.25, -0.5, -1, -2])
    val = lr.focal_samples([3e-3, 1e-3, 1e-4], [3, 1.5, 1.2, 1, 0.8, 0.6, 0.3, -0.3, -1.5])
    check = lr.amplitude_bound_check(unit_gaussian, g, cal, val)
    assert check.passed
    assert check.constant > 0
