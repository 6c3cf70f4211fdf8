import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cascade_nls.model import (
    TheoremRangeWarning,
    builtin_nonlinearity,
    conformal_potential,
    energy,
    layer_exponent,
    make_params,
    mass,
    omega_prediction,
    params_from_hbar,
    zero_nonlinearity,
)
from cascade_nls.spectral_grid import FormulationTag, GridSpec, WaveField, sample

from conftest import unit_gaussian


class TestParams:
    def test_reference_values(self):
        p = make_params(1e-3, 1.5, 2)
        assert (p.gamma, p.alpha, p.beta) == (0.75, 1.5, 0.5)
        assert p.hbar == pytest.approx(0.177828, rel=1e-5)
        assert p.t0 == pytest.approx(5.6234e-3, rel=1e-4)
        assert p.supercritical

    def test_critical_needs_override(self):
        with pytest.raises(ValueError):
            make_params(0.01, 2.0, 2)
        p = make_params(0.01, 2.0, 2, allow_critical=True)
        assert p.gamma == 1.0 and not p.supercritical

    def test_three_dimensions(self):
        p = make_params(0.1, 1.2, 3)
        assert p.gamma == pytest.approx(0.4)
        assert p.beta == pytest.approx(0.1)

    def test_one_dimension_warns(self):
        with pytest.warns(TheoremRangeWarning):
            make_params(0.1, 0.5, 1)

    @pytest.mark.parametrize("bad", [dict(eps=0.0), dict(eps=2.0), dict(n_dim=0), dict(sigma=0), dict(k=-1.0)])
    def test_invalid(self, bad):
        kw = dict(eps=0.1, k=1.5, n_dim=2, sigma=1) | bad
        with pytest.raises(ValueError):
            make_params(**kw)

    def test_hbar_parameterisation(self):
        p = params_from_hbar(0.1, 1.5, 2)
        assert p.hbar == pytest.approx(0.1, rel=1e-12)

    def test_time_maps_invert(self):
        p = make_params(1e-2, 1.5, 2)
        for t in (0.0, 0.3, 0.9, 0.999):
            assert p.physical_time(p.conformal_time(t)) == pytest.approx(t, abs=1e-12)


@given(
    eps=st.floats(1e-6, 1.0),
    n=st.integers(2, 4),
    frac=st.floats(0.05, 0.95),
)
def test_rederived_scalars(eps, n, frac):
    k = 1.0 + frac * (n - 1.0)
    p = make_params(eps, k, n)
    gamma = k / n
    assert p.hbar == pytest.approx(eps ** (1 - gamma), rel=1e-14)
    assert p.t0 == pytest.approx(eps**gamma, rel=1e-14)
    assert p.beta == pytest.approx((k - 1) / (n - 1), rel=1e-14)


@given(n=st.integers(2, 5), frac=st.floats(0.05, 0.95), j=st.integers(1, 50))
def test_exponent_ladder(n, frac, j):
    p = make_params(0.1, 1.0 + frac * (n - 1.0), n)
    assert layer_exponent(p, j) < layer_exponent(p, j + 1) < p.gamma


class TestLayers:
    p = make_params(0.01, 1.5, 2)

    def test_first_layer_is_beta(self):
        assert layer_exponent(self.p, 1) == pytest.approx(0.5)

    def test_second_layer(self):
        assert layer_exponent(self.p, 2) == pytest.approx(2 / 3)

    def test_limit_is_gamma(self):
        assert abs(layer_exponent(self.p, 1000) - 0.75) < 1e-3

    def test_omega_first_value(self):
        assert omega_prediction(self.p, 1) == pytest.approx(0.625)


class TestNonlinearity:
    def test_cubic(self):
        nl = builtin_nonlinearity("cubic")
        assert nl.f(np.array(1.0)) == 1.0
        assert nl.f_prime(np.array(0.0)) == 1.0
        assert nl.f_second(np.array(0.0)) == 0.0

    def test_saturated(self):
        nl = builtin_nonlinearity("saturated_cubic")
        assert nl.f(np.array(0.0)) == 0.0
        assert nl.f_prime(np.array(0.0)) == 1.0
        assert nl.f(np.array(1.0)) == 0.5

    @pytest.mark.parametrize("label", ["cubic", "saturated_cubic"])
    def test_positive_derivative(self, label):
        nl = builtin_nonlinearity(label)
        nl.check(y_max=4.0)
        assert np.all(nl.f_prime(np.linspace(0, 4, 401)) > 0)

    @pytest.mark.parametrize("label", ["cubic", "saturated_cubic"])
    def test_potential_derivative_is_f(self, label):
        nl = builtin_nonlinearity(label)
        y = np.linspace(0.1, 3.0, 30)
        h = 1e-6
        dG = (nl.potential(y + h) - nl.potential(y - h)) / (2 * h)
        assert np.abs(dG - nl.f(y)).max() < 1e-7

    def test_unknown_label(self):
        with pytest.raises(ValueError):
            builtin_nonlinearity("quintic")

    def test_zero_fails_check(self):
        with pytest.raises(ValueError):
            zero_nonlinearity().check()

    def test_conformal_potential_small_time_continuation(self):
        nl = builtin_nonlinearity("saturated_cubic")
        y = np.array([0.5, 1.0])
        near = conformal_potential(nl, 1e-7, 2, y)
        tiny = conformal_potential(nl, 1e-9, 2, y)
        assert np.allclose(near, tiny, rtol=1e-6)


class TestConserved:
    def test_zero_field(self):
        g = GridSpec(2, 32, 4.0)
        assert mass(WaveField(g, np.zeros(g.shape))) == 0.0

    def test_linear_energy_is_kinetic(self):
        g = GridSpec(1, 128, 10.0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TheoremRangeWarning)
            p = make_params(0.5, 0.5, 1)
        u = sample(g, unit_gaussian, FormulationTag.physical_u)
        # 1/2 ||eps u'||^2 for e^{-x^2/2}: eps^2/2 * sqrt(pi)/2
        assert energy(u, p, zero_nonlinearity()) == pytest.approx(0.25 * math.sqrt(math.pi) * 0.25, rel=1e-10)

    def test_chirped_energy_limit(self):
        # energy of a0 e^{-i|x|^2/2eps} tends to 1/2 ||x a0||^2 = pi/2 in 2D as eps -> 0.
        # Grids are sized so the |x|/eps chirp stays below the Nyquist wavenumber.
        nl = builtin_nonlinearity("cubic")
        gaps = []
        for eps, n, half in [(1e-1, 256, 6.0), (3e-2, 1024, 5.5), (1e-2, 2048, 5.5)]:
            g = GridSpec(2, n, half)
            assert math.pi / g.spacing > half / eps
            u = sample(g, lambda x, y: unit_gaussian(x, y) * np.exp(-0.5j * (x * x + y * y) / eps),
                       FormulationTag.physical_u)
            gaps.append(abs(energy(u, make_params(eps, 1.5, 2), nl) / (math.pi / 2) - 1.0))
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[-1] < 0.05
