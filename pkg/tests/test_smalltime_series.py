import numpy as np
import pytest

from cascade_nls import formal_cascade as fc
from cascade_nls import smalltime_series as sts
from cascade_nls.fitting import first_crossing, loglog_fit
from cascade_nls.linear_reference import LinearWkbProfile, wkb_linear
from cascade_nls.model import builtin_nonlinearity, make_params
from cascade_nls.spectral_grid import GridSpec

from conftest import unit_gaussian

CUBIC = builtin_nonlinearity("cubic")
GRID = GridSpec(2, 128, 8.0)  # the origin and x = 1 are nodes
REF = make_params(1e-2, 1.5, 2)
ORIGIN = (64, 64)


@pytest.fixture(scope="module")
def coeffs():
    return sts.compute_coeffs(unit_gaussian, REF, CUBIC, GRID)


@pytest.fixture(scope="module")
def stack():
    return fc.build_stack(unit_gaussian, REF, 2, GRID)


@pytest.fixture(scope="module")
def limit():
    lp = sts.LimitPhase(unit_gaussian, REF, CUBIC, GridSpec(2, 64, 8.0))
    lp.prepare([1 / 16, 1 / 8])
    return lp


class TestCoefficients:
    # For the unit Gaussian in two dimensions with f(y) = y:
    # phi_1 = -|a0|^2, a_1 = a0 lap(phi_1)/(2n)... evaluated at the origin below.
    def test_phi1_origin(self, coeffs):
        assert coeffs.phi1.values[ORIGIN] == pytest.approx(-1.0, abs=1e-12)

    def test_a1_origin(self, coeffs):
        assert coeffs.a1[ORIGIN] == pytest.approx(-1.0, abs=1e-10)

    def test_phi2_origin(self, coeffs):
        assert coeffs.phi2.values[ORIGIN] == pytest.approx(2.0 / 3.0, abs=1e-10)

    def test_phi1_shape(self, coeffs):
        assert np.allclose(coeffs.phi1.values, -np.exp(-GRID.radius_sq), atol=1e-15)

    def test_one_dimension_rejected(self):
        with pytest.warns(Warning):
            p = make_params(0.1, 0.5, 1)
        with pytest.raises(ValueError):
            sts.compute_coeffs(unit_gaussian, p, CUBIC, GridSpec(1, 64, 8.0))


def test_remainder_orders():
    fit = sts.series_remainder_order(unit_gaussian, REF, CUBIC, [0.02, 0.04, 0.08, 0.16], GridSpec(2, 64, 8.0))
    for s in (0, 1):
        assert fit.first[s].slope == pytest.approx(3.0, abs=0.25)
        assert fit.second[s].slope == pytest.approx(5.0, abs=0.4)
        assert fit.amplitude[s].slope == pytest.approx(4.0, abs=0.3)
    assert fit.phi2_origin_fit == pytest.approx(fit.phi2_origin, rel=0.05)


def test_remainder_needs_geometric_times():
    with pytest.raises(ValueError):
        sts.series_remainder_order(unit_gaussian, REF, CUBIC, [0.02, 0.04, 0.06, 0.08], GridSpec(2, 64, 8.0))


class TestCascadeMatch:

    @pytest.mark.parametrize("tau", [0.05, 0.2, 0.5])
    def test_first_term_identical(self, stack, coeffs, tau):
        d1, _ = sts.cascade_mismatch(stack, coeffs, tau)
        assert d1 < 1e-12

    def test_second_term_differs(self, stack, coeffs):
        # the cascade keeps only the eikonal part of the second coefficient
        tau = 0.5
        _, d2 = sts.cascade_mismatch(stack, coeffs, tau)
        assert d2 > 1e-3 * tau**3


class TestLimitPhase:

    def test_series_below_switch(self, limit):
        assert np.array_equal(limit(0.01), limit.coeffs.phase(0.01, 2))

    def test_switch_is_continuous(self, limit):
        below, above = limit(sts.SERIES_SWITCH * (1 - 1e-9)), limit(sts.SERIES_SWITCH)
        assert np.abs(below - above).max() < 1e-6

    def test_phase_shift_halves_with_lambda(self, limit):
        p = REF
        s8 = sts.phase_shift_sup(limit, 1 - 8 * p.t0)
        s16 = sts.phase_shift_sup(limit, 1 - 16 * p.t0)
        assert s16 / s8 == pytest.approx(0.5, rel=0.2)

    def test_onset_exponent(self):
        eps_list = [1e-2, 1e-3, 1e-4]
        onsets = []
        for e in eps_list:
            p = make_params(e, 1.5, 2)
            lp = sts.LimitPhase(unit_gaussian, p, CUBIC, GridSpec(2, 128, 8.0))
            taus = np.geomspace(p.t0, 0.5, 60)
            lp.prepare(taus)
            shifts = [sts.phase_shift_sup(lp, p.physical_time(tau)) for tau in taus]
            onsets.append(p.t0 / first_crossing(taus, shifts, 1.0))
        assert loglog_fit(eps_list, onsets).slope == pytest.approx(REF.beta, abs=0.05)

    @pytest.mark.parametrize("t", [0.0, 0.5, 0.75])
    def test_modulus_is_wkb_modulus(self, limit, t):
        g = GridSpec(2, 128, 8.0)
        u = sts.theorem_approximant(limit, t, g)
        w = wkb_linear(LinearWkbProfile(REF.eps, unit_gaussian), g, t)
        assert np.abs(np.abs(u.values) - np.abs(w.values)).max() < 1e-12

    def test_focus_rejected(self, limit):
        with pytest.raises(ValueError):
            sts.theorem_approximant(limit, 1.0, GRID)
