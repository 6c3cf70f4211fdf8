import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cascade_nls import nls_solver
from cascade_nls.linear_reference import free_propagate
from cascade_nls.model import TheoremRangeWarning, builtin_nonlinearity, make_params, zero_nonlinearity
from cascade_nls.nls_solver import EvolutionSpec, SolverAbort, choose_dt, evolve, initial_data
from cascade_nls.spectral_grid import FormulationTag, GridSpec, WaveField, l2_norm_array, read_cfd1

from conftest import unit_gaussian

PHYS = FormulationTag.physical_u
CONF = FormulationTag.conformal_psi
CUBIC = builtin_nonlinearity("cubic")


def params_1d(eps=0.1):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TheoremRangeWarning)
        return make_params(eps, 0.5, 1)


class TestInitialData:
    def test_origin_value(self):
        p = make_params(0.01, 1.5, 2)
        u = initial_data(p, unit_gaussian, GridSpec(2, 64, 8.0))
        assert u.values[32, 32] == pytest.approx(1.0)

    def test_chirp_keeps_modulus(self):
        p = make_params(0.01, 1.5, 2)
        g = GridSpec(2, 64, 8.0)
        u = initial_data(p, unit_gaussian, g)
        a = unit_gaussian(*g.coords)
        assert np.allclose(np.abs(u.values), a, rtol=1e-15, atol=0)
        assert l2_norm_array(u.values, g) == pytest.approx(l2_norm_array(a, g), rel=1e-15)

    def test_gaussian_mass(self):
        p = make_params(0.01, 1.5, 2)
        u = initial_data(p, unit_gaussian, GridSpec(2, 256, 12.0))
        assert l2_norm_array(u.values, u.grid) == pytest.approx(math.sqrt(math.pi), abs=1e-8)

    def test_conformal_data_starts_at_t0(self):
        p = make_params(0.01, 1.5, 2)
        psi = initial_data(p, unit_gaussian, GridSpec(2, 64, 8.0), CONF)
        assert psi.time_stamp == p.t0 and np.all(psi.values.imag == 0)

    def test_undecayed_profile_rejected(self):
        p = make_params(0.01, 1.5, 2)
        with pytest.raises(ValueError):
            initial_data(p, unit_gaussian, GridSpec(2, 32, 2.0))


class TestSpec:
    p = make_params(0.1, 1.5, 2)

    def test_defaults_record_end(self):
        s = EvolutionSpec(PHYS, self.p, CUBIC, 0.0, 0.5, 0.01)
        assert s.record_times == (0.5,)

    @pytest.mark.parametrize(
        "kw",
        [dict(dt=0.0), dict(t_end=-1.0), dict(record_times=(0.3, 0.2)), dict(record_times=(0.7,)),
         dict(formulation=FormulationTag.auxiliary)],
    )
    def test_rejects(self, kw):
        base = dict(formulation=PHYS, params=self.p, nl=CUBIC, t_start=0.0, t_end=0.5, dt=0.01)
        with pytest.raises(ValueError):
            EvolutionSpec(**(base | kw))

    def test_one_dimensional_conformal_needs_positive_start(self):
        with pytest.raises(ValueError):
            EvolutionSpec(CONF, params_1d(), CUBIC, 0.0, 0.5, 0.01)

    def test_dt_rule(self):
        g = GridSpec(2, 64, 4.0)
        dt = choose_dt(PHYS, self.p, g, 0.0, 0.9)
        assert dt == pytest.approx(min(0.5 * g.spacing**2 / 0.1, 0.01 * 0.1))


def test_linear_flow_is_exact():
    p = params_1d(0.05)
    g = GridSpec(1, 512, 12.0)
    u0 = initial_data(p, unit_gaussian, g)
    for dt in (0.1, 0.013):
        u = evolve(EvolutionSpec(PHYS, p, zero_nonlinearity(), 0.0, 0.6, dt), u0).final()
        assert np.abs(u.values - free_propagate(u0, p.eps, 0.6).values).max() < 1e-10


def test_strang_second_order():
    p = params_1d(0.1)
    g = GridSpec(1, 256, 12.0)
    spec = EvolutionSpec(PHYS, p, CUBIC, 0.0, 0.5, 0.02)
    sc = nls_solver.self_convergence(spec, initial_data(p, lambda x: 2 * unit_gaussian(x), g))
    assert sc.ratio == pytest.approx(4.0, abs=0.5)
    assert sc.error_bound == pytest.approx(sc.differences[-1] / 3)


def test_mass_and_energy_diagnostics():
    p = make_params(0.05, 1.5, 2)
    g = GridSpec(2, 128, 4.0)
    u0 = initial_data(p, lambda x, y: np.exp(-(x * x + y * y) / (2 * 0.5**2)), g)
    traj = evolve(EvolutionSpec(PHYS, p, CUBIC, 0.0, 0.5, 1e-3, nls_solver.record_grid(0, 0.5, 6)), u0)
    assert len(traj.times) == len(traj.mass) == len(traj.snapshots) == 5
    m = np.array(traj.mass)
    assert np.abs(m / m[0] - 1).max() < 1e-10
    e = np.array(traj.energy)
    assert np.abs(e / e[0] - 1).max() < 1e-4


@given(seed=st.integers(0, 2**31 - 1), dt=st.floats(1e-3, 5e-2))
def test_time_reversal(seed, dt):
    rng = np.random.default_rng(seed)
    g = GridSpec(2, 32, 5.0)
    p = make_params(0.1, 1.5, 2)
    vals = np.exp(-0.5 * g.radius_sq) * (1 + 0.3 * rng.normal(size=g.shape))
    for tag, t in ((PHYS, 0.2), (CONF, p.t0 + 0.1)):
        init = WaveField(g, vals, t, tag)
        spec = EvolutionSpec(tag, p, CUBIC, t, t + dt, dt)
        assert nls_solver.time_reversal_defect(spec, init) < 1e-9


def test_blowup_aborts():
    p = make_params(0.1, 1.5, 2)
    g = GridSpec(2, 32, 8.0)
    u0 = initial_data(p, lambda x, y: 2e6 * np.exp(-(x * x + y * y)), g)
    with pytest.raises(SolverAbort):
        evolve(EvolutionSpec(PHYS, p, CUBIC, 0.0, 0.1, 0.01), u0)


def test_trajectory_outputs(tmp_path):
    p = make_params(0.1, 1.5, 2)
    g = GridSpec(2, 32, 8.0)
    psi0 = initial_data(p, unit_gaussian, g, CONF)
    traj = evolve(EvolutionSpec(CONF, p, CUBIC, p.t0, 0.5, 0.01, (0.3, 0.5)), psi0)
    traj.write_csv(tmp_path / "t.csv", "abc")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "config_hash,t,mass,energy,sup_norm"
    assert all(line.startswith("abc,") for line in lines[1:])
    paths = traj.dump_fields(tmp_path / "f")
    back = read_cfd1(paths[-1])
    assert back.time_stamp == pytest.approx(0.5) and np.array_equal(back.values, traj.final().values)


def test_runs_are_deterministic():
    p = make_params(0.1, 1.5, 2)
    g = GridSpec(2, 32, 8.0)
    spec = EvolutionSpec(CONF, p, CUBIC, p.t0, 0.4, 0.01)
    a = nls_solver.run_to(spec, initial_data(p, unit_gaussian, g, CONF))
    b = nls_solver.run_to(spec, initial_data(p, unit_gaussian, g, CONF))
    assert np.array_equal(a.values, b.values)


def test_boundary_diagnostic():
    # after the focus the chirped Gaussian spreads like |1 - t| and reaches the box edge
    p = params_1d(0.1)
    g = GridSpec(1, 512, 6.5)
    u0 = initial_data(p, unit_gaussian, g)
    early = evolve(EvolutionSpec(PHYS, p, zero_nonlinearity(), 0.0, 0.5, 0.01), u0)
    late = evolve(EvolutionSpec(PHYS, p, zero_nonlinearity(), 0.0, 3.0, 0.01, (0.5, 3.0)), u0)
    assert early.boundary_ok() and len(late.boundary) == 2
    assert not late.boundary_ok()
