"""Exact frame changes between the physical, conformal and rescaled equations.

Every map relabels the node array and rescales the grid, so the discrete L2 norm
is preserved to rounding.  Interpolation happens only when two runs on
different grids are compared, once, by spectral resampling.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import nls_solver
from .model import Nonlinearity, PhysParams
from .spectral_grid import FormulationTag, GridSpec, WaveField, l2_norm_array, resample


class Direction(enum.Enum):
    physical_to_conformal = "physical_to_conformal"
    conformal_to_physical = "conformal_to_physical"
    physical_to_rescaled = "physical_to_rescaled"


@dataclass(frozen=True)
class FrameMap:
    direction: Direction
    params: PhysParams
    t_physical: float
    scale: float  # 1-t for the conformal map, eps^gamma for the rescaled one
    conformal_time: float

    @property
    def target_time(self) -> float:
        if self.direction == Direction.physical_to_rescaled:
            return (self.t_physical - 1.0) / self.params.eps**self.params.gamma
        if self.direction == Direction.physical_to_conformal:
            return self.conformal_time
        return self.t_physical

    def kinetic_coefficient(self) -> float:
        """Semiclassical constant of the target equation."""
        if self.direction == Direction.conformal_to_physical:
            return self.params.eps
        # eps^2 / (eps * scale^2) * (dt/dtarget) collapses to eps^{1-gamma}
        return self.params.eps ** (1.0 - self.params.gamma)


def frame_map(direction: Direction, params: PhysParams, t: float) -> FrameMap:
    if not t < 1.0:
        raise ValueError(f"frame maps need t < 1, got {t}")
    d = Direction(direction)
    scale = params.eps**params.gamma if d == Direction.physical_to_rescaled else 1.0 - t
    return FrameMap(d, params, t, scale, params.conformal_time(t))


def _chirp(grid: GridSpec, eps: float, t: float) -> np.ndarray:
    return np.exp(0.5j * grid.radius_sq / (eps * (t - 1.0)))


def _expect(fld: WaveField, tag: FormulationTag) -> None:
    if fld.tag != tag:
        raise ValueError(f"expected a {tag.name} field, got {fld.tag.name}")


def to_conformal(u: WaveField, params: PhysParams, t: float | None = None) -> WaveField:
    """psi(tau, xi) = (1-t)^{n/2} u(t, (1-t) xi) e^{-i|x|^2/(2 eps (t-1))}, tau = eps^gamma/(1-t)."""
    _expect(u, FormulationTag.physical_u)
    t = u.time_stamp if t is None else t
    if not t < 1.0:
        raise ValueError(f"conformal transform needs t < 1, got {t}")
    s = 1.0 - t
    vals = s ** (u.grid.dim / 2) * u.values / _chirp(u.grid, params.eps, t)
    return WaveField(u.grid.scaled(1.0 / s), vals, params.conformal_time(t), FormulationTag.conformal_psi)


def from_conformal(psi: WaveField, params: PhysParams) -> WaveField:
    """Inverse of :func:`to_conformal`; the physical time is 1 - eps^gamma/tau."""
    _expect(psi, FormulationTag.conformal_psi)
    tau = psi.time_stamp
    if not tau > 0:
        raise ValueError("conformal time must be positive")
    t = params.physical_time(tau)
    s = 1.0 - t
    grid = psi.grid.scaled(s)
    vals = s ** (-grid.dim / 2) * psi.values * _chirp(grid, params.eps, t)
    return WaveField(grid, vals, t, FormulationTag.physical_u)


def to_rescaled(u: WaveField, params: PhysParams, t: float | None = None) -> WaveField:
    """phi(s, y) = eps^{k/2} u(1 + eps^gamma s, eps^gamma y), s = (t-1)/eps^gamma."""
    _expect(u, FormulationTag.physical_u)
    t = u.time_stamp if t is None else t
    h = params.eps**params.gamma
    vals = h ** (u.grid.dim / 2) * u.values
    return WaveField(u.grid.scaled(1.0 / h), vals, (t - 1.0) / h, FormulationTag.rescaled_phi)


def from_rescaled(phi: WaveField, params: PhysParams) -> WaveField:
    _expect(phi, FormulationTag.rescaled_phi)
    h = params.eps**params.gamma
    grid = phi.grid.scaled(h)
    return WaveField(grid, h ** (-grid.dim / 2) * phi.values, 1.0 + h * phi.time_stamp, FormulationTag.physical_u)


def conformal_to_rescaled(psi: WaveField, params: PhysParams) -> WaveField:
    """phi(s, y) = (-1/s)^{n/2} psi(-1/s, -y/s) e^{i|y|^2/(2 hbar s)} with s = -1/tau."""
    _expect(psi, FormulationTag.conformal_psi)
    tau = psi.time_stamp
    s = -1.0 / tau
    grid = psi.grid.scaled(1.0 / tau)  # y = -s xi, and -s > 0
    vals = tau ** (grid.dim / 2) * psi.values * np.exp(0.5j * grid.radius_sq / (params.hbar * s))
    return WaveField(grid, vals, s, FormulationTag.rescaled_phi)


# -- cross-validation of the physical and conformal solvers ------------------


@dataclass
class CrossCheckReport:
    t_check: float
    discrepancy: float
    bound_physical: float
    bound_conformal: float
    ratio_physical: float
    ratio_conformal: float

    @property
    def combined_bound(self) -> float:
        return self.bound_physical + self.bound_conformal

    @property
    def passed(self) -> bool:
        return self.discrepancy <= 2.0 * self.combined_bound


def cross_check_formulations(
    params: PhysParams,
    nl: Nonlinearity,
    a0: Callable[..., np.ndarray],
    t_check: float,
    physical_grid: GridSpec,
    conformal_grid: GridSpec,
    dt_physical: float | None = None,
    dt_conformal: float | None = None,
    levels: int = 3,
) -> CrossCheckReport:
    """Evolve both formulations to t_check, compare in the conformal frame.

    The physical result is relabelled exactly, then spectrally resampled once
    onto the conformal run's grid.  Each side carries its Richardson bound.
    """
    if not t_check < 1.0 - 0.5 * params.t0:
        raise ValueError("t_check must precede 1 - eps^gamma/2")
    tau = params.conformal_time(t_check)
    phys_dt = dt_physical or nls_solver.choose_dt(
        FormulationTag.physical_u, params, physical_grid, 0.0, t_check
    )
    conf_dt = dt_conformal or nls_solver.choose_dt(
        FormulationTag.conformal_psi, params, conformal_grid, params.t0, tau
    )
    u0 = nls_solver.initial_data(params, a0, physical_grid, FormulationTag.physical_u)
    p0 = nls_solver.initial_data(params, a0, conformal_grid, FormulationTag.conformal_psi)
    phys = nls_solver.self_convergence(
        nls_solver.EvolutionSpec(FormulationTag.physical_u, params, nl, 0.0, t_check, phys_dt),
        u0, levels=levels,
    )
    conf = nls_solver.self_convergence(
        nls_solver.EvolutionSpec(FormulationTag.conformal_psi, params, nl, params.t0, tau, conf_dt),
        p0, levels=levels,
    )
    mapped = resample(to_conformal(phys.finest, params, t_check), conformal_grid, outside="zero")
    disc = l2_norm_array(mapped.values - conf.finest.values, conformal_grid)
    return CrossCheckReport(t_check, disc, phys.error_bound, conf.error_bound, phys.ratio, conf.ratio)


def time_map_monotone(params: PhysParams, samples: int = 1000) -> bool:
    t = np.linspace(0.0, 1.0, samples, endpoint=False)
    tau = params.eps**params.gamma / (1.0 - t)
    return bool(np.all(np.diff(tau) > 0))


def relative_mass_change(before: WaveField, after: WaveField) -> float:
    a = l2_norm_array(before.values, before.grid)
    b = l2_norm_array(after.values, after.grid)
    return abs(b - a) / a if a else math.nan
