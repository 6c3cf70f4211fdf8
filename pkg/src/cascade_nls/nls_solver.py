"""Strang split-step Fourier integrator for the three NLS formulations.

physical_u     i eps u_t   + eps^2/2 lap u   = f(eps^k |u|^2) u
conformal_psi  i hbar p_t  + hbar^2/2 lap p  = t^{-2} f(t^n |p|^2) p
rescaled_phi   i hbar q_t  + hbar^2/2 lap q  = f(|q|^2) q

Each step is  N(h/2) K(h) N(h/2).  The kinetic factor is the exact Fourier
multiplier; the nonlinear factor is an exact phase rotation because the
(2/3-filtered) density is invariant under it.  For the conformal equation the
time-dependent coefficient is frozen at the midpoint of each half step.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import model
from .model import Nonlinearity, PhysParams
from .spectral_grid import (
    BOX_DECAY_TOL,
    FormulationTag,
    GridSpec,
    WaveField,
    boundary_max,
    check_box_decay,
    fft,
    ifft,
    l2_norm_array,
    sample,
    write_cfd1,
)

C1 = 0.5
C2 = 0.01
BLOWUP_SUP = 1e6


class SolverAbort(RuntimeError):
    def __init__(self, message: str, step: int, time: float):
        super().__init__(f"{message} (step {step}, t={time:.6g})")
        self.step = step
        self.time = time


@dataclass(frozen=True)
class EvolutionSpec:
    formulation: FormulationTag
    params: PhysParams
    nl: Nonlinearity
    t_start: float
    t_end: float
    dt: float
    record_times: tuple[float, ...] = ()
    dealias: bool = True

    def __post_init__(self):
        object.__setattr__(self, "formulation", FormulationTag(self.formulation))
        rec = tuple(float(t) for t in (self.record_times or (self.t_end,)))
        object.__setattr__(self, "record_times", rec)
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_start < self.t_end:
            raise ValueError("t_start must precede t_end")
        if list(rec) != sorted(rec):
            raise ValueError("record_times must be sorted")
        tol = 1e-12 * max(1.0, abs(self.t_end))
        if rec[0] < self.t_start - tol or rec[-1] > self.t_end + tol:
            raise ValueError("record_times must lie in [t_start, t_end]")
        if self.formulation == FormulationTag.auxiliary:
            raise ValueError("auxiliary fields cannot be evolved")
        if (
            self.formulation == FormulationTag.conformal_psi
            and self.params.n_dim == 1
            and self.t_start <= 0
        ):
            raise ValueError("conformal runs with n=1 must start at t > 0")


@dataclass
class Trajectory:
    snapshots: list[WaveField]
    times: list[float] = field(default_factory=list)
    mass: list[float] = field(default_factory=list)
    energy: list[float] = field(default_factory=list)
    sup_norm: list[float] = field(default_factory=list)
    boundary: list[float] = field(default_factory=list)  # largest modulus on the box boundary
    steps: int = 0

    def final(self) -> WaveField:
        return self.snapshots[-1]

    def boundary_ok(self, tol: float = BOX_DECAY_TOL) -> bool:
        """True when every recorded snapshot is still negligible on the periodic box boundary."""
        return all(b <= tol for b in self.boundary)

    def write_csv(self, path: str | Path, config_hash: str = "") -> None:
        rows = zip(self.times, self.mass, self.energy, self.sup_norm)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["config_hash", "t", "mass", "energy", "sup_norm"])
            for t, m, e, s in rows:
                w.writerow([config_hash, repr(t), repr(m), repr(e), repr(s)])

    def dump_fields(self, directory: str | Path, stem: str = "snap") -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        out = []
        for i, snap in enumerate(self.snapshots):
            p = directory / f"{stem}_{i:04d}.cfd"
            write_cfd1(p, snap)
            out.append(p)
        return out


def semiclassical_constant(formulation: FormulationTag, params: PhysParams) -> float:
    return params.eps if formulation == FormulationTag.physical_u else params.hbar


def choose_dt(
    formulation: FormulationTag,
    params: PhysParams,
    grid: GridSpec,
    t_start: float,
    t_end: float,
    c1: float = C1,
    c2: float = C2,
) -> float:
    """dt = min(c1 dx^2/kappa, c2 * span).

    ``span`` is 1 - t_end for the physical equation (distance to the focus) and
    the integration length for the other two.
    """
    kappa = semiclassical_constant(formulation, params)
    if formulation == FormulationTag.physical_u:
        span = 1.0 - t_end if t_end < 1.0 else t_end - t_start
    else:
        span = t_end - t_start
    return min(c1 * grid.spacing**2 / kappa, c2 * span)


def initial_data(
    params: PhysParams,
    a0: Callable[..., np.ndarray],
    grid: GridSpec,
    formulation: FormulationTag = FormulationTag.physical_u,
) -> WaveField:
    """a0 e^{-i|x|^2/(2 eps)} at t=0, or plain a0 at conformal time t0."""
    amp = sample(grid, a0)
    check_box_decay(amp.values, "initial amplitude")
    formulation = FormulationTag(formulation)
    if formulation == FormulationTag.physical_u:
        vals = amp.values * np.exp(-0.5j * grid.radius_sq / params.eps)
        return WaveField(grid, vals, 0.0, formulation)
    if formulation == FormulationTag.conformal_psi:
        return WaveField(grid, amp.values, params.t0, formulation)
    raise ValueError(f"no initial data rule for {formulation.name}")


def _potential(spec: EvolutionSpec) -> Callable[[np.ndarray, float], np.ndarray]:
    p, nl = spec.params, spec.nl
    if spec.formulation == FormulationTag.physical_u:
        ek = p.eps**p.k
        return lambda rho, t: nl.f(ek * rho)
    if spec.formulation == FormulationTag.conformal_psi:
        n = p.n_dim
        return lambda rho, t: model.conformal_potential(nl, t, n, rho)
    return lambda rho, t: nl.f(rho)


def _density(values: np.ndarray, grid: GridSpec, dealias: bool) -> np.ndarray:
    rho = np.abs(values) ** 2
    if not dealias:
        return rho
    axes = tuple(range(rho.ndim))
    return np.fft.irfftn(np.fft.rfftn(rho, axes=axes) * _rmask(grid), s=rho.shape, axes=axes)


_RMASK_CACHE: dict[GridSpec, np.ndarray] = {}


def _rmask(grid: GridSpec) -> np.ndarray:
    m = _RMASK_CACHE.get(grid)
    if m is None:
        full = grid.dealias_mask
        m = full[..., : grid.points_per_axis // 2 + 1]
        _RMASK_CACHE[grid] = m
    return m


def hamiltonian(fld: WaveField, params: PhysParams, nl: Nonlinearity) -> float:
    """Energy functional matching the field's formulation (time dependent for psi)."""
    tag = fld.tag
    if tag == FormulationTag.physical_u:
        return model.energy(fld, params, nl)
    g = fld.grid
    kin = float(np.sum(g.k_squared * np.abs(fft(fld.values)) ** 2) / fld.values.size)
    kin *= 0.5 * params.hbar**2 * g.cell_volume
    rho = np.abs(fld.values) ** 2
    if tag == FormulationTag.rescaled_phi:
        pot = nl.potential(rho)
    else:
        t, n = fld.time_stamp, params.n_dim
        pot = nl.potential(t**n * rho) / t ** (n + 2)
    return kin + float(np.sum(pot) * g.cell_volume)


def evolve(spec: EvolutionSpec, init: WaveField, diagnostics: bool = True) -> Trajectory:
    """Integrate from ``init`` and return snapshots at ``spec.record_times``."""
    if init.tag != spec.formulation:
        raise ValueError(f"initial field is {init.tag.name}, spec is {spec.formulation.name}")
    if not math.isclose(init.time_stamp, spec.t_start, rel_tol=1e-12, abs_tol=1e-14):
        raise ValueError(f"initial time {init.time_stamp} != t_start {spec.t_start}")
    grid = init.grid
    kappa = semiclassical_constant(spec.formulation, spec.params)
    potential = _potential(spec)
    k2 = grid.k_squared
    kin_cache: dict[float, np.ndarray] = {}

    def kinetic(h: float) -> np.ndarray:
        m = kin_cache.get(h)
        if m is None:
            m = np.exp(-0.5j * kappa * h * k2)
            kin_cache[h] = m
        return m

    psi = init.values.copy()
    t = spec.t_start
    rho = _density(psi, grid, spec.dealias)
    traj = Trajectory(snapshots=[])
    step = 0

    def record(time: float) -> None:
        snap = WaveField(grid, psi.copy(), time, spec.formulation)
        traj.snapshots.append(snap)
        traj.times.append(time)
        if diagnostics:
            traj.mass.append(l2_norm_array(psi, grid) ** 2)
            traj.energy.append(hamiltonian(snap, spec.params, spec.nl))
            traj.sup_norm.append(float(np.abs(psi).max()))
            traj.boundary.append(boundary_max(psi))

    for target in spec.record_times:
        span = target - t
        nsteps = max(int(math.ceil(span / spec.dt - 1e-9)), 0)
        h = span / nsteps if nsteps else 0.0
        for i in range(nsteps):
            t_a = t + i * h
            psi *= np.exp((-0.5j * h / kappa) * potential(rho, t_a + 0.25 * h))
            psi = ifft(fft(psi) * kinetic(h))
            rho = _density(psi, grid, spec.dealias)
            psi *= np.exp((-0.5j * h / kappa) * potential(rho, t_a + 0.75 * h))
            step += 1
            sup = math.sqrt(float(np.max(np.abs(psi) ** 2)))
            if not math.isfinite(sup):
                raise SolverAbort("non-finite value", step, t_a + h)
            if sup > BLOWUP_SUP:
                raise SolverAbort("blowup suspected: sup-norm above 1e6", step, t_a + h)
        t = target
        record(t)
    traj.steps = step
    return traj


def run_to(spec: EvolutionSpec, init: WaveField) -> WaveField:
    return evolve(spec, init, diagnostics=False).final()


@dataclass
class SelfConvergence:
    dts: list[float]
    differences: list[float]  # ||psi_dt - psi_dt/2||, ||psi_dt/2 - psi_dt/4||
    finest: WaveField
    ratio: float
    order: float
    error_bound: float  # Richardson estimate of the error of ``finest``


def self_convergence(
    spec: EvolutionSpec, init: WaveField, order: int = 2, levels: int = 3
) -> SelfConvergence:
    """Runs at dt, dt/2, ... and the Richardson error estimate of the finest run."""
    runs, dts = [], []
    for lev in range(levels):
        dt = spec.dt / 2**lev
        s = EvolutionSpec(
            spec.formulation, spec.params, spec.nl, spec.t_start, spec.t_end, dt,
            (spec.t_end,), spec.dealias,
        )
        runs.append(run_to(s, init))
        dts.append(dt)
    diffs = [
        l2_norm_array(a.values - b.values, init.grid) for a, b in zip(runs[:-1], runs[1:])
    ]
    ratio = diffs[-2] / diffs[-1] if len(diffs) >= 2 and diffs[-1] > 0 else math.nan
    observed = math.log2(ratio) if ratio > 0 else math.nan
    bound = diffs[-1] / (2**order - 1)
    return SelfConvergence(dts, diffs, runs[-1], ratio, observed, bound)


def free_multiplier(grid: GridSpec, kappa: float, t: float) -> np.ndarray:
    return np.exp(-0.5j * kappa * t * grid.k_squared)


def time_reversal_defect(spec: EvolutionSpec, init: WaveField) -> float:
    """Sup error after evolving one step forward and one step back."""
    fwd = run_to(
        EvolutionSpec(spec.formulation, spec.params, spec.nl, spec.t_start,
                      spec.t_start + spec.dt, spec.dt, (), spec.dealias),
        init,
    )
    back = _step_backward(spec, fwd)
    return float(np.max(np.abs(back - init.values)))


def _step_backward(spec: EvolutionSpec, fld: WaveField) -> np.ndarray:
    # one step with h = -dt starting from t_start + dt
    grid = fld.grid
    kappa = semiclassical_constant(spec.formulation, spec.params)
    potential = _potential(spec)
    h = -spec.dt
    t_a = fld.time_stamp
    psi = fld.values.copy()
    rho = _density(psi, grid, spec.dealias)
    psi *= np.exp((-0.5j * h / kappa) * potential(rho, t_a + 0.25 * h))
    psi = ifft(fft(psi) * np.exp(-0.5j * kappa * h * grid.k_squared))
    rho = _density(psi, grid, spec.dealias)
    psi *= np.exp((-0.5j * h / kappa) * potential(rho, t_a + 0.75 * h))
    return psi


def record_grid(t_start: float, t_end: float, count: int) -> Sequence[float]:
    return tuple(np.linspace(t_start, t_end, count)[1:])
