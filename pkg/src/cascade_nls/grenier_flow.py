"""Phase/amplitude (hydrodynamic) form of the conformal equation.

With psi = a e^{i phi/hbar}, conformal time t and c(t, y) = t^{-2} f(t^n y):

    phi_t + 1/2 |grad phi|^2 + c(t, |a|^2) = 0
    a_t + grad phi . grad a + 1/2 a lap phi = i hbar/2 lap a

and, for v = grad phi,

    v_t + v . grad v + 2 t^{n-2} f'(t^n |a|^2) Re(conj(a) grad a) = 0.

hbar = 0 gives the limit system, which starts at t = 0 for n >= 2 because
c(t, y) extends continuously by t^{n-2} y f'(0).  Space derivatives are
spectral, time stepping is classical RK4.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import model
from .model import Nonlinearity, PhysParams
from .spectral_grid import (
    FormulationTag,
    GridSpec,
    RealField,
    WaveField,
    divergence_array,
    gradient_array,
    hs_norm_array,
    l2_norm_array,
    laplacian_array,
    sample,
)

GRADIENT_LIMIT = 1e3
GROWTH_LIMIT = 10.0
# Largest Fourier coefficient outside the central 2/3 of modes, relative to the peak.
TAIL_LIMIT = 1e-5


class LifespanReached(RuntimeError):
    """The gradient monitor fired: the smooth solution is about to break down."""

    def __init__(self, last_time: float, states: list["HydroState"]):
        super().__init__(
            f"approaching lifespan T after t={last_time:.6g}: sup|grad v| above "
            f"{GRADIENT_LIMIT:g} or spectral tail above {TAIL_LIMIT:g}"
        )
        self.last_time = last_time
        self.states = states


class HydroAbort(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class HydroState:
    a_re: RealField
    a_im: RealField
    phi: RealField
    time: float
    hbar: float

    @property
    def grid(self) -> GridSpec:
        return self.phi.grid

    @property
    def a(self) -> np.ndarray:
        return self.a_re.values + 1j * self.a_im.values

    def velocity(self) -> list[np.ndarray]:
        return gradient_array(self.phi.values, self.grid)

    def amplitude_mass(self) -> float:
        return l2_norm_array(self.a, self.grid) ** 2

    @classmethod
    def build(cls, grid: GridSpec, a: np.ndarray, phi: np.ndarray, time: float, hbar: float) -> "HydroState":
        a = np.asarray(a, dtype=complex)
        return cls(RealField(grid, a.real.copy()), RealField(grid, a.imag.copy()), RealField(grid, np.asarray(phi, float)), time, hbar)


def initial_state(a0: Callable[..., np.ndarray], grid: GridSpec, time: float, hbar: float) -> HydroState:
    return HydroState.build(grid, sample(grid, a0).values, np.zeros(grid.shape), time, hbar)


def reconstruct_psi(state: HydroState) -> WaveField:
    """a e^{i phi/hbar}."""
    if state.hbar <= 0:
        raise ValueError("reconstruction needs hbar > 0")
    vals = state.a * np.exp(1j * state.phi.values / state.hbar)
    return WaveField(state.grid, vals, state.time, FormulationTag.conformal_psi)


# -- right-hand sides ---------------------------------------------------------


@dataclass(frozen=True)
class _Coeffs:
    nl: Nonlinearity
    n: int
    hbar: float
    offset: float  # physical coefficient time = clock + offset


def _rhs_phase(c: _Coeffs, grid: GridSpec, t: float, a: np.ndarray, phi: np.ndarray):
    tt = t + c.offset
    v = gradient_array(phi, grid)
    ga = gradient_array(a, grid)
    rho = np.abs(a) ** 2
    dphi = -0.5 * sum(w * w for w in v) - model.conformal_potential(c.nl, tt, c.n, rho)
    da = -sum(w * g for w, g in zip(v, ga)) - 0.5 * a * laplacian_array(phi, grid)
    if c.hbar:
        da = da + 0.5j * c.hbar * laplacian_array(a, grid)
    return da, dphi


def _rhs_velocity(c: _Coeffs, grid: GridSpec, t: float, a: np.ndarray, v: list[np.ndarray]):
    tt = t + c.offset
    ga = gradient_array(a, grid)
    coef = 2.0 * model.conformal_potential_prime(c.nl, tt, c.n, np.abs(a) ** 2)
    dv = []
    for i in range(grid.dim):
        gv = gradient_array(v[i], grid)
        adv = sum(w * g for w, g in zip(v, gv))
        dv.append(-adv - coef * np.real(np.conj(a) * ga[i]))
    da = -sum(w * g for w, g in zip(v, ga)) - 0.5 * a * divergence_array(v, grid)
    if c.hbar:
        da = da + 0.5j * c.hbar * laplacian_array(a, grid)
    return da, dv


def _rk4(rhs, t, y, h):
    """One classical RK4 step for a state given as a list of arrays."""
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * h, [u + 0.5 * h * k for u, k in zip(y, k1)])
    k3 = rhs(t + 0.5 * h, [u + 0.5 * h * k for u, k in zip(y, k2)])
    k4 = rhs(t + h, [u + h * k for u, k in zip(y, k3)])
    return [u + h / 6.0 * (p + 2 * q + 2 * r + s) for u, p, q, r, s in zip(y, k1, k2, k3, k4)]


def stable_dt(grid: GridSpec, hbar: float, speed: float = 1.0, cfl: float = 0.4) -> float:
    """RK4 step respecting the hbar/2 |k|^2 dispersion and an advective CFL."""
    kmax2 = grid.dim * (math.pi / grid.spacing) ** 2
    dt_adv = cfl * grid.spacing / max(speed, 1e-12)
    if hbar <= 0:
        return dt_adv
    return min(dt_adv, 2.5 / (0.5 * hbar * kmax2))


def _march(
    rhs,
    y0: list[np.ndarray],
    t_start: float,
    t_end: float,
    dt: float,
    record_times: Sequence[float],
    pack: Callable[[float, list[np.ndarray]], HydroState],
    gradient_of: Callable[[list[np.ndarray]], float] | None,
) -> list[HydroState]:
    times = tuple(record_times) or (t_end,)
    y = [u.copy() for u in y0]
    t = t_start
    states: list[HydroState] = []
    last_sup = max(float(np.abs(u).max()) for u in y)
    for target in times:
        span = target - t
        nsteps = max(int(math.ceil(span / dt - 1e-9)), 0)
        h = span / nsteps if nsteps else 0.0
        for i in range(nsteps):
            y = _rk4(rhs, t + i * h, y, h)
            sup = max(float(np.abs(u).max()) for u in y)
            if not math.isfinite(sup):
                raise HydroAbort(f"non-finite value at t={t + (i + 1) * h:.6g}")
            if last_sup > 0 and sup > GROWTH_LIMIT * last_sup:
                raise HydroAbort(f"step-to-step growth above {GROWTH_LIMIT:g}x at t={t + (i + 1) * h:.6g}; reduce dt")
            last_sup = sup
            if gradient_of is not None and gradient_of(y) > GRADIENT_LIMIT:
                raise LifespanReached(t + i * h, states)
        t = target
        states.append(pack(t, y))
    return states


def _phase_pack(grid: GridSpec, hbar: float, offset: float):
    return lambda t, y: HydroState.build(grid, y[0], y[1].real, t + offset, hbar)


def spectral_tail(values: np.ndarray) -> float:
    """Largest |coefficient| outside the central 2/3 of modes over the peak |coefficient|."""
    c = np.abs(np.fft.fftn(values))
    n = values.shape[0]
    keep = np.abs(np.fft.fftfreq(n, d=1.0 / n)) < n / 3
    inner = keep if values.ndim == 1 else keep[:, None] & keep[None, :]
    return float(c[~inner].max() / c.max())


def _breakdown_monitor(grid: GridSpec):
    """Gradient of v, or loss of spectral resolution of a or phi, whichever is worse."""

    def monitor(y):
        phi = y[1].real
        v = gradient_array(phi, grid)
        gv = max(float(np.abs(d).max()) for w in v for d in gradient_array(w, grid))
        tail = max(spectral_tail(y[0]), spectral_tail(phi) if np.any(phi) else 0.0)
        return gv if tail <= TAIL_LIMIT else math.inf

    return monitor


def integrate_exact(
    initial: HydroState,
    params: PhysParams,
    nl: Nonlinearity,
    t_end: float,
    dt: float,
    record_times: Sequence[float] = (),
    shifted: bool = False,
    monitor: bool = True,
) -> list[HydroState]:
    """Phase form with hbar = initial.hbar, from initial.time to t_end.

    ``shifted`` runs the clock from 0 with coefficients evaluated at
    clock + initial.time; the returned states carry the unshifted time.
    """
    grid = initial.grid
    t0 = initial.time
    offset = t0 if shifted else 0.0
    c = _Coeffs(nl, params.n_dim, initial.hbar, offset)
    rhs = lambda t, y: list(_rhs_phase(c, grid, t, y[0], y[1].real))
    start = 0.0 if shifted else t0
    rec = [r - offset for r in (record_times or (t_end,))]
    y0 = [initial.a.astype(complex), initial.phi.values.astype(float)]
    return _march(
        rhs, y0, start, t_end - offset, dt, rec,
        _phase_pack(grid, initial.hbar, offset),
        _breakdown_monitor(grid) if monitor else None,
    )


def integrate_velocity_form(
    initial: HydroState,
    params: PhysParams,
    nl: Nonlinearity,
    t_end: float,
    dt: float,
    record_times: Sequence[float] = (),
) -> list[tuple[float, np.ndarray, list[np.ndarray]]]:
    """Velocity form; returns (time, a, v) triples at the record times."""
    grid = initial.grid
    c = _Coeffs(nl, params.n_dim, initial.hbar, 0.0)
    dim = grid.dim

    def rhs(t, y):
        da, dv = _rhs_velocity(c, grid, t, y[0], [w.real for w in y[1:]])
        return [da, *dv]

    y0 = [initial.a.astype(complex), *[w.copy() for w in initial.velocity()]]
    out: list[tuple[float, np.ndarray, list[np.ndarray]]] = []

    def pack(t, y):
        out.append((t, y[0].copy(), [w.real.copy() for w in y[1 : 1 + dim]]))
        return HydroState.build(grid, y[0], np.zeros(grid.shape), t, initial.hbar)

    _march(rhs, y0, initial.time, t_end, dt, record_times, pack, None)
    return out


def integrate_limit(
    a0: Callable[..., np.ndarray],
    params: PhysParams,
    nl: Nonlinearity,
    t_end: float,
    grid: GridSpec,
    dt: float,
    record_times: Sequence[float] = (),
) -> list[HydroState]:
    """hbar = 0 system from t = 0 with phi = 0, a = a0."""
    if params.n_dim < 2:
        raise ValueError("the limit system starts at t=0 only for n >= 2")
    return integrate_exact(initial_state(a0, grid, 0.0, 0.0), params, nl, t_end, dt, record_times)


def find_lifespan(
    a0: Callable[..., np.ndarray],
    params: PhysParams,
    nl: Nonlinearity,
    grid: GridSpec,
    dt: float,
    t_max: float,
) -> float:
    """Empirical lifespan of the limit system on ``grid``, capped at t_max.

    The breakdown monitor trips on sup|grad v| > 1e3 or on the spectral tail of a
    or phi exceeding TAIL_LIMIT; on a fixed grid the latter fires first.
    """
    try:
        integrate_limit(a0, params, nl, t_max, grid, dt)
    except LifespanReached as stop:
        return stop.last_time
    return t_max


# -- convergence in hbar -------------------------------------------------------


@dataclass
class ConvergenceReport:
    hbars: list[float]
    T_used: float
    errors: dict[int, list[tuple[float, float]]]  # s -> [(sup err a, sup err phi)] per hbar
    exponents: dict[int, float] = field(default_factory=dict)
    r2: dict[int, float] = field(default_factory=dict)
    predicted: float = math.nan

    def combined(self, s: int) -> list[float]:
        return [ea + ep for ea, ep in self.errors[s]]

    def monotone(self, s: int) -> bool:
        e = self.combined(s)
        return all(x > y for x, y in zip(e, e[1:]))

    def rows(self) -> list[tuple[float, int, float, float]]:
        return [
            (h, s, ea, ep)
            for s, errs in sorted(self.errors.items())
            for h, (ea, ep) in zip(self.hbars, errs)
        ]


def predicted_exponent(k: float, n: int) -> float:
    g = k / n
    return min(1.0, g * (n - 1) / (1.0 - g))


def convergence_study(
    hbar_list: Sequence[float],
    k: float,
    n: int,
    nl: Nonlinearity,
    a0: Callable[..., np.ndarray],
    grid: GridSpec,
    T: float,
    dt: float,
    sigma: int = 1,
    samples: int = 10,
    orders: Sequence[int] = (0, 1, 2),
) -> ConvergenceReport:
    """sup over sampled t in [t0, T] of H^s distances between the exact and limit flows."""
    from .fitting import loglog_fit

    hbars = list(hbar_list)
    if len(hbars) < 3 or any(x <= y for x, y in zip(hbars, hbars[1:])):
        raise ValueError("hbar_list must be strictly decreasing with at least 3 values")
    members = [model.params_from_hbar(h, k, n, sigma) for h in hbars]
    t_lo = max(p.t0 for p in members)
    times = tuple(np.linspace(t_lo, T, samples + 1)[1:])
    limit = integrate_limit(a0, members[0], nl, T, grid, dt, times)
    errors: dict[int, list[tuple[float, float]]] = {s: [] for s in orders}
    for h, p in zip(hbars, members):
        dt_h = min(dt, stable_dt(grid, h, 1.0))
        exact = integrate_exact(initial_state(a0, grid, p.t0, h), p, nl, T, dt_h, times)
        for s in orders:
            ea = max(hs_norm_array(e.a - l.a, grid, s) for e, l in zip(exact, limit))
            ep = max(hs_norm_array(e.phi.values - l.phi.values, grid, s) for e, l in zip(exact, limit))
            errors[s].append((ea, ep))
    rep = ConvergenceReport(hbars, T, errors, predicted=predicted_exponent(k, n))
    for s in orders:
        fit = loglog_fit(hbars, rep.combined(s))
        rep.exponents[s] = fit.slope
        rep.r2[s] = fit.r2
    return rep


# -- symmetrizer diagnostics -----------------------------------------------------


@dataclass
class SymmetrizerReport:
    min_eigenvalues: list[float]
    symmetry_defects: list[float]
    closed_form_errors: list[float]
    skew_defect: float
    positivity_violations: int

    @property
    def passed(self) -> bool:
        return (
            self.positivity_violations == 0
            and max(self.symmetry_defects) < 1e-12
            and min(self.min_eigenvalues) > 0
            and self.skew_defect < 1e-10
        )


def symbol_matrix(a: float, b: float, v: np.ndarray, xi: np.ndarray, coef: float) -> np.ndarray:
    """A(u, xi) for u = (a, b, v); ``coef`` is 2 (t+t0)^{n-2} f'."""
    n = len(v)
    m = np.zeros((n + 2, n + 2))
    vx = float(np.dot(v, xi))
    m[0, 0] = m[1, 1] = vx
    m[0, 2:] = 0.5 * a * xi
    m[1, 2:] = 0.5 * b * xi
    m[2:, 0] = coef * a * xi
    m[2:, 1] = coef * b * xi
    m[2:, 2:] = vx * np.eye(n)
    return m


def symmetrizer_matrix(n: int, c_fp: float) -> np.ndarray:
    """S = diag(I_2, I_n / (4 (t+t0)^{n-2} f')); ``c_fp`` is (t+t0)^{n-2} f'."""
    return np.diag([1.0, 1.0] + [1.0 / (4.0 * c_fp)] * n)


def _rng(seed: int | None):
    if os.environ.get("CASCADE_SEEDLESS") == "1":
        return None
    return np.random.default_rng(seed)


def symmetrizer_check(
    params: PhysParams,
    nl: Nonlinearity,
    t: float,
    samples: int = 100,
    amp_max: float = 2.0,
    grid: GridSpec | None = None,
    seed: int = 0,
) -> SymmetrizerReport:
    """Sampled symmetry of S A(u, xi), positivity of S and skew-symmetry of S L.

    With CASCADE_SEEDLESS=1 the random samples are replaced by a fixed lattice.
    """
    n = params.n_dim
    tt = t + params.t0
    rng = _rng(seed)
    if rng is None:
        lat = np.linspace(-amp_max, amp_max, int(math.ceil(samples ** 0.25)) + 1)
        states = [(x, y, np.full(n, z), np.full(n, w)) for x in lat for y in lat for z in lat for w in lat][:samples]
    else:
        states = [
            (*rng.uniform(-amp_max, amp_max, 2), rng.normal(size=n), rng.normal(size=n))
            for _ in range(samples)
        ]
    mins, defects, closed, bad = [], [], [], 0
    for a, b, v, xi in states:
        nrm = np.linalg.norm(xi)
        xi = xi / nrm if nrm > 0 else np.eye(n)[0]
        fp = float(nl.f_prime(np.array(tt**n * (a * a + b * b))))
        c_fp = tt ** (n - 2) * fp
        if not c_fp > 0:
            bad += 1
            continue
        s = symmetrizer_matrix(n, c_fp)
        sa = s @ symbol_matrix(a, b, v, xi, 2.0 * c_fp)
        defects.append(float(np.abs(sa - sa.T).max()))
        lam = float(np.linalg.eigvalsh(s).min())
        mins.append(lam)
        closed.append(abs(lam - min(1.0, 1.0 / (4.0 * c_fp))))
    grid = grid or GridSpec(n if n <= 2 else 2, 32, 4.0)
    w = (rng or np.random.default_rng(0)).normal(size=(2, *grid.shape))
    lw = (-laplacian_array(w[1], grid), laplacian_array(w[0], grid))
    inner = float(np.sum(lw[0] * w[0] + lw[1] * w[1]))
    scale = float(np.sum(np.abs(lw[0] * w[0]) + np.abs(lw[1] * w[1])))
    return SymmetrizerReport(mins, defects, closed, abs(inner) / scale, bad)
