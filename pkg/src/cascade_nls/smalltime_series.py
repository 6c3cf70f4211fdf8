"""Small-time expansion of the limit system and the focusing approximant built on it.

Matching powers of t in the limit system with phi ~ sum t^{jn-1} phi_j and
a ~ sum t^{jn} a_j gives

    phi_1 = -f'(0) |a0|^2 / (n-1)
    a_1   = -(grad phi_1 . grad a0 + a0 lap phi_1 / 2) / n
    phi_2 = -(|grad phi_1|^2 / 2 + 2 Re(conj(a0) a_1) f'(0) + f''(0) |a0|^4 / 2) / (2n-1)

(the minus sign in phi_1 comes from phi_t = -t^{-2} f(t^n |a|^2) + ...,
the 1/n in a_1 from d/dt t^n = n t^{n-1}).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import grenier_flow
from .fitting import LogLogFit, loglog_fit
from .model import Nonlinearity, PhysParams
from .spectral_grid import (
    FormulationTag,
    GridSpec,
    RealField,
    WaveField,
    gradient_array,
    hs_norm_array,
    interpolate_on_axes,
    laplacian_array,
    sample,
)

SERIES_SWITCH = 0.05

Profile = Callable[..., np.ndarray]


@dataclass(frozen=True, eq=False)
class SeriesCoeffs:
    phi1: RealField
    a1: np.ndarray
    phi2: RealField
    a0: np.ndarray
    params: PhysParams
    nl: Nonlinearity

    @property
    def grid(self) -> GridSpec:
        return self.phi1.grid

    def phase(self, t: float, terms: int = 2) -> np.ndarray:
        n = self.params.n_dim
        out = t ** (n - 1) * self.phi1.values
        if terms >= 2:
            out = out + t ** (2 * n - 1) * self.phi2.values
        return out

    def amplitude(self, t: float) -> np.ndarray:
        return self.a0 + t**self.params.n_dim * self.a1


def compute_coeffs(a0: Profile, params: PhysParams, nl: Nonlinearity, grid: GridSpec) -> SeriesCoeffs:
    n = params.n_dim
    if n < 2:
        raise ValueError("the small-time series needs n >= 2")
    a = sample(grid, a0).values
    fp0 = float(nl.f_prime(np.array(0.0)))
    fs0 = float(nl.f_second(np.array(0.0)))
    rho = np.abs(a) ** 2
    phi1 = -fp0 * rho / (n - 1)
    gphi = gradient_array(phi1, grid)
    ga = gradient_array(a, grid)
    a1 = -(sum(p * q for p, q in zip(gphi, ga)) + 0.5 * a * laplacian_array(phi1, grid)) / n
    phi2 = -(
        0.5 * sum(p * p for p in gphi)
        + 2.0 * np.real(np.conj(a) * a1) * fp0
        + 0.5 * fs0 * rho**2
    ) / (2 * n - 1)
    if not np.any(a.imag):
        a, a1 = a.real, a1.real
    return SeriesCoeffs(RealField(grid, phi1), a1, RealField(grid, phi2), a, params, nl)


@dataclass
class RemainderFit:
    t_samples: list[float]
    first: dict[int, LogLogFit]  # s -> fit of ||phi - t^{n-1} phi1||_{H^s}
    second: dict[int, LogLogFit]  # s -> fit of ||phi - t^{n-1} phi1 - t^{2n-1} phi2||_{H^s}
    amplitude: dict[int, LogLogFit]  # s -> fit of ||a - a0 - t^n a1||_{H^s}
    phi2_origin_fit: float  # fitted t^{2n-1} coefficient of phi at the origin
    phi2_origin: float  # closed-form phi2 at the origin
    expected: dict[str, float] = field(default_factory=dict)


def series_remainder_order(
    a0: Profile,
    params: PhysParams,
    nl: Nonlinearity,
    t_samples: Sequence[float],
    grid: GridSpec,
    dt: float = 1e-3,
    orders: Sequence[int] = (0, 1),
) -> RemainderFit:
    ts = sorted(float(t) for t in t_samples)
    if len(ts) < 4:
        raise ValueError("need at least 4 sample times")
    ratios = np.diff(np.log(ts))
    if np.ptp(ratios) > 1e-6 * abs(ratios.mean()):
        raise ValueError("sample times must form a geometric progression")
    n = params.n_dim
    co = compute_coeffs(a0, params, nl, grid)
    states = grenier_flow.integrate_limit(a0, params, nl, ts[-1], grid, dt, ts)
    first, second, amp = {}, {}, {}
    for s in orders:
        r1 = [hs_norm_array(st.phi.values - co.phase(t, 1), grid, s) for t, st in zip(ts, states)]
        r2 = [hs_norm_array(st.phi.values - co.phase(t, 2), grid, s) for t, st in zip(ts, states)]
        ra = [hs_norm_array(st.a - co.amplitude(t), grid, s) for t, st in zip(ts, states)]
        first[s], second[s], amp[s] = loglog_fit(ts, r1), loglog_fit(ts, r2), loglog_fit(ts, ra)
    # phi(t, 0) - t^{n-1} phi1(0) = c t^{2n-1} + d t^{3n-1}: least squares for (c, d)
    origin = tuple(p // 2 for p in grid.shape)
    y = np.array([st.phi.values[origin] - t ** (n - 1) * co.phi1.values[origin] for t, st in zip(ts, states)])
    t_arr = np.array(ts)
    design = np.stack([t_arr ** (2 * n - 1), t_arr ** (3 * n - 1)], axis=1)
    (c, _), *_ = np.linalg.lstsq(design, y, rcond=None)
    return RemainderFit(
        ts, first, second, amp, float(c), float(co.phi2.values[origin]),
        {"first": 2 * n - 1, "second": 3 * n - 1, "amplitude": 2 * n},
    )


# -- limit phase on demand and the focusing approximant ---------------------------


class LimitPhase:
    """phi(t) of the limit system at requested conformal times, with the series below the switch."""

    def __init__(self, a0: Profile, params: PhysParams, nl: Nonlinearity, grid: GridSpec,
                 dt: float = 5e-3, switch: float = SERIES_SWITCH):
        self.a0, self.params, self.nl, self.grid = a0, params, nl, grid
        self.dt, self.switch = dt, switch
        self.coeffs = compute_coeffs(a0, params, nl, grid)
        self._cache: dict[float, np.ndarray] = {}

    def prepare(self, times: Sequence[float]) -> None:
        need = sorted({float(t) for t in times if t >= self.switch and self._lookup(float(t)) is None})
        if need:
            states = grenier_flow.integrate_limit(self.a0, self.params, self.nl, need[-1], self.grid, self.dt, need)
            for t, st in zip(need, states):
                self._cache[t] = st.phi.values

    def __call__(self, t: float) -> np.ndarray:
        if t < self.switch:
            return self.coeffs.phase(t, 2)
        key = self._lookup(t)
        if key is None:
            self.prepare([t])
            key = t
        return self._cache[key]

    def _lookup(self, t: float) -> float | None:
        # times that went through the physical/conformal map differ from prepared ones by rounding
        if t in self._cache:
            return t
        near = min(self._cache, key=lambda s: abs(s - t), default=None)
        return near if near is not None and abs(near - t) <= 1e-12 * t else None


def conformal_profile(limit: LimitPhase, tau: float, hbar: float) -> WaveField:
    """a0 exp(i phi(tau)/hbar): the approximant seen in the conformal frame."""
    vals = limit.coeffs.a0 * np.exp(1j * limit(tau) / hbar)
    return WaveField(limit.grid, vals, tau, FormulationTag.conformal_psi)


def theorem_approximant(limit: LimitPhase, t: float, grid: GridSpec) -> WaveField:
    """e^{i|x|^2/(2 eps (t-1))} (1-t)^{-n/2} a0(x/(1-t)) exp(i eps^{gamma-1} phi(tau, x/(1-t)))."""
    p = limit.params
    if not t < 1.0:
        raise ValueError("the approximant is defined for t < 1")
    tau = p.conformal_time(t)
    s = 1.0 - t
    n = grid.dim
    phi = RealField(limit.grid, limit(tau))
    phi_x = interpolate_on_axes(phi, grid.axis / s, outside="zero")
    amp = s ** (-n / 2) * sample(grid, lambda *x: limit.a0(*(c / s for c in x))).values
    phase = 0.5 * grid.radius_sq / (p.eps * (t - 1.0)) + phi_x / p.hbar
    return WaveField(grid, amp * np.exp(1j * phase), t, FormulationTag.physical_u)


def phase_shift_sup(limit: LimitPhase, t: float) -> float:
    """sup_x |eps^{gamma-1} phi(eps^gamma/(1-t), .)|."""
    p = limit.params
    return float(np.abs(limit(p.conformal_time(t))).max() / p.hbar)


def cascade_mismatch(stack, coeffs: SeriesCoeffs, tau: float) -> tuple[float, float]:
    """sup differences between mapped cascade terms j=1,2 and tau^{n-1} phi1, tau^{2n-1} phi2."""
    from .formal_cascade import mapped_term

    n = coeffs.params.n_dim
    d1 = np.abs(mapped_term(stack, 1, tau) - tau ** (n - 1) * coeffs.phi1.values).max()
    d2 = np.abs(mapped_term(stack, 2, tau) - tau ** (2 * n - 1) * coeffs.phi2.values).max()
    return float(d1), float(d2)
