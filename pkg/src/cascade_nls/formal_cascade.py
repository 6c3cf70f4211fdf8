"""Cascade of phase shifts: the profiles g_j, the truncated phase and the approximant.

Recursion (ordered sum over p + q = j, m_j = j n sigma - 1):

    g_1 = -|a0|^{2 sigma},     g_j = -1/2 sum_{p+q=j} grad g_p . grad g_q / (m_p m_q).

Physical phase  g_N(t, x) = sum_j eps^{j alpha - 1} (1-t)^{-m_j} g_j(x/(1-t)) / m_j.

In the conformal variables (tau = eps^gamma/(1-t), xi = x/(1-t)) the same
approximant is a0(xi) exp(i G(tau, xi)) with G = sum_j tau^{m_j} g_j/(m_j hbar).
Residuals are evaluated there: the physical residual has L2 norm exactly
tau^2 times the conformal one, and no |x|/eps chirp has to be sampled.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import model
from .model import PhysParams
from .spectral_grid import (
    FormulationTag,
    GridSpec,
    RealField,
    WaveField,
    boundary_max,
    gradient_array,
    interpolate_on_axes,
    l2_norm_array,
    laplacian_array,
    sample,
)

Profile = Callable[..., np.ndarray]
DECAY_RATIO = 1e-8
DIFF_FLOOR = 1e-10


def _params_at(stack: "CascadeStack", eps: float | None) -> PhysParams:
    p = stack.params
    return p if eps is None else PhysParams(eps, p.k, p.n_dim, p.sigma)


def _weight(params: PhysParams, j: int) -> float:
    return j * params.n_dim * params.sigma - 1.0


@dataclass(frozen=True, eq=False)
class CascadeStack:
    profiles: tuple[RealField, ...]
    a0_sq_sigma: RealField
    params: PhysParams
    a0: Profile
    a0_values: np.ndarray

    @property
    def N(self) -> int:
        return len(self.profiles)

    @property
    def grid(self) -> GridSpec:
        return self.a0_sq_sigma.grid

    def m(self, j: int) -> float:
        return _weight(self.params, j)

    def truncated(self, n: int) -> "CascadeStack":
        if not 1 <= n <= self.N:
            raise ValueError(f"cannot truncate a depth-{self.N} stack to {n}")
        return CascadeStack(self.profiles[:n], self.a0_sq_sigma, self.params, self.a0, self.a0_values)


def build_stack(a0: Profile, params: PhysParams, N: int, grid: GridSpec) -> CascadeStack:
    """g_1..g_N on ``grid`` by the recursion, with spectral gradients."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if not params.n_dim * params.sigma > params.alpha > 1.0:
        raise ValueError(
            f"cascade needs n sigma > alpha > 1, got n sigma={params.n_dim * params.sigma}, "
            f"alpha={params.alpha}"
        )
    a = sample(grid, a0).values
    base = np.abs(a) ** (2 * params.sigma)
    gs = [-base]
    grads = [gradient_array(gs[0], grid)]
    for j in range(2, N + 1):
        acc = np.zeros(grid.shape)
        for p in range(1, j):
            q = j - p
            dot = sum(u * v for u, v in zip(grads[p - 1], grads[q - 1]))
            acc += dot / (_weight(params, p) * _weight(params, q))
        g = -0.5 * acc
        gs.append(g)
        grads.append(gradient_array(g, grid))
    for j, g in enumerate(gs, start=1):
        peak = np.abs(g).max()
        if peak > 0 and boundary_max(g) > DECAY_RATIO * peak:
            raise ValueError(f"g_{j} has not decayed at the box boundary; enlarge the grid")
    return CascadeStack(
        tuple(RealField(grid, g) for g in gs), RealField(grid, base), params, a0, a
    )


def cascade_term_weight(params: PhysParams, j: int, t: float, eps: float) -> float:
    """eps^{j alpha - 1} / ((1-t)^{m_j} m_j)."""
    m = _weight(params, j)
    return eps ** (j * params.alpha - 1.0) / ((1.0 - t) ** m * m)


def _check_time(t: float) -> None:
    if not t < 1.0:
        raise ValueError(f"the cascade phase is defined for t < 1, got t={t}")


def phase_g_N(stack: CascadeStack, t: float, eps: float, grid: GridSpec) -> RealField:
    """Truncated phase on the physical ``grid``, profiles resampled at x/(1-t).

    Points whose image x/(1-t) leaves the reference box are set to zero, which is
    legitimate because every g_j has decayed below 1e-8 of its peak there.
    """
    _check_time(t)
    xi_axis = grid.axis / (1.0 - t)
    total = np.zeros(grid.shape)
    for j, g in enumerate(stack.profiles, start=1):
        w = cascade_term_weight(stack.params, j, t, eps)
        total += w * interpolate_on_axes(g, xi_axis, outside="zero")
    return RealField(grid, total)


def phase_term_sup(stack: CascadeStack, j: int, t: float, eps: float) -> float:
    """sup_x of the j-th summand of g_N at time t (the dilation does not change sups)."""
    _check_time(t)
    return cascade_term_weight(stack.params, j, t, eps) * float(np.abs(stack.profiles[j - 1].values).max())


def v_N(stack: CascadeStack, t: float, eps: float, grid: GridSpec) -> WaveField:
    """(1-t)^{-n/2} a0(x/(1-t)) exp(i|x|^2/(2 eps (t-1)) + i g_N)."""
    _check_time(t)
    s = 1.0 - t
    n = grid.dim
    amp = s ** (-n / 2) * sample(grid, lambda *x: stack.a0(*(c / s for c in x))).values
    phase = 0.5 * grid.radius_sq / (eps * (t - 1.0)) + phase_g_N(stack, t, eps, grid).values
    return WaveField(grid, amp * np.exp(1j * phase), t, FormulationTag.physical_u)


# -- conformal-frame image ---------------------------------------------------


def conformal_phase(stack: CascadeStack, tau: float, hbar: float | None = None) -> np.ndarray:
    """G(tau, xi) = sum_j tau^{m_j} g_j / (m_j hbar) on the reference grid."""
    hbar = stack.params.hbar if hbar is None else hbar
    out = np.zeros(stack.grid.shape)
    for j, g in enumerate(stack.profiles, start=1):
        m = stack.m(j)
        out += tau**m * g.values / m
    return out / hbar


def mapped_term(stack: CascadeStack, j: int, tau: float) -> np.ndarray:
    """hbar times the j-th summand of G: tau^{m_j} g_j / m_j (comparable to tau^{m_j} phi_j)."""
    m = stack.m(j)
    return tau**m * stack.profiles[j - 1].values / m


def conformal_approximant(stack: CascadeStack, tau: float) -> WaveField:
    vals = stack.a0_values * np.exp(1j * conformal_phase(stack, tau))
    return WaveField(stack.grid, vals, tau, FormulationTag.conformal_psi)


def conformal_operator(
    psi_at: Callable[[float], np.ndarray],
    tau: float,
    params: PhysParams,
    nl: model.Nonlinearity,
    grid: GridSpec,
    delta_rel: float = 1e-6,
) -> np.ndarray:
    """i hbar psi_tau + hbar^2/2 lap psi - tau^{-2} f(tau^n |psi|^2) psi, psi_tau by centred difference."""
    d = delta_rel * tau
    psi = psi_at(tau)
    dpsi = (psi_at(tau + d) - psi_at(tau - d)) / (2.0 * d)
    hbar = params.hbar
    pot = model.conformal_potential(nl, tau, params.n_dim, np.abs(psi) ** 2)
    return 1j * hbar * dpsi + 0.5 * hbar**2 * laplacian_array(psi, grid) - pot * psi


def residual_norm(
    stack: CascadeStack,
    t: float,
    eps: float | None = None,
    weights_on: bool = True,
    nonlinear_on: bool = True,
    delta_rel: float = 1e-6,
) -> float:
    """||i eps v_t + eps^2/2 lap v - eps^alpha |v|^{2 sigma} v||_{L2} at physical time t.

    Computed as tau^2 times the L2 norm of the conformal residual of
    a0 exp(iG), with the time derivative taken by a centred difference of
    relative width ``delta_rel`` in tau (equivalently in 1-t).  ``weights_on``
    and ``nonlinear_on`` switch off the phase and the power term, which gives
    the linear WKB residual.
    """
    params = _params_at(stack, eps)
    _check_time(t)
    if not 0 < delta_rel < 1e-2 or 1.0 - t < DIFF_FLOOR:
        raise ValueError(f"cannot difference stably at 1-t={1.0 - t:.3g}")
    tau = params.conformal_time(t)
    a = stack.a0_values

    def psi_at(s: float) -> np.ndarray:
        if not weights_on:
            return a.astype(complex)
        return a * np.exp(1j * conformal_phase(stack, s, params.hbar))

    nl = model.power_nonlinearity(params.sigma) if nonlinear_on else model.zero_nonlinearity()
    r = conformal_operator(psi_at, tau, params, nl, stack.grid, delta_rel)
    return tau**2 * l2_norm_array(r, stack.grid)


def residual_closed_form(stack: CascadeStack, t: float, eps: float | None = None) -> float:
    """Same norm from the exact expansion of the conformal residual of a0 e^{iG}.

    R = [-1/2 sum_{p,q<=N, p+q>N} tau^{m_p+m_q} grad g_p.grad g_q/(m_p m_q) a0
         + hbar^2/2 lap a0
         + i hbar sum_j tau^{m_j}/m_j (grad a0.grad g_j + a0 lap g_j / 2)] e^{iG}
    """
    params = _params_at(stack, eps)
    _check_time(t)
    tau = params.conformal_time(t)
    hbar = params.hbar
    grid = stack.grid
    a = stack.a0_values
    N = stack.N
    grads = [gradient_array(g.values, grid) for g in stack.profiles]
    ga = gradient_array(a, grid)
    leftover = np.zeros(grid.shape)
    for p in range(1, N + 1):
        for q in range(1, N + 1):
            if p + q > N:
                dot = sum(u * v for u, v in zip(grads[p - 1], grads[q - 1]))
                leftover += tau ** (stack.m(p) + stack.m(q)) * dot / (stack.m(p) * stack.m(q))
    transport = np.zeros(grid.shape, dtype=complex)
    for j, g in enumerate(stack.profiles, start=1):
        m = stack.m(j)
        div = sum(u * v for u, v in zip(ga, grads[j - 1])) + 0.5 * a * laplacian_array(g.values, grid)
        transport += tau**m / m * div
    r = -0.5 * leftover * a + 0.5 * hbar**2 * laplacian_array(a, grid) + 1j * hbar * transport
    return tau**2 * l2_norm_array(r, grid)


def accumulated_residual(
    stack: CascadeStack, t: float, eps: float | None = None, samples: int = 120
) -> float:
    """(1/eps) int_0^t ||r_N(s)||_{L2} ds, trapezoid rule in log(1-s)."""
    params = _params_at(stack, eps)
    _check_time(t)
    # s = 1 - e^{-y}: ds = (1 - s) dy, dense near the focus
    y = np.linspace(0.0, -np.log(1.0 - t), samples)
    s = 1.0 - np.exp(-y)
    vals = np.array([residual_closed_form(stack, si, params.eps) * (1.0 - si) for si in s])
    return float(np.trapezoid(vals, y) / params.eps)
