"""Linear reference: exact free flow, the WKB profile and the focal layer.

Lens identity used throughout.  For t != 1 the free evolution of chirped data
a0 e^{-i|x|^2/(2 eps)} is

    u_lin(t, x) = (1-t)^{-n/2} e^{i|x|^2/(2 eps (t-1))} [e^{i eps s lap/2} a0](x/(1-t)),
    s = t/(1-t),

so every L2 or sup quantity of u_lin - v_lin reduces to one on the smooth
profile a0, and the |x|/eps chirp never needs to be resolved.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .fitting import LogLogFit, loglog_fit
from .spectral_grid import (
    FormulationTag,
    GridSpec,
    WaveField,
    check_box_decay,
    fft,
    ifft,
    l2_norm_array,
    sample,
)

Profile = Callable[..., np.ndarray]


def free_propagate(init: WaveField, eps: float, t: float) -> WaveField:
    """Exact discrete flow of i eps u_t + eps^2/2 lap u = 0 (any real t)."""
    if t == 0:
        return init.replace(values=init.values.copy())
    mult = np.exp(-0.5j * eps * t * init.grid.k_squared)
    return init.replace(values=ifft(fft(init.values) * mult), time_stamp=init.time_stamp + t)


@dataclass(frozen=True)
class LinearWkbProfile:
    eps: float
    a0: Profile

    def evaluate(self, grid: GridSpec, t: float) -> WaveField:
        return wkb_linear(self, grid, t)


def wkb_linear(profile: LinearWkbProfile, grid: GridSpec, t: float) -> WaveField:
    """(1-t)^{-n/2} a0(x/(1-t)) exp(i|x|^2/(2 eps (t-1)))."""
    if not t < 1.0:
        raise ValueError(f"WKB profile only defined before the focus, got t={t}")
    s = 1.0 - t
    n = grid.dim
    amp = sample(grid, lambda *x: profile.a0(*(c / s for c in x))).values
    vals = s ** (-n / 2) * amp * np.exp(0.5j * grid.radius_sq / (profile.eps * (t - 1.0)))
    return WaveField(grid, vals, t, FormulationTag.physical_u)


def lens_profile(a0_values: np.ndarray, grid: GridSpec, eps: float, t: float) -> np.ndarray:
    """e^{i eps s lap/2} a0 with s = t/(1-t): the conformal-frame image of u_lin(t)."""
    if t == 1.0:
        raise ValueError("lens identity is singular at the focus")
    s = t / (1.0 - t)
    return ifft(fft(a0_values) * np.exp(-0.5j * eps * s * grid.k_squared))


def lens_error(a0: Profile, grid: GridSpec, eps: float, t: float) -> float:
    """||u_lin(t) - v_lin(t)||_{L2} computed in the lens frame (exact for t < 1)."""
    if not 0.0 <= t < 1.0:
        raise ValueError(f"need 0 <= t < 1, got {t}")
    a = sample(grid, a0).values
    check_box_decay(a, "a0")
    w = lens_profile(a, grid, eps, t)
    check_box_decay(w, "lens-propagated a0")
    return l2_norm_array(w - a, grid)


def direct_error(a0: Profile, grid: GridSpec, eps: float, t: float) -> float:
    """Same quantity from a physical-frame free flow; needs pi/dx well above |x|/eps."""
    init = WaveField(
        grid,
        sample(grid, a0).values * np.exp(-0.5j * grid.radius_sq / eps),
        0.0,
        FormulationTag.physical_u,
    )
    u = free_propagate(init, eps, t)
    v = wkb_linear(LinearWkbProfile(eps, a0), grid, t)
    return l2_norm_array(u.values - v.values, grid)


def gaussian_beam(x: np.ndarray, eps: float, t: float, n: int = 1) -> np.ndarray:
    """Closed-form free evolution of e^{-|x|^2/2} e^{-i|x|^2/(2 eps)}.

    The data is exp(i|x|^2/(2 eps q0)) with q0 = 1/(i eps - 1); the flow keeps
    the form (q0/(q0+t))^{n/2} exp(i|x|^2/(2 eps (q0+t))).  Im(q0+t) never
    vanishes, so the prefactor's argument is taken continuously in t.
    """
    q0 = 1.0 / (1j * eps - 1.0)
    q = q0 + t
    mod = abs(q0 / q) ** (n / 2)
    arg = (n / 2) * (np.angle(q0) - np.angle(q))
    return mod * np.exp(1j * arg) * np.exp(0.5j * x**2 / (eps * q))


def fresnel_quadrature(
    a0: Callable[[np.ndarray], np.ndarray],
    eps: float,
    t: float,
    x: np.ndarray,
    half_width: float = 12.0,
    points: int = 200001,
) -> np.ndarray:
    """1D Fresnel integral (2 pi i eps t)^{-1/2} int e^{i(x-y)^2/(2 eps t)} u0(y) dy.

    Trapezoid rule; used only as an independent check of :func:`gaussian_beam`.
    """
    y = np.linspace(-half_width, half_width, points)
    dy = y[1] - y[0]
    u0 = a0(y) * np.exp(-0.5j * y**2 / eps)
    pref = (2j * math.pi * eps * t) ** -0.5
    out = np.empty(np.shape(x), dtype=complex)
    for i, xi in enumerate(np.ravel(x)):
        integrand = np.exp(0.5j * (xi - y) ** 2 / (eps * t)) * u0
        out.flat[i] = pref * np.trapezoid(integrand, dx=dy)
    return out


def sup_linear(a0: Profile, grid: GridSpec, eps: float, t: float) -> float:
    """sup_x |u_lin(t, x)| for t >= 0, through the lens (t != 1) or far field (t = 1)."""
    a = sample(grid, a0).values
    n = grid.dim
    if t == 1.0:
        # u(1,x) = (2 pi i eps)^{-n/2} e^{i|x|^2/2eps} int e^{-i x.y/eps} a0(y) dy
        spec = np.abs(fft(a)) * grid.cell_volume
        return float(spec.max() / (2 * math.pi * eps) ** (n / 2))
    w = lens_profile(a, grid, eps, t)
    check_box_decay(w, f"lens profile at eps={eps}, t={t}")
    return float(abs(1.0 - t) ** (-n / 2) * np.abs(w).max())


@dataclass
class LayerTable:
    rows: list[tuple[float, float, float]]  # (eps, t, l2_error)
    slope_eps: LogLogFit
    slope_layer: LogLogFit

    def write_csv(self, path: str | Path, config_hash: str = "") -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["config_hash", "eps", "t", "l2_error"])
            for e, t, err in self.rows:
                w.writerow([config_hash, repr(e), repr(t), repr(err)])

    def fit_report(self) -> dict:
        return {
            "slope_eps": self.slope_eps.slope,
            "slope_layer": self.slope_layer.slope,
            "r2": min(self.slope_eps.r2, self.slope_layer.r2),
        }

    def write_report(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.fit_report(), indent=2))


def linear_layer_error(
    eps_list: Sequence[float],
    t_list: Sequence[float],
    a0: Profile,
    grid: GridSpec,
    t_fixed: float = 0.75,
) -> LayerTable:
    """Table of ||u_lin - v_lin||_{L2} and the log-log slopes in eps and in 1-t.

    The eps slope is taken along ``t_fixed``; the 1-t slope along the smallest eps.
    """
    if any(not t < 1.0 for t in t_list) or not t_fixed < 1.0:
        raise ValueError("all sample times must precede the focus")
    times = sorted(set(t_list) | {t_fixed})
    rows = [(e, t, lens_error(a0, grid, e, t)) for e in eps_list for t in times]
    at_t = [(e, err) for e, t, err in rows if t == t_fixed]
    fit_eps = loglog_fit([e for e, _ in at_t], [err for _, err in at_t])
    e_min = min(eps_list)
    at_e = [(1.0 - t, err) for e, t, err in rows if e == e_min and t in t_list and t > 0]
    fit_layer = loglog_fit([d for d, _ in at_e], [err for _, err in at_e])
    return LayerTable(rows, fit_eps, fit_layer)


@dataclass
class AmplitudeBoundCheck:
    constant: float
    worst_excess: float  # max over validation samples of ratio / constant - 1
    calibration: list[tuple[float, float, float]]  # (eps, t, sup * (eps+|1-t|)^{n/2})
    validation: list[tuple[float, float, float]]

    @property
    def passed(self) -> bool:
        return self.worst_excess <= 0.05


def _bound_ratios(a0, grid, samples):
    n = grid.dim
    return [(e, t, sup_linear(a0, grid, e, t) * (e + abs(1.0 - t)) ** (n / 2)) for e, t in samples]


def amplitude_bound_check(
    a0: Profile,
    grid: GridSpec,
    calibration: Sequence[tuple[float, float]],
    validation: Sequence[tuple[float, float]],
) -> AmplitudeBoundCheck:
    """Fit C in sup|u_lin| <= C (eps+|t-1|)^{-n/2} on one sample set, test it on another.

    C is the largest normalised sup over the calibration set; the check measures
    how far any validation sample (other eps, other times) overshoots it.
    """
    cal = _bound_ratios(a0, grid, calibration)
    val = _bound_ratios(a0, grid, validation)
    c = max(r for _, _, r in cal)
    worst = max(r for _, _, r in val) / c - 1.0
    return AmplitudeBoundCheck(c, worst, cal, val)


def focal_samples(eps_list: Sequence[float], offsets: Sequence[float]) -> list[tuple[float, float]]:
    """(eps, t) with 1 - t = c * eps for each offset c, plus a few O(1) times."""
    out = []
    for e in eps_list:
        ts = {0.0, 0.5, 0.9, 1.0, 1.5}
        ts |= {1.0 - c * e for c in offsets}
        out.extend((e, t) for t in sorted(ts) if t >= 0.0)
    return out
