"""Log-log slope fits and crossing-point helpers shared by the experiments."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


@dataclass(frozen=True)
class LogLogFit:
    slope: float
    intercept: float  # log of the prefactor
    r2: float
    count: int

    @property
    def prefactor(self) -> float:
        return math.exp(self.intercept)

    def predict(self, x: float) -> float:
        return math.exp(self.intercept) * x**self.slope


def loglog_fit(x: Sequence[float], y: Sequence[float]) -> LogLogFit:
    """Least-squares line through (log x, log y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two points for a slope")
    if not (np.all(x > 0) and np.all(y > 0) and np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("log-log fit needs positive finite data")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    # flat data (slope 0) has no variance to explain
    flat = ss_tot <= 1e-24 * max(1.0, float(np.sum(ly**2)))
    r2 = 1.0 if flat else 1.0 - float(np.sum(resid**2)) / ss_tot
    return LogLogFit(float(slope), float(intercept), r2, int(lx.size))


def bisect_log(
    fn: Callable[[float], float], lo: float, hi: float, rtol: float = 1e-10, max_iter: int = 200
) -> float:
    """Root of a sign-changing ``fn`` on [lo, hi] (both positive), bisecting in log scale."""
    flo, fhi = fn(lo), fn(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise ValueError("no sign change on the bracket")
    a, b = math.log(lo), math.log(hi)
    for _ in range(max_iter):
        m = 0.5 * (a + b)
        fm = fn(math.exp(m))
        if (fm > 0) == (flo > 0):
            a, flo = m, fm
        else:
            b = m
        if b - a < rtol:
            break
    return math.exp(0.5 * (a + b))


def first_crossing(xs: Sequence[float], ys: Sequence[float], level: float) -> float:
    """First x where the sampled curve rises through ``level`` (log-linear interpolation)."""
    for (x0, y0), (x1, y1) in zip(zip(xs, ys), zip(xs[1:], ys[1:])):
        if y0 < level <= y1:
            w = (math.log(level) - math.log(y0)) / (math.log(y1) - math.log(y0))
            return math.exp(math.log(x0) + w * (math.log(x1) - math.log(x0)))
    return math.nan
