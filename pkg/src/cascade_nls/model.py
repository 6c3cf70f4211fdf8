"""Physical parameters, derived exponents and the nonlinearity ``f``."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .spectral_grid import FormulationTag, WaveField, gradient_array

# Below this conformal time t^{-2} f(t^n y) is replaced by its limit t^{n-2} y f'(0).
T_TINY = 1e-8


class TheoremRangeWarning(UserWarning):
    """Parameters outside the range where the focusing theorem applies."""


@dataclass(frozen=True)
class PhysParams:
    eps: float
    k: float
    n_dim: int
    sigma: int = 1
    alpha: float = field(init=False)
    gamma: float = field(init=False)
    beta: float = field(init=False)
    hbar: float = field(init=False)
    t0: float = field(init=False)
    supercritical: bool = field(init=False)

    def __post_init__(self):
        eps, k, n, sigma = self.eps, self.k, self.n_dim, self.sigma
        gamma = k / n
        alpha = k * sigma
        nsig = n * sigma
        beta = (alpha - 1.0) / (nsig - 1.0) if nsig != 1 else math.nan
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "hbar", eps ** (1.0 - gamma))
        # hbar^{gamma/(1-gamma)} == eps^gamma; the latter stays defined at gamma = 1
        object.__setattr__(self, "t0", eps**gamma)
        object.__setattr__(self, "supercritical", n > k > 1)

    def layer_width(self, j: int) -> float:
        """eps^{theta_j}: width in 1-t of the j-th phase-shift layer."""
        return self.eps ** layer_exponent(self, j)

    def conformal_time(self, t: float) -> float:
        return self.eps**self.gamma / (1.0 - t)

    def physical_time(self, tau: float) -> float:
        return 1.0 - self.eps**self.gamma / tau


def make_params(
    eps: float, k: float, n_dim: int, sigma: int = 1, allow_critical: bool = False
) -> PhysParams:
    if not (0.0 < eps <= 1.0):
        raise ValueError(f"eps must lie in (0, 1], got {eps}")
    if n_dim < 1:
        raise ValueError(f"n_dim must be >= 1, got {n_dim}")
    if sigma < 1 or int(sigma) != sigma:
        raise ValueError(f"sigma must be an integer >= 1, got {sigma}")
    if k <= 0:
        raise ValueError(f"k must be positive, got {k}")
    if k >= n_dim and not allow_critical:
        raise ValueError(f"not supercritical: k={k} >= n={n_dim} (pass allow_critical=True)")
    if n_dim == 1:
        warnings.warn(
            "theorem-out-of-range: n=1 is for solver debugging only; conformal runs must "
            "start at t0 > 0",
            TheoremRangeWarning,
            stacklevel=2,
        )
    return PhysParams(float(eps), float(k), int(n_dim), int(sigma))


def params_from_hbar(hbar: float, k: float, n_dim: int, sigma: int = 1) -> PhysParams:
    """Parameters whose conformal problem has semiclassical constant ``hbar``."""
    gamma = k / n_dim
    if gamma >= 1:
        raise ValueError("hbar parameterisation needs k < n")
    return make_params(hbar ** (1.0 / (1.0 - gamma)), k, n_dim, sigma)


def layer_exponent(params: PhysParams, j: int) -> float:
    """(j alpha - 1)/(j n sigma - 1): the j-th layer sits at 1-t ~ eps^this."""
    if j < 1:
        raise ValueError(f"layer index must be >= 1, got {j}")
    return (j * params.alpha - 1.0) / (j * params.n_dim * params.sigma - 1.0)


def omega_prediction(params: PhysParams, s: int) -> float:
    """Layer where the Sobolev-index-``s`` oscillatory source of the formal
    approximant becomes O(1)."""
    a, g, n = params.alpha, params.gamma, params.n_dim
    return (g + s * (a - 1.0)) / (1.0 + s * (n - 1.0))


# -- nonlinearity -----------------------------------------------------------


@dataclass(frozen=True)
class Nonlinearity:
    f: Callable[[np.ndarray], np.ndarray]
    f_prime: Callable[[np.ndarray], np.ndarray]
    f_second: Callable[[np.ndarray], np.ndarray]
    F_antideriv: Callable[[np.ndarray], np.ndarray]
    label: str

    def check(self, y_max: float = 4.0, lattice: int = 201, h: float = 1e-5) -> None:
        """Sampled check of f(0)=0, f'>0 and f' against a centred difference."""
        if float(self.f(np.array(0.0))) != 0.0:
            raise ValueError(f"{self.label}: f(0) != 0")
        y = np.linspace(0.0, y_max, lattice)
        fp = self.f_prime(y)
        if np.any(fp <= 0):
            raise ValueError(f"{self.label}: f' is not positive on [0, {y_max}]")
        yy = y[(y - h) >= 0]
        fd = (self.f(yy + h) - self.f(yy - h)) / (2 * h)
        err = np.max(np.abs(fd - self.f_prime(yy)))
        if err > 1e-6:
            raise ValueError(f"{self.label}: f' disagrees with finite differences ({err:.2e})")

    def potential(self, y: np.ndarray) -> np.ndarray:
        """G(y) = int_0^y f, so that 2 F(sqrt(y)) = G(y)."""
        return 2.0 * self.F_antideriv(np.sqrt(y))


def _const(c: float):
    return lambda y: np.full_like(np.asarray(y, dtype=float), c)


def builtin_nonlinearity(label: str) -> Nonlinearity:
    if label == "cubic":
        return Nonlinearity(
            f=lambda y: np.asarray(y, dtype=float) * 1.0,
            f_prime=_const(1.0),
            f_second=_const(0.0),
            F_antideriv=lambda y: np.asarray(y, dtype=float) ** 4 / 4.0,
            label="cubic",
        )
    if label == "saturated_cubic":
        return Nonlinearity(
            f=lambda y: y / (1.0 + y),
            f_prime=lambda y: (1.0 + y) ** -2.0,
            f_second=lambda y: -2.0 * (1.0 + y) ** -3.0,
            # int_0^y eta^3/(1+eta^2) d eta
            F_antideriv=lambda y: 0.5 * (y**2 - np.log1p(y**2)),
            label="saturated_cubic",
        )
    raise ValueError(f"unknown nonlinearity {label!r}")


def power_nonlinearity(sigma: int) -> Nonlinearity:
    """f(y) = y^sigma, the homogeneous model of the formal cascade."""
    if sigma == 1:
        return builtin_nonlinearity("cubic")
    s = int(sigma)
    return Nonlinearity(
        f=lambda y: np.asarray(y, dtype=float) ** s,
        f_prime=lambda y: s * np.asarray(y, dtype=float) ** (s - 1),
        f_second=lambda y: s * (s - 1) * np.asarray(y, dtype=float) ** (s - 2),
        F_antideriv=lambda y: np.asarray(y, dtype=float) ** (2 * s + 2) / (2 * s + 2),
        label=f"power{s}",
    )


def zero_nonlinearity() -> Nonlinearity:
    """f = 0: the linear equation.  Not a valid defocusing nonlinearity (f' = 0)."""
    return Nonlinearity(_const(0.0), _const(0.0), _const(0.0), _const(0.0), "zero")


def conformal_potential(nl: Nonlinearity, t: float, n: int, y: np.ndarray) -> np.ndarray:
    """t^{-2} f(t^n y), continued by t^{n-2} y f'(0) for t < T_TINY."""
    if t < T_TINY:
        return t ** (n - 2) * y * float(nl.f_prime(np.array(0.0)))
    return t**-2.0 * nl.f(t**n * y)


def conformal_potential_prime(nl: Nonlinearity, t: float, n: int, y: np.ndarray) -> np.ndarray:
    """d/dy of :func:`conformal_potential`: t^{n-2} f'(t^n y)."""
    if t < T_TINY:
        return t ** (n - 2) * float(nl.f_prime(np.array(0.0))) * np.ones_like(y)
    return t ** (n - 2) * nl.f_prime(t**n * y)


# -- conserved quantities ---------------------------------------------------


def mass(fld: WaveField) -> float:
    return float(np.sum(np.abs(fld.values) ** 2) * fld.grid.cell_volume)


def energy(fld: WaveField, params: PhysParams, nl: Nonlinearity) -> float:
    """Hamiltonian 1/2 ||eps grad u||^2 + eps^{-k} int G(eps^k |u|^2) of the physical equation.

    The gradient is spectral, so the value is only meaningful while the field
    (chirp included) is resolved on its grid.
    """
    if fld.tag != FormulationTag.physical_u:
        raise ValueError(f"energy needs a physical_u field, got {fld.tag.name}")
    g = fld.grid
    eps = params.eps
    u = fld.values
    kin = sum(np.abs(eps * du) ** 2 for du in gradient_array(u, g))
    pot = eps ** (-params.k) * nl.potential(eps**params.k * np.abs(u) ** 2)
    return float((0.5 * np.sum(kin) + np.sum(pot)) * g.cell_volume)
