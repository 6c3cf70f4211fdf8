"""Uniform periodic grids on [-L, L)^d with FFT-based differentiation.

Everything here is a pure function of immutable inputs.  Fields carry their
grid, so frame changes (see :mod:`cascade_nls.conformal`) are implemented by
swapping grid metadata rather than by resampling values.

Fourier conventions
-------------------
Node ``j`` sits at ``x_j = -L + j*dx`` with ``dx = 2L/N``.  Mode ``m`` (FFT
ordering) has wavenumber ``k_m = pi*m/L``, and the trigonometric interpolant is

    f(x) = sum_m c_m exp(i k_m (x + L)),   c = fft(values) / N,

with the Nyquist mode split symmetrically into a cosine.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

CFD1_MAGIC = b"CFDUMP01"
_CFD1_HEADER = struct.Struct("<IIddB")

# Boundary modulus above which a field is considered to feel the box walls.
BOX_DECAY_TOL = 1e-8


class BoxDecayError(ValueError):
    """Field is not negligible on the boundary of the periodic box."""


class FormulationTag(enum.IntEnum):
    physical_u = 0
    conformal_psi = 1
    rescaled_phi = 2
    auxiliary = 3


@dataclass(frozen=True)
class GridSpec:
    """Tensor-product grid with ``points_per_axis`` nodes on each of ``dim`` axes."""

    dim: int
    points_per_axis: int
    half_width: float

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        n = self.points_per_axis
        if n < 16 or n & (n - 1):
            raise ValueError(f"points_per_axis must be a power of two >= 16, got {n}")
        if not (np.isfinite(self.half_width) and self.half_width > 0):
            raise ValueError(f"half_width must be positive, got {self.half_width}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.points_per_axis

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.dim

    def scaled(self, factor: float) -> "GridSpec":
        """Same index array, physical extent multiplied by ``factor``."""
        return GridSpec(self.dim, self.points_per_axis, self.half_width * factor)

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.dim, self.points_per_axis * factor, self.half_width)

    @cached_property
    def axis(self) -> np.ndarray:
        n = self.points_per_axis
        return -self.half_width + self.spacing * np.arange(n)

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        if self.dim == 1:
            return (self.axis,)
        return tuple(np.meshgrid(self.axis, self.axis, indexing="ij"))

    @cached_property
    def radius_sq(self) -> np.ndarray:
        return sum(c**2 for c in self.coords)

    @cached_property
    def wavenumber_axis(self) -> np.ndarray:
        n = self.points_per_axis
        return np.pi / self.half_width * np.fft.fftfreq(n, d=1.0 / n)

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Broadcastable wavenumber arrays, one per axis."""
        k = self.wavenumber_axis
        if self.dim == 1:
            return (k,)
        return (k[:, None], k[None, :])

    @cached_property
    def odd_wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Wavenumbers for odd-order derivatives: the unpaired Nyquist mode is dropped."""
        k = self.wavenumber_axis.copy()
        k[self.points_per_axis // 2] = 0.0
        if self.dim == 1:
            return (k,)
        return (k[:, None], k[None, :])

    @cached_property
    def k_squared(self) -> np.ndarray:
        return sum(k**2 for k in self.wavenumbers) * np.ones(self.shape)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: keep modes with |k_i| <= (2/3) k_max on every axis."""
        kmax = np.abs(self.wavenumber_axis).max()
        keep = np.abs(self.wavenumber_axis) <= (2.0 / 3.0) * kmax
        if self.dim == 1:
            return keep
        return keep[:, None] & keep[None, :]


def _check_values(grid: GridSpec, values: np.ndarray, what: str) -> None:
    if values.shape != grid.shape:
        raise ValueError(f"{what} shape {values.shape} does not match grid {grid.shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{what} contains non-finite entries")


@dataclass(frozen=True, eq=False)
class WaveField:
    grid: GridSpec
    values: np.ndarray
    time_stamp: float = 0.0
    tag: FormulationTag = FormulationTag.auxiliary

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        _check_values(self.grid, vals, "WaveField")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "tag", FormulationTag(self.tag))

    def replace(self, **changes) -> "WaveField":
        kw = dict(grid=self.grid, values=self.values, time_stamp=self.time_stamp, tag=self.tag)
        kw.update(changes)
        return WaveField(**kw)


@dataclass(frozen=True, eq=False)
class RealField:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values)
        if np.iscomplexobj(vals):
            raise ValueError("RealField values must be real")
        vals = vals.astype(float)
        _check_values(self.grid, vals, "RealField")
        object.__setattr__(self, "values", vals)


Field = WaveField | RealField


def _rewrap(like: Field, values: np.ndarray) -> Field:
    if isinstance(like, RealField):
        return RealField(like.grid, values.real)
    return like.replace(values=values)


def sample(
    grid: GridSpec,
    fn: Callable[..., np.ndarray],
    tag: FormulationTag = FormulationTag.auxiliary,
    time_stamp: float = 0.0,
) -> WaveField:
    """Evaluate ``fn(*coords)`` at every node.

    ``fn`` receives one coordinate array per axis and must broadcast.
    """
    vals = np.asarray(fn(*grid.coords), dtype=complex) * np.ones(grid.shape)
    bad = ~np.isfinite(vals)
    if bad.any():
        idx = np.argwhere(bad)[0]
        where = tuple(float(grid.axis[i]) for i in idx)
        raise ValueError(f"sampled function is not finite at node {where}")
    return WaveField(grid, vals, time_stamp, tag)


def sample_real(grid: GridSpec, fn: Callable[..., np.ndarray]) -> RealField:
    vals = np.asarray(fn(*grid.coords)) * np.ones(grid.shape)
    if np.iscomplexobj(vals):
        raise ValueError("sample_real needs a real-valued function")
    return RealField(grid, vals)


# -- array level operators (used directly by the time steppers) -------------


def fft(values: np.ndarray) -> np.ndarray:
    return np.fft.fftn(values)


def ifft(coeffs: np.ndarray) -> np.ndarray:
    return np.fft.ifftn(coeffs)


def _maybe_real(out: np.ndarray, like: np.ndarray) -> np.ndarray:
    return out.real if not np.iscomplexobj(like) else out


def partial_array(values: np.ndarray, grid: GridSpec, axis: int) -> np.ndarray:
    return _maybe_real(ifft(1j * grid.odd_wavenumbers[axis] * fft(values)), values)


def gradient_array(values: np.ndarray, grid: GridSpec) -> list[np.ndarray]:
    vh = fft(values)
    return [_maybe_real(ifft(1j * k * vh), values) for k in grid.odd_wavenumbers]


def laplacian_array(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    return _maybe_real(ifft(-grid.k_squared * fft(values)), values)


def divergence_array(components: Sequence[np.ndarray], grid: GridSpec) -> np.ndarray:
    return sum(partial_array(c, grid, i) for i, c in enumerate(components))


def dealias(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Zero the modes outside the 2/3 band."""
    return _maybe_real(ifft(fft(values) * grid.dealias_mask), values)


def dealiased_product(a: np.ndarray, b: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Pointwise product of the 2/3-filtered factors, filtered again."""
    return dealias(dealias(a, grid) * dealias(b, grid), grid)


def sobolev_multiplier(grid: GridSpec, s: float) -> np.ndarray:
    return (1.0 + grid.k_squared) ** (s / 2.0)


def l2_norm_array(values: np.ndarray, grid: GridSpec) -> float:
    return float(np.sqrt(np.sum(np.abs(values) ** 2) * grid.cell_volume))


def hs_norm_array(values: np.ndarray, grid: GridSpec, s: float) -> float:
    if s < 0:
        raise ValueError(f"Sobolev index must be non-negative, got {s}")
    if s == 0:
        return l2_norm_array(values, grid)
    vh = fft(values) * sobolev_multiplier(grid, s)
    # Parseval: sum |v|^2 dx^d = sum |vh|^2 dx^d / N^d
    npts = values.size
    return float(np.sqrt(np.sum(np.abs(vh) ** 2) * grid.cell_volume / npts))


# -- field level operations -------------------------------------------------


def spectral_gradient(fld: Field) -> list[Field]:
    """Exact derivative of the trigonometric interpolant along each axis."""
    return [_rewrap(fld, g) for g in gradient_array(fld.values, fld.grid)]


def spectral_laplacian(fld: Field) -> Field:
    return _rewrap(fld, laplacian_array(fld.values, fld.grid))


def norm(fld: Field, kind: str = "L2", s: float | None = None) -> float:
    """Discrete norms.  ``kind`` is ``"L2"``, ``"Linf"`` or ``"Hs"`` (needs ``s``)."""
    if kind == "L2":
        return l2_norm_array(fld.values, fld.grid)
    if kind == "Linf":
        return float(np.max(np.abs(fld.values)))
    if kind == "Hs":
        if s is None:
            raise ValueError("Hs norm needs the Sobolev index s")
        return hs_norm_array(fld.values, fld.grid, s)
    raise ValueError(f"unknown norm kind {kind!r}")


def l2_norm_fourier(fld: Field) -> float:
    """L2 norm computed from Fourier coefficients (Parseval route)."""
    vh = fft(fld.values)
    return float(np.sqrt(np.sum(np.abs(vh) ** 2) / vh.size * fld.grid.cell_volume))


def boundary_max(values: np.ndarray) -> float:
    """Largest modulus on the outermost ring of nodes."""
    a = np.abs(values)
    if a.ndim == 1:
        return float(max(a[0], a[-1]))
    return float(max(a[0, :].max(), a[-1, :].max(), a[:, 0].max(), a[:, -1].max()))


def check_box_decay(values: np.ndarray, what: str = "field", tol: float = BOX_DECAY_TOL) -> None:
    b = boundary_max(values)
    if b > tol:
        raise BoxDecayError(f"{what}: boundary modulus {b:.3e} exceeds {tol:.0e}; enlarge the box")


# -- spectral interpolation onto other tensor grids -------------------------


def _eval_matrix(grid: GridSpec, targets: np.ndarray) -> np.ndarray:
    """Matrix E with (E @ c)[t] = interpolant at targets[t] for FFT coefficients c."""
    n = grid.points_per_axis
    m = np.fft.fftfreq(n, d=1.0 / n)
    k = np.pi / grid.half_width * m
    phase = np.outer(targets + grid.half_width, k)
    e = np.exp(1j * phase)
    nyq = n // 2
    # mode index n/2 appears as -n/2 in fftfreq ordering
    e[:, nyq] = np.cos(phase[:, nyq])
    return e


def interpolate_on_axes(
    fld: Field, target_axis: np.ndarray, outside: str = "raise"
) -> np.ndarray:
    """Evaluate the trigonometric interpolant on the tensor grid ``target_axis^dim``.

    Targets outside ``[-L, L)`` would wrap periodically; ``outside="raise"``
    rejects them, ``outside="zero"`` sets them to zero (valid when the field has
    decayed at the box boundary).
    """
    g = fld.grid
    target_axis = np.asarray(target_axis, dtype=float)
    inside = (target_axis >= -g.half_width) & (target_axis <= g.half_width - g.spacing * 1e-12)
    if not inside.all() and outside == "raise":
        raise ValueError(
            f"resampling targets reach |x|={np.abs(target_axis).max():.4g}, "
            f"outside the source box half-width {g.half_width:.4g}"
        )
    c = fft(fld.values) / fld.values.size
    e = _eval_matrix(g, target_axis)
    if g.dim == 1:
        out = e @ c
    else:
        out = e @ c @ e.T
    if outside == "zero" and not inside.all():
        mask = inside if g.dim == 1 else (inside[:, None] & inside[None, :])
        out = np.where(mask, out, 0.0)
    if not np.iscomplexobj(fld.values):
        out = out.real
    return out


def resample(fld: Field, target: GridSpec, outside: str = "raise") -> Field:
    """Spectral interpolation of ``fld`` onto the nodes of ``target``."""
    if target.dim != fld.grid.dim:
        raise ValueError("dimension mismatch")
    vals = interpolate_on_axes(fld, target.axis, outside=outside)
    if isinstance(fld, RealField):
        return RealField(target, vals)
    return fld.replace(grid=target, values=vals)


# -- CFD1 binary dumps ------------------------------------------------------


def write_cfd1(path: str | Path, fld: WaveField) -> None:
    g = fld.grid
    header = CFD1_MAGIC + _CFD1_HEADER.pack(
        g.dim, g.points_per_axis, float(g.half_width), float(fld.time_stamp), int(fld.tag)
    )
    body = np.empty(fld.values.size * 2, dtype="<f8")
    flat = fld.values.reshape(-1)  # row-major
    body[0::2] = flat.real
    body[1::2] = flat.imag
    tmp = Path(str(path) + ".tmp")
    tmp.write_bytes(header + body.tobytes())
    tmp.replace(path)


def read_cfd1(path: str | Path) -> WaveField:
    raw = Path(path).read_bytes()
    if raw[:8] != CFD1_MAGIC:
        raise ValueError(f"{path}: bad magic {raw[:8]!r}")
    dim, n, half_width, t, tag = _CFD1_HEADER.unpack_from(raw, 8)
    grid = GridSpec(dim, n, half_width)
    body = np.frombuffer(raw, dtype="<f8", offset=8 + _CFD1_HEADER.size)
    if body.size != 2 * n**dim:
        raise ValueError(f"{path}: payload has {body.size} doubles, expected {2 * n**dim}")
    vals = (body[0::2] + 1j * body[1::2]).reshape(grid.shape)
    return WaveField(grid, vals, t, FormulationTag(tag))


__all__ = [
    "BOX_DECAY_TOL",
    "BoxDecayError",
    "FormulationTag",
    "GridSpec",
    "RealField",
    "WaveField",
    "boundary_max",
    "check_box_decay",
    "dealias",
    "dealiased_product",
    "divergence_array",
    "gradient_array",
    "hs_norm_array",
    "interpolate_on_axes",
    "l2_norm_array",
    "l2_norm_fourier",
    "laplacian_array",
    "partial_array",
    "norm",
    "read_cfd1",
    "resample",
    "sample",
    "sample_real",
    "spectral_gradient",
    "spectral_laplacian",
    "write_cfd1",
]
