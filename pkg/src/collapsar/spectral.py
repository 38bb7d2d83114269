"""Periodic grids, Fourier transforms and Fourier multipliers.

Fields are sampled on the cube ``[-L/2, L/2)^3`` with ``n`` points per axis.
The frequency representation stores the coefficients of ``f`` in the
orthonormal plane-wave basis ``exp(i k.x) / L^{3/2}``, so the discrete L2 norm
in position space (cell volume weights ``dx^3``) equals the plain Euclidean
norm of the coefficient array.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Union

import numpy as np
import scipy.fft as sfft

POSITION = "position"
FREQUENCY = "frequency"

Multiplier = Union[np.ndarray, Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]]


class RepresentationError(ValueError):
    """A field was handed to an operation expecting the other representation."""


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on ``[-L/2, L/2)^3``."""

    n: int
    box_length: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"n must be an integer >= 2, got {self.n!r}")
        if not (np.isfinite(self.box_length) and self.box_length > 0):
            raise ValueError(f"box_length must be positive, got {self.box_length!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "box_length", float(self.box_length))

    @property
    def dx(self) -> float:
        return self.box_length / self.n

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def cell_volume(self) -> float:
        return self.dx**3

    @cached_property
    def x(self) -> np.ndarray:
        """1D node coordinates, ``-L/2 + j dx``."""
        return -0.5 * self.box_length + self.dx * np.arange(self.n)

    @cached_property
    def k(self) -> np.ndarray:
        """1D angular frequencies in FFT order; the Nyquist entry is ``-pi/dx``."""
        return 2.0 * np.pi * sfft.fftfreq(self.n, d=self.dx)

    @cached_property
    def k_index(self) -> np.ndarray:
        """Signed integer frequency labels in FFT order, in ``[-n/2, n/2)``."""
        return np.rint(sfft.fftfreq(self.n, d=1.0 / self.n)).astype(int)

    def mesh(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Open (broadcastable) position mesh."""
        x = self.x
        return x[:, None, None], x[None, :, None], x[None, None, :]

    def kmesh(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        k = self.k
        return k[:, None, None], k[None, :, None], k[None, None, :]

    @cached_property
    def k_squared(self) -> np.ndarray:
        kx, ky, kz = self.kmesh()
        return kx**2 + ky**2 + kz**2

    @cached_property
    def k_abs(self) -> np.ndarray:
        return np.sqrt(self.k_squared)

    @cached_property
    def r(self) -> np.ndarray:
        X, Y, Z = self.mesh()
        return np.sqrt(X**2 + Y**2 + Z**2)

    @cached_property
    def dispersion(self) -> np.ndarray:
        """The symbol ``sqrt(1 + |k|^2)`` of ``sqrt(1 - Laplacian)``."""
        return np.sqrt(1.0 + self.k_squared)


@dataclass(frozen=True, eq=False)
class Field:
    """Complex field on a grid, tagged with its representation.

    The value array is copied and frozen on construction; operations return
    new fields.
    """

    grid: Grid
    values: np.ndarray
    representation: str = POSITION

    def __post_init__(self):
        if self.representation not in (POSITION, FREQUENCY):
            raise ValueError(f"unknown representation {self.representation!r}")
        vals = np.array(self.values, dtype=np.complex128)
        if vals.size != self.grid.n**3:
            raise ValueError(
                f"expected {self.grid.n**3} values for grid n={self.grid.n}, got {vals.size}"
            )
        vals = vals.reshape(self.grid.shape)
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def is_position(self) -> bool:
        return self.representation == POSITION

    def with_values(self, values: np.ndarray) -> "Field":
        return Field(self.grid, values, self.representation)

    def __mul__(self, c) -> "Field":
        return self.with_values(self.values * c)

    __rmul__ = __mul__

    def __add__(self, other: "Field") -> "Field":
        _same_layout(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        _same_layout(self, other)
        return self.with_values(self.values - other.values)

    def __neg__(self) -> "Field":
        return self.with_values(-self.values)

    def conj(self) -> "Field":
        if self.is_position:
            return self.with_values(np.conj(self.values))
        return to_frequency(to_position(self).conj())


def _same_layout(a: Field, b: Field) -> None:
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")
    if a.representation != b.representation:
        raise RepresentationError("fields are in different representations")


# Raw transforms on arrays; shared by the evolution loop to avoid Field churn.

def fft_values(values: np.ndarray, grid: Grid) -> np.ndarray:
    shifted = sfft.ifftshift(values)
    return sfft.fftn(shifted, norm="ortho", workers=-1) * grid.dx**1.5


def ifft_values(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    out = sfft.ifftn(coeffs, norm="ortho", workers=-1) / grid.dx**1.5
    return sfft.fftshift(out)


def to_frequency(f: Field) -> Field:
    if f.representation != POSITION:
        raise RepresentationError("to_frequency expects a position-space field")
    return Field(f.grid, fft_values(f.values, f.grid), FREQUENCY)


def to_position(f: Field) -> Field:
    if f.representation != FREQUENCY:
        raise RepresentationError("to_position expects a frequency-space field")
    return Field(f.grid, ifft_values(f.values, f.grid), POSITION)


def as_frequency(f: Field) -> Field:
    return f if f.representation == FREQUENCY else to_frequency(f)


def as_position(f: Field) -> Field:
    return f if f.representation == POSITION else to_position(f)


def evaluate_multiplier(grid: Grid, m: Multiplier) -> np.ndarray:
    if callable(m):
        vals = np.asarray(m(*grid.kmesh()))
    else:
        vals = np.asarray(m)
    vals = np.broadcast_to(vals, grid.shape)
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError("multiplier is not finite on every lattice frequency")
    return vals


def apply_multiplier(f: Field, m: Multiplier) -> Field:
    """Scale the Fourier coefficients of ``f`` by ``m(k)``.

    ``m`` is either an array on the frequency lattice (FFT order) or a
    callable of the broadcastable component arrays ``(kx, ky, kz)``. The
    result keeps the representation of ``f``.
    """
    mult = evaluate_multiplier(f.grid, m)
    out = Field(f.grid, as_frequency(f).values * mult, FREQUENCY)
    return out if f.representation == FREQUENCY else to_position(out)


def inner(f: Field, g: Field) -> complex:
    """L2 inner product, antilinear in the first slot."""
    if f.representation == g.representation == POSITION:
        return complex(np.vdot(f.values, g.values) * f.grid.cell_volume)
    return complex(np.vdot(as_frequency(f).values, as_frequency(g).values))


def l2_norm(f: Field) -> float:
    if f.is_position:
        return float(np.sqrt(np.sum(np.abs(f.values) ** 2) * f.grid.cell_volume))
    return float(np.sqrt(np.sum(np.abs(f.values) ** 2)))


def sobolev_norm(f: Field, s: float) -> float:
    """``||(1 + |k|^2)^{s/2} f^||_2``."""
    if not (np.isfinite(s) and s >= 0):
        raise ValueError(f"Sobolev index must be finite and >= 0, got {s!r}")
    coeffs = as_frequency(f).values
    if not np.all(np.isfinite(coeffs)):
        raise FloatingPointError("field has non-finite values")
    weight = (1.0 + f.grid.k_squared) ** s
    return float(np.sqrt(np.sum(weight * np.abs(coeffs) ** 2)))


def homogeneous_seminorm_sq(f: Field, s: float) -> float:
    """``sum |k|^{2s} |f^(k)|^2``, e.g. s=1/2 gives the ``||\\nabla|^{1/2} f||^2`` energy."""
    coeffs = as_frequency(f).values
    return float(np.sum(f.grid.k_abs ** (2 * s) * np.abs(coeffs) ** 2))


def free_propagator(f: Field, t: float) -> Field:
    """Apply ``exp(-i t sqrt(1 - Laplacian))``."""
    if t == 0:
        return f
    phase = np.exp(-1j * t * f.grid.dispersion)
    return apply_multiplier(f, phase)


def normalize(f: Field) -> Field:
    nrm = l2_norm(f)
    if nrm == 0:
        raise ValueError("cannot normalize the zero field")
    return f * (1.0 / nrm)
