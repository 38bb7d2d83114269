"""Initial data: Gaussians, lattice plane waves, random smooth fields, files."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .spectral import FREQUENCY, POSITION, Field, Grid, normalize, to_position


def gaussian(grid: Grid, sigma: float = 1.0, center=(0.0, 0.0, 0.0), normalized: bool = True) -> Field:
    """``exp(-|x - c|^2 / (4 sigma^2))``, whose density has standard deviation sigma."""
    X, Y, Z = grid.mesh()
    cx, cy, cz = center
    r2 = (X - cx) ** 2 + (Y - cy) ** 2 + (Z - cz) ** 2
    f = Field(grid, np.exp(-r2 / (4.0 * sigma**2)), POSITION)
    return normalize(f) if normalized else f


def plane_wave(grid: Grid, k_index=(0, 0, 0), normalized: bool = True) -> Field:
    """``exp(i k0.x)`` with ``k0 = 2 pi k_index / L`` on the lattice."""
    k0 = 2.0 * np.pi * np.asarray(k_index, dtype=float) / grid.box_length
    X, Y, Z = grid.mesh()
    f = Field(grid, np.exp(1j * (k0[0] * X + k0[1] * Y + k0[2] * Z)), POSITION)
    return normalize(f) if normalized else f


def random_smooth_field(grid: Grid, rng: np.random.Generator, bandwidth: float | None = None) -> Field:
    """Band-limited complex Gaussian-random field under a random anisotropic envelope.

    The spectrum is filtered with ``exp(-|k|^2 / (2 bandwidth^2))`` and the
    result multiplied by a Gaussian envelope with random axis widths and a
    random centre, then normalised in L2.
    """
    L = grid.box_length
    if bandwidth is None:
        bandwidth = rng.uniform(0.5, 2.0)
    noise = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    filt = np.exp(-grid.k_squared / (2.0 * bandwidth**2))
    smooth = to_position(Field(grid, noise * filt, FREQUENCY)).values
    widths = rng.uniform(0.6, 2.5, size=3) * L / 32.0
    centre = rng.uniform(-0.1, 0.1, size=3) * L
    X, Y, Z = grid.mesh()
    env = np.exp(
        -((X - centre[0]) ** 2) / (2 * widths[0] ** 2)
        - ((Y - centre[1]) ** 2) / (2 * widths[1] ** 2)
        - ((Z - centre[2]) ** 2) / (2 * widths[2] ** 2)
    )
    return normalize(Field(grid, smooth * env, POSITION))


def load_field(grid: Grid, path: str | Path, normalized: bool = True) -> Field:
    """Position-space samples from a ``.npy`` array of ``n^3`` complex values."""
    vals = np.load(Path(path))
    f = Field(grid, vals, POSITION)
    return normalize(f) if normalized else f
