"""The Hartree energy functional and its components."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .interaction import cached_kernel, potential_values
from .spectral import Field, as_frequency, as_position


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float
    interaction: float
    total: float
    mass: float
    lam: float
    alpha: float


def mass(f: Field) -> float:
    if f.is_position:
        return float(np.sum(np.abs(f.values) ** 2) * f.grid.cell_volume)
    return float(np.sum(np.abs(f.values) ** 2))


def kinetic_energy(f: Field) -> float:
    """``||(1 - Laplacian)^{1/4} f||^2``."""
    coeffs = as_frequency(f).values
    return float(np.sum(f.grid.dispersion * np.abs(coeffs) ** 2))


def interaction_energy(f: Field, alpha: float = 0.0) -> float:
    """``1/2 <|f|^2, K_alpha * |f|^2>`` with ``K_alpha = 1/(|x| + alpha)``."""
    f = as_position(f)
    rho = np.abs(f.values) ** 2
    pot = potential_values(cached_kernel(f.grid, float(alpha)), rho)
    return float(0.5 * np.sum(rho * pot) * f.grid.cell_volume)


def _finite(name: str, value: float) -> float:
    if not np.isfinite(value):
        raise FloatingPointError(f"{name} energy is not finite")
    return value


def energy(f: Field, lam: float, alpha: float = 0.0) -> EnergyBreakdown:
    kin = _finite("kinetic", kinetic_energy(f))
    inter = _finite("interaction", interaction_energy(f, alpha))
    return EnergyBreakdown(
        kinetic=kin,
        interaction=inter,
        total=_finite("total", kin - lam * inter),
        mass=_finite("mass", mass(f)),
        lam=float(lam),
        alpha=float(alpha),
    )


def negative_energy_threshold(f: Field, alpha: float = 0.0) -> float:
    """Coupling above which the energy of this profile turns negative."""
    inter = interaction_energy(f, alpha)
    if not inter > 0:
        raise ZeroDivisionError("profile has zero interaction energy")
    return kinetic_energy(f) / inter
