"""Blow-up diagnostics: H^{1/2} growth, spectral tail, and initial-data eligibility."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .energy import energy
from .spectral import Field, as_frequency, as_position

H_HALF_THRESHOLD = "h_half_threshold"
TAIL_THRESHOLD = "tail_threshold"
NONE = "none"


@dataclass(frozen=True)
class BlowupVerdict:
    detected: bool
    reason: str
    t_detect: Optional[float]
    h_half_at_detect: float
    tail_fraction_at_detect: float

    @property
    def unresolved(self) -> bool:
        """True when the spectral tail, not norm growth, stopped the run."""
        return self.reason == TAIL_THRESHOLD

    def as_dict(self) -> dict:
        return {
            "detected": self.detected,
            "reason": self.reason,
            "t_detect": self.t_detect,
            "h_half_at_detect": self.h_half_at_detect,
            "tail_fraction_at_detect": self.tail_fraction_at_detect,
            "unresolved": self.unresolved,
        }


@dataclass(frozen=True)
class CollapseCriterion:
    is_radial: bool
    radial_deviation: float
    energy_negative: bool
    total_energy: float
    variance_finite: bool
    variance: float

    @property
    def eligible(self) -> bool:
        return self.is_radial and self.energy_negative and self.variance_finite

    def as_dict(self) -> dict:
        return {
            "is_radial": self.is_radial,
            "radial_deviation": self.radial_deviation,
            "energy_negative": self.energy_negative,
            "total_energy": self.total_energy,
            "variance_finite": self.variance_finite,
            "variance": self.variance,
            "eligible": self.eligible,
        }


def spherical_average(f: Field) -> np.ndarray:
    """Average of ``f`` over lattice nodes sharing the same distance to the origin.

    Nodes are grouped by the exact integer ``i^2 + j^2 + k^2``, so a field
    that is radial about the origin node is reproduced exactly.
    """
    grid = f.grid
    f = as_position(f)
    idx = np.arange(grid.n) - grid.n // 2
    shell = (idx[:, None, None] ** 2 + idx[None, :, None] ** 2 + idx[None, None, :] ** 2).ravel()
    counts = np.bincount(shell)
    vals = f.values.ravel()
    re = np.bincount(shell, weights=vals.real)
    im = np.bincount(shell, weights=vals.imag)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = (re + 1j * im) / counts
    return mean[shell].reshape(grid.shape)


def radial_deviation(f: Field) -> float:
    f = as_position(f)
    avg = spherical_average(f)
    return float(np.linalg.norm(f.values - avg) / np.linalg.norm(f.values))


def collapse_check(f: Field, lam: float, alpha: float = 0.0, radial_tol: float = 1e-6) -> CollapseCriterion:
    """Whether f at coupling lam meets the radial negative-energy conditions that force collapse."""
    f = as_position(f)
    dev = radial_deviation(f)
    e = energy(f, lam, alpha)
    rho = np.abs(f.values) ** 2
    variance = float(np.sum(f.grid.r**2 * rho) * f.grid.cell_volume)
    return CollapseCriterion(
        is_radial=dev <= radial_tol,
        radial_deviation=dev,
        energy_negative=e.total < 0,
        total_energy=e.total,
        variance_finite=bool(np.isfinite(variance)),
        variance=variance,
    )


def tail_mask(grid) -> np.ndarray:
    """Modes whose largest index magnitude lies in the outer third, ``|m|_inf > n/3``."""
    outer = np.abs(grid.k_index) > grid.n / 3.0
    return outer[:, None, None] | outer[None, :, None] | outer[None, None, :]


def tail_fraction_values(coeffs: np.ndarray, mask: np.ndarray) -> float:
    power = np.abs(coeffs) ** 2
    return float(power[mask].sum() / power.sum())


def tail_fraction(f: Field) -> float:
    """Share of the spectral L2 mass held by the outer third of the lattice."""
    coeffs = as_frequency(f).values
    return tail_fraction_values(coeffs, tail_mask(f.grid))


def triggered(h_half: float, h_half0: float, tail: float,
              h_half_factor: float = 10.0, tail_max: float = 0.01) -> str:
    if h_half >= h_half_factor * h_half0:
        return H_HALF_THRESHOLD
    if tail >= tail_max:
        return TAIL_THRESHOLD
    return NONE


def check(series: Mapping[str, np.ndarray], h_half_factor: float = 10.0,
          tail_max: float = 0.01) -> BlowupVerdict:
    """Scan monitor series (keys ``t``, ``h_half``, ``tail_fraction``) for blow-up."""
    t = np.asarray(series["t"], dtype=float)
    h = np.asarray(series["h_half"], dtype=float)
    tail = np.asarray(series["tail_fraction"], dtype=float)
    if t.size == 0:
        raise ValueError("empty monitor series")
    for i in range(t.size):
        reason = triggered(h[i], h[0], tail[i], h_half_factor, tail_max)
        if reason != NONE:
            return BlowupVerdict(True, reason, float(t[i]), float(h[i]), float(tail[i]))
    return BlowupVerdict(False, NONE, None, float(h[-1]), float(tail[-1]))
