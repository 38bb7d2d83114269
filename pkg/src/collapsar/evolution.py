"""Strang-split time integration of the (regularised) semirelativistic Hartree equation.

    i d/dt phi = sqrt(1 - Laplacian) phi - lam (K_alpha * |phi|^2) phi

Both sub-flows are solved exactly: the kinetic one is a Fourier multiplier and
the potential one is a pointwise phase, since ``|phi|`` and hence the
potential do not change under it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import blowup
from .energy import interaction_energy
from .interaction import InteractionKernel, cached_kernel, potential_values
from .spectral import FREQUENCY, POSITION, Field, Grid, as_frequency, fft_values, ifft_values

log = logging.getLogger(__name__)

COMPLETED = "completed"
BLOWUP_DETECTED = "blowup_detected"
DT_UNDERFLOW = "dt_underflow"

MONITORS = ("t", "dt", "mass", "kinetic", "interaction", "energy",
            "h_half", "h_one", "h_two", "tail_fraction")


@dataclass(frozen=True)
class HartreeParams:
    lam: float
    alpha: float = 0.0
    dt_init: float = 1e-2
    t_end: float = 1.0
    dt_min: Optional[float] = None
    adapt_exponent: float = 2.0
    cfl_like_constant: float = 0.1
    monitor_stride: int = 10
    snapshot_stride: int = 0
    detect_blowup: bool = True
    h_half_factor: float = 10.0
    tail_max: float = 0.01

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if not self.dt_init > 0:
            raise ValueError("dt_init must be positive")
        if self.dt_min is None:
            object.__setattr__(self, "dt_min", 1e-8 * self.t_end)
        if not 0 < self.dt_min <= self.dt_init:
            raise ValueError("need 0 < dt_min <= dt_init")
        if self.monitor_stride < 1:
            raise ValueError("monitor_stride must be a positive integer")

    def with_(self, **changes) -> "HartreeParams":
        return replace(self, **changes)


@dataclass
class Trajectory:
    series: dict
    termination: str
    snapshots: list = field(default_factory=list)
    final: Optional[Field] = None
    steps: int = 0
    verdict: Optional[blowup.BlowupVerdict] = None

    @property
    def times(self) -> np.ndarray:
        return self.series["t"]


class NumericalFailure(FloatingPointError):
    """The field became non-finite; ``last_good`` is the last finite state."""

    def __init__(self, msg, last_good: Field, trajectory: Trajectory):
        super().__init__(msg)
        self.last_good = last_good
        self.trajectory = trajectory


def nonlinear_phase_step(f: Field, lam: float, kernel: InteractionKernel, dt: float) -> Field:
    """Exact flow of ``i d/dt phi = -lam V[phi] phi`` over time ``dt``."""
    pos = f if f.representation == POSITION else Field(f.grid, ifft_values(f.values, f.grid), POSITION)
    out = Field(f.grid, _phase_kick(pos.values, lam, kernel, dt), POSITION)
    return out if f.representation == POSITION else as_frequency(out)


def _phase_kick(u: np.ndarray, lam: float, kernel: InteractionKernel, dt: float) -> np.ndarray:
    if lam == 0 or dt == 0:
        return u
    pot = potential_values(kernel, np.abs(u) ** 2)
    if not np.all(np.isfinite(pot)):
        raise FloatingPointError("mean-field potential is not finite")
    return u * np.exp(1j * (lam * dt) * pot)


def _strang(coeffs: np.ndarray, grid: Grid, lam: float, kernel: InteractionKernel,
            dt: float, half_kick: np.ndarray) -> np.ndarray:
    c = coeffs * half_kick
    if lam != 0:
        u = _phase_kick(ifft_values(c, grid), lam, kernel, dt)
        c = fft_values(u, grid)
    return c * half_kick


def strang_step(f: Field, p: HartreeParams, kernel: InteractionKernel, dt: float) -> Field:
    """Kinetic half step, exact potential phase step, kinetic half step."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    grid = f.grid
    half_kick = np.exp(-0.5j * dt * grid.dispersion)
    coeffs = _strang(as_frequency(f).values, grid, p.lam, kernel, dt, half_kick)
    out = Field(grid, coeffs, FREQUENCY)
    return out if f.representation == FREQUENCY else Field(grid, ifft_values(coeffs, grid), POSITION)


class _Monitor:
    def __init__(self, grid: Grid, p: HartreeParams):
        self.grid = grid
        self.p = p
        self.tail_mask = blowup.tail_mask(grid)
        self.rows = {name: [] for name in MONITORS}

    def record(self, t: float, dt: float, coeffs: np.ndarray) -> dict:
        g = self.grid
        power = np.abs(coeffs) ** 2
        mass = power.sum()
        kinetic = float(np.sum(g.dispersion * power))
        inter = interaction_energy(Field(g, coeffs, FREQUENCY), self.p.alpha) if self.p.lam != 0 else 0.0
        row = {
            "t": t,
            "dt": dt,
            "mass": float(mass),
            "kinetic": kinetic,
            "interaction": inter,
            "energy": kinetic - self.p.lam * inter,
            "h_half": float(np.sqrt(kinetic)),
            "h_one": float(np.sqrt(np.sum((1.0 + g.k_squared) * power))),
            "h_two": float(np.sqrt(np.sum((1.0 + g.k_squared) ** 2 * power))),
            "tail_fraction": float(power[self.tail_mask].sum() / mass),
        }
        for name in MONITORS:
            self.rows[name].append(row[name])
        return row

    def series(self) -> dict:
        return {name: np.asarray(vals, dtype=float) for name, vals in self.rows.items()}


def adaptive_dt(p: HartreeParams, h_half: float) -> float:
    return min(p.dt_init, p.cfl_like_constant / h_half**p.adapt_exponent)


def evolve(f0: Field, p: HartreeParams, kernel: Optional[InteractionKernel] = None) -> Trajectory:
    """Integrate from ``f0`` until ``t_end``, detected blow-up, or dt underflow."""
    grid = f0.grid
    coeffs = np.array(as_frequency(f0).values)
    m0 = float(np.sum(np.abs(coeffs) ** 2))
    if not (np.isfinite(m0) and m0 > 0):
        raise ValueError("initial mass must be positive and finite")
    if kernel is None:
        kernel = cached_kernel(grid, float(p.alpha))
    elif kernel.alpha != p.alpha or kernel.grid != grid:
        raise ValueError("kernel does not match the grid / alpha of the run")

    mon = _Monitor(grid, p)
    t = 0.0
    row = mon.record(t, 0.0, coeffs)
    h0 = row["h_half"]
    dt = adaptive_dt(p, row["h_half"])
    snapshots = []
    n_records = 1
    if p.snapshot_stride:
        snapshots.append((t, Field(grid, coeffs, FREQUENCY)))

    termination = COMPLETED
    steps = 0
    half_kick, kick_dt = None, None
    last_good = coeffs
    while t < p.t_end:
        if dt < p.dt_min:
            termination = DT_UNDERFLOW
            break
        remaining = p.t_end - t
        h = remaining if remaining <= dt * (1 + 1e-9) else dt
        if h != kick_dt:
            half_kick, kick_dt = np.exp(-0.5j * h * grid.dispersion), h
        coeffs = _strang(coeffs, grid, p.lam, kernel, h, half_kick)
        steps += 1
        t = p.t_end if h == remaining else t + h
        if not np.all(np.isfinite(coeffs)):
            traj = Trajectory(mon.series(), "numeric_failure", snapshots, None, steps)
            raise NumericalFailure(f"non-finite field at t={t:.6g}",
                                   Field(grid, last_good, FREQUENCY), traj)
        at_end = t >= p.t_end
        if steps % p.monitor_stride == 0 or at_end:
            row = mon.record(t, h, coeffs)
            last_good = coeffs
            n_records += 1
            if p.snapshot_stride and (n_records - 1) % p.snapshot_stride == 0:
                snapshots.append((t, Field(grid, coeffs, FREQUENCY)))
            if p.detect_blowup:
                reason = blowup.triggered(row["h_half"], h0, row["tail_fraction"],
                                          p.h_half_factor, p.tail_max)
                if reason != blowup.NONE:
                    termination = BLOWUP_DETECTED
                    break
            dt = adaptive_dt(p, row["h_half"])

    series = mon.series()
    verdict = blowup.check(series, p.h_half_factor, p.tail_max)
    log.debug("evolve: %s after %d steps, t=%.6g", termination, steps, t)
    return Trajectory(series, termination, snapshots, Field(grid, coeffs, FREQUENCY), steps, verdict)
