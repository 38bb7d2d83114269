"""Bosonic Fock space over M modes, truncated at total occupation ``n_max``.

Operators are matrices in the occupation-number basis, stored sparse (they
have at most one entry per column and mode); ``weyl_operator`` returns the
dense exponential. Raising
components that would leave the truncated space are dropped; their squared
norm is reported as ``dropped_mass`` on the result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg
import scipy.sparse as sparse
from scipy.sparse.linalg import expm_multiply


class TruncationRiskError(ValueError):
    """The requested displacement is too large for the occupation cutoff."""


class QuadratureError(RuntimeError):
    """Phase-average quadrature did not settle within two refinements."""


def _compositions(total: int, modes: int):
    """Occupation tuples with the given total, first mode largest first."""
    if modes == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, modes - 1):
            yield (first,) + rest


@dataclass(frozen=True)
class FockSpace:
    modes: int
    n_max: int

    def __post_init__(self):
        if self.modes < 1 or self.n_max < 1:
            raise ValueError("need modes >= 1 and n_max >= 1")

    @cached_property
    def basis(self) -> tuple:
        """Graded lexicographic enumeration of occupation tuples."""
        return tuple(
            occ for total in range(self.n_max + 1) for occ in _compositions(total, self.modes)
        )

    @property
    def dim(self) -> int:
        return math.comb(self.n_max + self.modes, self.modes)

    @cached_property
    def index(self) -> dict:
        return {occ: i for i, occ in enumerate(self.basis)}

    @cached_property
    def occupations(self) -> np.ndarray:
        return np.array(self.basis, dtype=int)

    @cached_property
    def number(self) -> np.ndarray:
        """Diagonal of the number operator."""
        return self.occupations.sum(axis=1).astype(float)

    @cached_property
    def lowering(self) -> tuple:
        """Single-mode annihilators ``a_i`` (CSR)."""
        mats = []
        for i in range(self.modes):
            rows, cols, vals = [], [], []
            for col, occ in enumerate(self.basis):
                if occ[i] > 0:
                    lower = occ[:i] + (occ[i] - 1,) + occ[i + 1:]
                    rows.append(self.index[lower])
                    cols.append(col)
                    vals.append(math.sqrt(occ[i]))
            mats.append(sparse.csr_matrix((vals, (rows, cols)), shape=(self.dim, self.dim)))
        return tuple(mats)

    @cached_property
    def _overflow(self) -> tuple:
        """Per-mode raising maps from the top sector into the ``n_max + 1`` sector."""
        top = [j for j, occ in enumerate(self.basis) if sum(occ) == self.n_max]
        above = list(_compositions(self.n_max + 1, self.modes))
        above_index = {occ: i for i, occ in enumerate(above)}
        mats = []
        for i in range(self.modes):
            rows, vals = [], []
            for j in top:
                occ = self.basis[j]
                raised = occ[:i] + (occ[i] + 1,) + occ[i + 1:]
                rows.append(above_index[raised])
                vals.append(math.sqrt(occ[i] + 1))
            mats.append(sparse.csr_matrix((vals, (rows, top)), shape=(len(above), self.dim)))
        return tuple(mats)

    def annihilation_matrix(self, f) -> sparse.csr_matrix:
        """``a(f) = sum_i conj(f_i) a_i`` (antilinear in f)."""
        f = self._mode_vector(f)
        return sum(np.conj(fi) * a for fi, a in zip(f, self.lowering)).tocsr()

    def creation_matrix(self, f) -> sparse.csr_matrix:
        """``a*(f)`` restricted to the truncated space."""
        return self.annihilation_matrix(f).conj().T.tocsr()

    def vacuum(self) -> "FockVector":
        c = np.zeros(self.dim, dtype=complex)
        c[0] = 1.0
        return FockVector(self, c)

    def state(self, occ, amplitude: complex = 1.0) -> "FockVector":
        c = np.zeros(self.dim, dtype=complex)
        c[self.index[tuple(occ)]] = amplitude
        return FockVector(self, c)

    def random_vector(self, rng: np.random.Generator, max_total: int | None = None) -> "FockVector":
        """Normalised random vector supported on total occupation <= max_total."""
        max_total = self.n_max if max_total is None else max_total
        c = rng.standard_normal(self.dim) + 1j * rng.standard_normal(self.dim)
        c[self.number > max_total] = 0.0
        return FockVector(self, c / np.linalg.norm(c))

    def _mode_vector(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=complex).ravel()
        if f.shape != (self.modes,):
            raise ValueError(f"mode vector must have length {self.modes}, got {f.shape[0]}")
        if not np.all(np.isfinite(f)):
            raise ValueError("mode vector has non-finite entries")
        return f


@dataclass(frozen=True, eq=False)
class FockVector:
    space: FockSpace
    coeffs: np.ndarray
    dropped_mass: float = field(default=0.0)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.shape != (self.space.dim,):
            raise ValueError(f"expected {self.space.dim} coefficients, got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("Fock vector has non-finite entries")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def __add__(self, other: "FockVector") -> "FockVector":
        _check_space(self, other)
        return FockVector(self.space, self.coeffs + other.coeffs)

    def __sub__(self, other: "FockVector") -> "FockVector":
        _check_space(self, other)
        return FockVector(self.space, self.coeffs - other.coeffs)

    def __mul__(self, c: complex) -> "FockVector":
        return FockVector(self.space, self.coeffs * c, self.dropped_mass * abs(c) ** 2)

    __rmul__ = __mul__

    def sector_weights(self) -> np.ndarray:
        """Squared norm of each fixed-particle-number sector 0..n_max."""
        return np.bincount(self.space.number.astype(int), weights=np.abs(self.coeffs) ** 2,
                           minlength=self.space.n_max + 1)

    def boundary_weight(self, depth: int = 2) -> float:
        """Relative weight in the top ``depth`` sectors, where the cutoff distorts the algebra."""
        w = self.sector_weights()
        return float(w[-depth:].sum() / w.sum()) if w.sum() > 0 else 0.0


def _check_space(u: FockVector, v: FockVector) -> None:
    if u.space != v.space:
        raise ValueError("Fock vectors live on different spaces")


def annihilate(f, v: FockVector) -> FockVector:
    return FockVector(v.space, v.space.annihilation_matrix(f) @ v.coeffs)


def create(f, v: FockVector) -> FockVector:
    space = v.space
    fv = space._mode_vector(f)
    overflow = sum(fi * b for fi, b in zip(fv, space._overflow)) @ v.coeffs
    return FockVector(space, space.creation_matrix(fv) @ v.coeffs,
                      float(np.sum(np.abs(overflow) ** 2)))


def number_moment(v: FockVector, power: int = 1) -> float:
    return float(np.sum(v.space.number**power * np.abs(v.coeffs) ** 2))


def overlap(u: FockVector, v: FockVector) -> complex:
    """``<u, v>``, antilinear in ``u``."""
    _check_space(u, v)
    return complex(np.vdot(u.coeffs, v.coeffs))


def ccr_defect(f, g, v: FockVector) -> float:
    """``||([a(f), a*(g)] - <f, g>) v|| / ||v||``; vanishes away from the cutoff."""
    space = v.space
    nv = v.norm()
    if nv == 0:
        raise ValueError("ccr_defect needs a nonzero vector")
    af = space.annihilation_matrix(f)
    ag_star = space.creation_matrix(g)
    fg = complex(np.vdot(space._mode_vector(f), space._mode_vector(g)))
    c = v.coeffs
    out = af @ (ag_star @ c) - ag_star @ (af @ c) - fg * c
    return float(np.linalg.norm(out) / nv)


def _weyl_generator(space: FockSpace, f, checked: bool = True) -> sparse.csr_matrix:
    f = space._mode_vector(f)
    if checked and np.vdot(f, f).real > space.n_max / 4.0 * (1 + 1e-12):
        raise TruncationRiskError(
            f"||f||^2 = {np.vdot(f, f).real:.3g} exceeds n_max/4 = {space.n_max / 4:.3g}"
        )
    return space.creation_matrix(f) - space.annihilation_matrix(f)


def weyl_operator(space: FockSpace, f) -> np.ndarray:
    """Dense ``W(f) = exp(a*(f) - a(f))`` by scaling and squaring with Pade approximants."""
    return scipy.linalg.expm(_weyl_generator(space, f).toarray())


def weyl(f, v: FockVector) -> FockVector:
    """``W(f) v`` through the action of the matrix exponential on ``v``."""
    gen = _weyl_generator(v.space, f)
    return FockVector(v.space, expm_multiply(gen, v.coeffs))


def coherent(space: FockSpace, f) -> FockVector:
    return weyl(f, space.vacuum())


def coherent_series(space: FockSpace, f) -> FockVector:
    """``exp(-||f||^2/2) sum_n f^{(x)n} / sqrt(n!)`` in the occupation basis."""
    f = space._mode_vector(f)
    occ = space.occupations
    log_fact = np.array([[math.lgamma(n + 1) for n in row] for row in occ])
    amp = np.prod(f[None, :] ** occ, axis=1) * np.exp(-0.5 * log_fact.sum(axis=1))
    return FockVector(space, np.exp(-0.5 * np.vdot(f, f).real) * amp)


def ladder_bound_defect(f, v: FockVector) -> tuple[float, float]:
    """``(||a(f)v|| - ||f|| ||N^{1/2} v||, ||a*(f)v|| - ||f|| ||(N+1)^{1/2} v||)``.

    Both entries are <= 0 up to rounding.
    """
    space = v.space
    if v.norm() == 0:
        raise ValueError("ladder_bound_defect needs a nonzero vector")
    fnorm = float(np.linalg.norm(space._mode_vector(f)))
    w = np.abs(v.coeffs) ** 2
    lower = annihilate(f, v).norm() - fnorm * math.sqrt(np.sum(space.number * w))
    upper = create(f, v).norm() - fnorm * math.sqrt(np.sum((space.number + 1) * w))
    return lower, upper


def product_state(space: FockSpace, f, n: int) -> FockVector:
    """``(a*(f))^n Omega / sqrt(n!)`` by repeated creation."""
    v = space.vacuum()
    for _ in range(n):
        v = create(f, v)
    return v * (1.0 / math.sqrt(math.factorial(n)))


def phase_normalisation(n: int) -> float:
    """``sqrt(n!) / (n^{n/2} e^{-n/2})``."""
    return math.exp(0.5 * math.lgamma(n + 1) - 0.5 * n * math.log(n) + 0.5 * n)


def _phase_average(space: FockSpace, f: np.ndarray, n: int, nodes: int) -> np.ndarray:
    acc = np.zeros(space.dim, dtype=complex)
    for theta in 2.0 * np.pi * np.arange(nodes) / nodes:
        # guarded by n <= n_max/2 in the caller; only sector n of the result is kept
        gen = _weyl_generator(space, np.exp(-1j * theta) * math.sqrt(n) * f, checked=False)
        acc += np.exp(1j * theta * n) * expm_multiply(gen, space.vacuum().coeffs)
    return phase_normalisation(n) * acc / nodes


def phase_average_product_state(space: FockSpace, f, n: int, nodes: int | None = None,
                                 tol: float = 1e-7) -> FockVector:
    """Product state recovered from the phase average of coherent states.

    Trapezoidal rule in the phase with at least ``8 n`` nodes; the node count
    is doubled until two successive results agree to ``tol``, at most twice.
    The coherent states involved have mean occupation ``n``, so ``n <= n_max/2``
    only keeps the cutoff error moderate; it falls below 1e-6 once ``n_max``
    is about ``2 n + 8``.
    """
    f = space._mode_vector(f)
    if n < 1:
        raise ValueError("particle number must be positive")
    if n > space.n_max / 2:
        raise TruncationRiskError(f"n={n} exceeds n_max/2 = {space.n_max / 2:g}")
    nodes = max(nodes or 8 * n, 8 * n)
    current = _phase_average(space, f, n, nodes)
    for _ in range(2):
        nodes *= 2
        refined = _phase_average(space, f, n, nodes)
        if np.linalg.norm(refined - current) <= tol * max(np.linalg.norm(refined), 1.0):
            return FockVector(space, refined)
        current = refined
    raise QuadratureError(f"phase average for n={n} did not converge with {nodes} nodes")
