"""Experiment drivers and CSV/JSON reporting.

Each ``run_*`` function takes an :class:`ExperimentConfig` and an output
directory, writes its files there and returns the report dictionary that
went into ``report.json``. Reports contain no timestamps or host details, so
a rerun with the same config and seed reproduces them byte for byte.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import blowup, critical, fock
from .config import ConfigError, ExperimentConfig
from .energy import negative_energy_threshold
from .evolution import COMPLETED, MONITORS, evolve
from .initial import gaussian, load_field, plane_wave, random_smooth_field
from .interaction import hardy_ratio, kato_ratio
from .spectral import Field, Grid, as_frequency

log = logging.getLogger(__name__)

KATO_BOUND = math.pi / 2
HARDY_BOUND = 4.0
UNDEFINED = "undefined"
MIN_SWEEP_SPAN = 16.0


class SweepAborted(RuntimeError):
    """A regularised or reference run stopped before the final time."""

    def __init__(self, alpha: float, termination: str):
        super().__init__(f"run with alpha={alpha:g} ended with {termination}")
        self.alpha = alpha
        self.termination = termination


# ----------------------------------------------------------------- output

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns])


def _plain(obj):
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats as strings."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, Path):
        return obj.as_posix()
    return obj


def write_json(path: Path, obj) -> None:
    text = json.dumps(_plain(obj), indent=2, sort_keys=True, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


# ----------------------------------------------------------------- set-up

def make_grid(cfg: ExperimentConfig, n: int | None = None) -> Grid:
    return Grid(int(n or cfg.grid["n"]), float(cfg.grid["box_length"]))


def initial_field(cfg: ExperimentConfig, grid: Grid) -> Field:
    ini = cfg.initial
    kind = ini["kind"]
    try:
        if kind == "gaussian":
            return gaussian(grid, float(ini["sigma"]), tuple(ini["center"]), bool(ini["normalized"]))
        if kind == "plane_wave":
            return plane_wave(grid, tuple(ini["k_index"]), bool(ini["normalized"]))
        return load_field(grid, ini["path"], bool(ini["normalized"]))
    except (OSError, TypeError, ValueError) as exc:
        raise ConfigError(f"cannot build initial data: {exc}") from exc


def resolve_lam(cfg: ExperimentConfig, f0: Field) -> float:
    """``params.lam``, or ``params.lam_factor`` times the zero-energy coupling of ``f0``."""
    factor = cfg.params.get("lam_factor")
    if factor is None:
        return float(cfg.params["lam"])
    alpha = float(cfg.params.get("alpha", 0.0))
    return float(factor) * negative_energy_threshold(f0, alpha)


def _metadata(cfg: ExperimentConfig, **extra) -> dict:
    meta = {"experiment": cfg.experiment, "n": cfg.grid["n"],
            "box_length": cfg.grid["box_length"], "seed": cfg.seed}
    meta.update(extra)
    return meta


def _monitor_rows(series: dict, grid: Grid, alpha: float, lam: float):
    cols = ("n", "box_length", "alpha", "lam") + MONITORS
    rows = []
    for i in range(series["t"].size):
        row = {"n": grid.n, "box_length": grid.box_length, "alpha": alpha, "lam": lam}
        row.update({m: series[m][i] for m in MONITORS})
        rows.append(row)
    return cols, rows


def _relative_drift(x: np.ndarray) -> float:
    return float(np.max(np.abs(x - x[0])) / abs(x[0])) if x[0] != 0 else float(np.max(np.abs(x)))


# ----------------------------------------------------------------- evolve

def run_evolve(cfg: ExperimentConfig, out: Path) -> dict:
    grid = make_grid(cfg)
    f0 = initial_field(cfg, grid)
    lam = resolve_lam(cfg, f0)
    p = cfg.hartree_params(lam=lam)
    traj = evolve(f0, p)
    s = traj.series
    cols, rows = _monitor_rows(s, grid, p.alpha, lam)
    write_csv(out / "monitors.csv", cols, rows)
    t_final = float(s["t"][-1])
    mass_drift = _relative_drift(s["mass"])
    report = {
        "metadata": _metadata(cfg, lam=lam, alpha=p.alpha, dt_init=p.dt_init, t_end=p.t_end),
        "termination": traj.termination,
        "steps": traj.steps,
        "t_final": t_final,
        "mass_drift": mass_drift,
        "energy_drift": _relative_drift(s["energy"]),
        "h_half_growth": float(s["h_half"].max() / s["h_half"][0]),
        "verdict": traj.verdict.as_dict(),
        "checks": {
            "completed": traj.termination == COMPLETED,
            "mass_conserved": mass_drift <= 1e-10 * max(t_final, 1.0),
        },
    }
    write_json(out / "report.json", report)
    return report


# ----------------------------------------------------------------- reg-sweep

@dataclass
class SweepReport:
    rows: list
    fitted_slope_l2: float | None
    fitted_slope_h_half: float | None
    reference_alpha_range: tuple

    def as_dict(self) -> dict:
        return {
            "rows": self.rows,
            "fitted_slope_l2": UNDEFINED if self.fitted_slope_l2 is None else self.fitted_slope_l2,
            "fitted_slope_h_half": UNDEFINED if self.fitted_slope_h_half is None else self.fitted_slope_h_half,
            "reference_alpha_range": list(self.reference_alpha_range),
        }


def sweep_alphas(values) -> tuple:
    """Validated α list, sorted descending."""
    if values is None:
        raise ConfigError("reg-sweep needs a 'sweep' list of alpha values")
    alphas = sorted((float(a) for a in values), reverse=True)
    if any(not a > 0 for a in alphas):
        raise ConfigError("sweep alphas must be positive")
    if len(set(alphas)) != len(alphas):
        raise ConfigError("sweep alphas must be distinct")
    if len(alphas) < 4 or alphas[0] / alphas[-1] < MIN_SWEEP_SPAN * (1 - 1e-12):
        raise ConfigError(f"sweep needs at least 4 alphas spanning a factor {MIN_SWEEP_SPAN:g}")
    return tuple(alphas)


def _sweep_run(cfg: ExperimentConfig, alpha: float, lam: float):
    """One trajectory of the sweep; returns monitor times and spectral snapshots."""
    grid = make_grid(cfg)
    f0 = initial_field(cfg, grid)
    # fixed step so every run of the sweep shares the same monitor times
    p = cfg.hartree_params(lam=lam, alpha=alpha, cfl_like_constant=math.inf,
                           snapshot_stride=1, detect_blowup=True)
    traj = evolve(f0, p)
    times = np.array([t for t, _ in traj.snapshots])
    coeffs = np.stack([snap.values for _, snap in traj.snapshots])
    return alpha, traj.termination, times, coeffs


def fit_slope(alphas, distances) -> float | None:
    """Least-squares slope of ``log d`` against ``log alpha``; None if any distance vanishes."""
    a = np.asarray(alphas, dtype=float)
    d = np.asarray(distances, dtype=float)
    if d.size < 2 or not np.all(np.isfinite(d)) or np.any(d <= 0):
        return None
    order = np.argsort(a)
    slope, _ = np.polyfit(np.log(a[order]), np.log(d[order]), 1)
    return float(slope)


def reg_sweep(cfg: ExperimentConfig, jobs: int = 1) -> SweepReport:
    alphas = sweep_alphas(cfg.sweep)
    grid = make_grid(cfg)
    lam = resolve_lam(cfg, initial_field(cfg, grid))
    todo = (0.0,) + alphas
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_sweep_run, cfg, a, lam) for a in todo]
            results = [fut.result() for fut in futures]
    else:
        results = [_sweep_run(cfg, a, lam) for a in todo]
    results = {r[0]: r[1:] for r in results}

    for a in todo:
        if results[a][0] != COMPLETED:
            raise SweepAborted(a, results[a][0])
    _, t_ref, c_ref = results[0.0]
    weight = np.sqrt(grid.dispersion)
    p = cfg.hartree_params(lam=lam)
    rows = []
    for a in alphas:
        _, t_a, c_a = results[a]
        if t_a.shape != t_ref.shape or not np.array_equal(t_a, t_ref):
            raise RuntimeError(f"monitor times of alpha={a:g} differ from the reference run")
        diff = c_a - c_ref
        l2 = np.sqrt(np.sum(np.abs(diff) ** 2, axis=(1, 2, 3)))
        hh = np.sqrt(np.sum(weight * np.abs(diff) ** 2, axis=(1, 2, 3)))
        rows.append({
            "alpha": a,
            "l2_distance": float(l2.max()),
            "h_half_distance": float(hh.max()),
            "n": grid.n,
            "box_length": grid.box_length,
            "lam": lam,
            "dt": p.dt_init,
            "t_end": p.t_end,
            "monitors": int(t_ref.size),
        })
    return SweepReport(
        rows=rows,
        fitted_slope_l2=fit_slope([r["alpha"] for r in rows], [r["l2_distance"] for r in rows]),
        fitted_slope_h_half=fit_slope([r["alpha"] for r in rows], [r["h_half_distance"] for r in rows]),
        reference_alpha_range=(alphas[-1], alphas[0]),
    )


SWEEP_COLUMNS = ("alpha", "l2_distance", "h_half_distance", "n", "box_length", "lam", "dt",
                 "t_end", "monitors")


def run_reg_sweep(cfg: ExperimentConfig, out: Path, jobs: int = 1) -> dict:
    rep = reg_sweep(cfg, jobs)
    write_csv(out / "sweep.csv", SWEEP_COLUMNS, rep.rows)
    s2, sh = rep.fitted_slope_l2, rep.fitted_slope_h_half
    report = {
        "metadata": _metadata(cfg, lam=rep.rows[0]["lam"], dt_init=rep.rows[0]["dt"],
                              t_end=rep.rows[0]["t_end"]),
        **rep.as_dict(),
        "checks": {
            "slope_l2_in_range": s2 is not None and 0.85 <= s2 <= 1.15,
            "slope_h_half_min": sh is not None and sh >= 0.45,
        },
    }
    write_json(out / "report.json", report)
    return report


# ----------------------------------------------------------------- blow-up

def run_blowup(cfg: ExperimentConfig, out: Path) -> dict:
    grid = make_grid(cfg)
    f0 = initial_field(cfg, grid)
    lam = resolve_lam(cfg, f0)
    p = cfg.hartree_params(lam=lam)
    crit = blowup.collapse_check(f0, lam, p.alpha)
    traj = evolve(f0, p)
    s = traj.series
    cols, rows = _monitor_rows(s, grid, p.alpha, lam)
    write_csv(out / "monitors.csv", cols, rows)
    mass_drift = _relative_drift(s["mass"])
    verdict = traj.verdict
    report = {
        "metadata": _metadata(cfg, lam=lam, alpha=p.alpha, dt_init=p.dt_init, t_end=p.t_end),
        "lambda_star": negative_energy_threshold(f0, p.alpha),
        "collapse_criterion": crit.as_dict(),
        "termination": traj.termination,
        "verdict": verdict.as_dict(),
        "h_half_growth": float(s["h_half"].max() / s["h_half"][0]),
        "mass_drift": mass_drift,
        "checks": {
            "eligible_implies_detected": (not crit.eligible) or verdict.detected,
            "mass_conserved": mass_drift <= 1e-10 * max(float(s["t"][-1]), 1.0),
        },
    }
    write_json(out / "report.json", report)
    return report


# ----------------------------------------------------------------- critical coupling

def _start_field(spec: str, cfg: ExperimentConfig, grid: Grid) -> Field:
    """``gaussian`` (the configured initial data), ``gaussian:<sigma>`` or ``random``."""
    kind, _, arg = str(spec).partition(":")
    if kind == "gaussian":
        if not arg:
            return initial_field(cfg, grid)
        return gaussian(grid, float(arg))
    if kind == "random":
        seed = int(arg) if arg else cfg.seed
        return random_smooth_field(grid, np.random.default_rng(seed))
    raise ConfigError(f"unknown start {spec!r}; use gaussian, gaussian:<sigma> or random[:seed]")


def _maximize(cfg: ExperimentConfig, grid: Grid, spec: str) -> dict:
    c = cfg.critical
    est = critical.maximize_ratio(_start_field(spec, cfg, grid), int(c["max_iters"]),
                                  float(c["step"]), float(c["tol"]))
    return {"start": str(spec), "ratio": est.ratio, "lambda_upper": est.lambda_upper,
            "iterations": est.iterations, "converged": est.converged}


def run_critical_lambda(cfg: ExperimentConfig, out: Path) -> dict:
    starts = cfg.critical["starts"]
    if isinstance(starts, str):
        starts = (starts,)
    if not starts:
        raise ConfigError("critical.starts must name at least one start")
    grid = make_grid(cfg)
    runs = [_maximize(cfg, grid, s) for s in starts]
    lam_up = [r["lambda_upper"] for r in runs]
    spread = (max(lam_up) - min(lam_up)) / min(lam_up)

    coarse_n = cfg.critical["coarse_n"] or grid.n // 2
    coarse = _maximize(cfg, make_grid(cfg, coarse_n), starts[0])
    delta = abs(coarse["lambda_upper"] - runs[0]["lambda_upper"]) / runs[0]["lambda_upper"]
    lower = 4.0 / math.pi
    report = {
        "metadata": _metadata(cfg, dx=grid.dx, coarse_n=coarse_n),
        "lambda_upper": runs[0]["lambda_upper"],
        "ratio": runs[0]["ratio"],
        "starts": runs,
        "start_spread": spread,
        "coarse": coarse,
        "refinement_delta": delta,
        "checks": {
            "bracket": lower - 0.02 <= runs[0]["lambda_upper"] <= 2.7,
            "starts_agree": spread <= 0.05,
            "refinement": delta <= 0.03,
        },
    }
    write_json(out / "report.json", report)
    return report


# ----------------------------------------------------------------- Fock identities

FOCK_TOLERANCES = {
    "coherent_overlap": 1e-6,
    "number_mean": 1e-8,
    "number_variance": 1e-8,
    "weyl_composition": 1e-8,
    "weyl_unitarity": 1e-8,
    "ladder_bound": 1e-12,
    "ccr": 1e-12,
    "phase_average": 1e-6,
}
BOUNDARY_TOL = 1e-12


class _Tally:
    def __init__(self):
        self.defect = {k: 0.0 for k in FOCK_TOLERANCES}
        self.evaluated = {k: 0 for k in FOCK_TOLERANCES}
        self.risk = {k: 0 for k in FOCK_TOLERANCES}

    def run(self, name, fn):
        """Record ``fn()``'s defect; truncation risk is counted, not failed."""
        try:
            value = fn()
        except fock.TruncationRiskError:
            self.risk[name] += 1
            return
        if value is None:
            self.risk[name] += 1
            return
        self.evaluated[name] += 1
        self.defect[name] = max(self.defect[name], value)


def _mode_vector(rng, modes: int, norm: float) -> np.ndarray:
    z = rng.standard_normal(modes) + 1j * rng.standard_normal(modes)
    return norm * z / np.linalg.norm(z)


def _safe(*vectors):
    return all(v.boundary_weight() <= BOUNDARY_TOL for v in vectors)


def fock_suite(modes: int, n_max: int, trials: int, seed: int, f_norm: float = 1.0,
               phase_trials: int = 2, max_particles: int = 6) -> dict:
    space = fock.FockSpace(modes, n_max)
    rng = np.random.default_rng(seed)
    tally = _Tally()
    for _ in range(trials):
        f = _mode_vector(rng, modes, f_norm * rng.uniform())
        g = _mode_vector(rng, modes, f_norm * rng.uniform())
        v = space.random_vector(rng, min(4, n_max))
        w_low = space.random_vector(rng, max(n_max - 2, 0))
        ff = float(np.vdot(f, f).real)

        def overlap():
            a, b = fock.coherent(space, f), fock.coherent(space, g)
            if not _safe(a, b):
                return None
            return abs(abs(fock.overlap(a, b)) - math.exp(-0.5 * np.sum(np.abs(f - g) ** 2)))

        def number(power):
            psi = fock.coherent(space, f)
            if not _safe(psi):
                return None
            mean = fock.number_moment(psi)
            if power == 1:
                return abs(mean - ff)
            return abs(fock.number_moment(psi, 2) - mean**2 - ff)

        def composition():
            lhs = fock.weyl(f, fock.weyl(g, v))
            rhs = fock.weyl(f + g, v) * np.exp(-1j * np.imag(np.vdot(f, g)))
            if not _safe(lhs, rhs):
                return None
            return (lhs - rhs).norm()

        def unitarity():
            w = fock.weyl(f, v)
            if not _safe(w):
                return None
            return abs(w.norm() - v.norm())

        tally.run("coherent_overlap", overlap)
        tally.run("number_mean", lambda: number(1))
        tally.run("number_variance", lambda: number(2))
        tally.run("weyl_composition", composition)
        tally.run("weyl_unitarity", unitarity)
        tally.run("ladder_bound", lambda: max(max(fock.ladder_bound_defect(f, w_low)), 0.0))
        tally.run("ccr", lambda: fock.ccr_defect(f, g, w_low))

    for _ in range(phase_trials):
        u = _mode_vector(rng, modes, 1.0)
        for n in range(1, max_particles + 1):

            def phase():
                if not _safe(fock.coherent(space, math.sqrt(n) * u)):
                    return None
                return (fock.phase_average_product_state(space, u, n)
                        - fock.product_state(space, u, n)).norm()

            tally.run("phase_average", phase)

    identities = {}
    for name, tol in FOCK_TOLERANCES.items():
        identities[name] = {
            "tolerance": tol,
            "max_defect": tally.defect[name],
            "evaluated": tally.evaluated[name],
            "truncation_risk": tally.risk[name],
            "passed": tally.defect[name] <= tol,
        }
    failed = any(not r["passed"] for r in identities.values())
    degraded = any(r["truncation_risk"] for r in identities.values())
    status = "failed" if failed else ("degraded" if degraded else "passed")
    return {"modes": modes, "n_max": n_max, "dim": space.dim, "trials": trials,
            "identities": identities, "status": status}


def run_fock_check(cfg: ExperimentConfig, out: Path) -> dict:
    c = cfg.fock
    suite = fock_suite(int(c["modes"]), int(c["n_max"]), int(c["trials"]), cfg.seed,
                       float(c["f_norm"]), int(c["phase_trials"]), int(c["max_particles"]))
    report = {
        "metadata": {"experiment": cfg.experiment, "seed": cfg.seed},
        **suite,
        "checks": {"suite_not_failed": suite["status"] != "failed"},
    }
    write_json(out / "report.json", report)
    return report


# ----------------------------------------------------------------- inequalities

NEAR_CONSTANT = 1e-6


def inequality_trial(f: Field):
    """``(kato, hardy)`` for ``f``, or None when ``f`` is nearly constant.

    Near-constant means that less than a ``1e-6`` share of the L2 mass sits
    outside the zero mode; both seminorms then vanish up to rounding.
    """
    coeffs = as_frequency(f).values
    power = np.abs(coeffs) ** 2
    if power.sum() - power[0, 0, 0] < NEAR_CONSTANT * power.sum():
        return None
    return kato_ratio(f), hardy_ratio(f)


def inequality_suite(grid: Grid, trials: int, seed: int, bandwidth=None) -> dict:
    rng = np.random.default_rng(seed)
    kato, hardy, skipped = [], [], 0
    for _ in range(trials):
        res = inequality_trial(random_smooth_field(grid, rng, bandwidth))
        if res is None:
            skipped += 1
            continue
        kato.append(res[0])
        hardy.append(res[1])
    if not kato:
        raise RuntimeError("every trial field was skipped as near-constant")
    return {
        "trials": trials,
        "skipped": skipped,
        "max_kato": max(kato),
        "argmax_kato": int(np.argmax(kato)),
        "mean_kato": float(np.mean(kato)),
        "max_hardy": max(hardy),
        "argmax_hardy": int(np.argmax(hardy)),
        "mean_hardy": float(np.mean(hardy)),
        "kato_bound": KATO_BOUND,
        "hardy_bound": HARDY_BOUND,
    }


def run_inequalities(cfg: ExperimentConfig, out: Path) -> dict:
    grid = make_grid(cfg)
    c = cfg.inequalities
    bw = None if c["bandwidth"] is None else float(c["bandwidth"])
    suite = inequality_suite(grid, int(c["trials"]), cfg.seed, bw)
    report = {
        "metadata": _metadata(cfg),
        **suite,
        "checks": {
            "kato": suite["max_kato"] <= KATO_BOUND + 0.05,
            "hardy": suite["max_hardy"] <= HARDY_BOUND + 0.1,
        },
    }
    write_json(out / "report.json", report)
    return report


RUNNERS = {
    "evolve": run_evolve,
    "reg-sweep": run_reg_sweep,
    "blowup": run_blowup,
    "critical-lambda": run_critical_lambda,
    "fock-check": run_fock_check,
    "inequalities": run_inequalities,
}


def run(cfg: ExperimentConfig, out: Path | None = None, jobs: int = 1) -> dict:
    out = Path(out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.experiment == "reg-sweep":
        return run_reg_sweep(cfg, out, jobs)
    return RUNNERS[cfg.experiment](cfg, out)
