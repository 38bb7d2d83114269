"""Acceptance suite: one test per criterion, thresholds pinned below.

Each test appends a ``criterion N: PASS|FAIL ...`` line that is printed in
the terminal summary, whether or not the assertion holds.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from collapsar import config, experiments
from collapsar.evolution import COMPLETED, HartreeParams, evolve
from collapsar.initial import gaussian
from collapsar.spectral import Grid

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

# pinned thresholds
SLOPE_L2 = (0.85, 1.15)
SLOPE_H_HALF_MIN = 0.45
SWEEP_RUNTIME = 600.0
LAMBDA_BRACKET = (4 / math.pi - 0.02, 2.7)
START_AGREEMENT = 0.05
KATO_MAX = math.pi / 2 + 0.05
HARDY_MAX = 4.0 + 0.1
MASS_DRIFT = 1e-10
GROWTH_MIN = 10.0
T_DETECT_STABILITY = 0.10
RICHARDSON = (3.4, 4.6)
LINEAR_NORM_DRIFT = 1e-10
FOCK_RUNTIME = 60.0


def load(name, **changes):
    cfg = config.load(CONFIGS / name)
    return cfg.with_(**changes) if changes else cfg


def verdict(log, number, ok, detail):
    log.append(f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}")
    return ok


@pytest.fixture(scope="module")
def sweep(tmp_path_factory):
    out = tmp_path_factory.mktemp("reg_sweep")
    t0 = time.perf_counter()
    report = experiments.run_reg_sweep(load("reg_sweep.cfg"), out)
    return report, time.perf_counter() - t0


def test_criterion_1_l2_rate(sweep, criterion_log):
    report, runtime = sweep
    slope = report["fitted_slope_l2"]
    ok = slope != "undefined" and SLOPE_L2[0] <= slope <= SLOPE_L2[1] and runtime < SWEEP_RUNTIME
    assert verdict(criterion_log, 1, ok, f"L2 slope {slope} (want {SLOPE_L2}), sweep {runtime:.0f}s")


def test_criterion_2_h_half_rate(sweep, criterion_log):
    slope = sweep[0]["fitted_slope_h_half"]
    ok = slope != "undefined" and slope >= SLOPE_H_HALF_MIN
    assert verdict(criterion_log, 2, ok, f"H^1/2 slope {slope} (want >= {SLOPE_H_HALF_MIN})")


def test_criterion_3_critical_bracket(tmp_path, criterion_log):
    rep = experiments.run_critical_lambda(load("critical_lambda.cfg"), tmp_path)
    lam = rep["lambda_upper"]
    ok = (LAMBDA_BRACKET[0] <= lam <= LAMBDA_BRACKET[1] and rep["start_spread"] <= START_AGREEMENT
          and all(s["converged"] for s in rep["starts"]))
    starts = ", ".join(f"{s['start']} {s['lambda_upper']:.4f}" for s in rep["starts"])
    assert verdict(criterion_log, 3, ok,
                   f"lambda_upper {lam:.4f} in [{LAMBDA_BRACKET[0]:.4f}, {LAMBDA_BRACKET[1]}]; "
                   f"starts {starts}; spread {rep['start_spread']:.3%}")


def test_criterion_4_inequality_constants(tmp_path, criterion_log):
    cfg = load("inequalities.cfg")
    assert cfg.inequalities["trials"] == 200
    rep = experiments.run_inequalities(cfg, tmp_path)
    ok = rep["max_kato"] <= KATO_MAX and rep["max_hardy"] <= HARDY_MAX and rep["skipped"] < 200
    assert verdict(criterion_log, 4, ok,
                   f"max kato {rep['max_kato']:.4f} <= {KATO_MAX:.4f}, "
                   f"max hardy {rep['max_hardy']:.4f} <= {HARDY_MAX}, skipped {rep['skipped']}")


def test_criterion_5_blowup_dichotomy(tmp_path, criterion_log):
    (tmp_path / "sub").mkdir()
    sub = experiments.run_blowup(load("blowup_subcritical.cfg"), tmp_path / "sub")
    sub_ok = (sub["termination"] == COMPLETED and not sub["verdict"]["detected"]
              and sub["mass_drift"] <= MASS_DRIFT and not sub["collapse_criterion"]["energy_negative"])

    hot_cfg = load("blowup_supercritical.cfg")
    (tmp_path / "hot").mkdir()
    hot = experiments.run_blowup(hot_cfg, tmp_path / "hot")
    (tmp_path / "half").mkdir()
    half_params = dict(hot_cfg.params, dt_init=hot_cfg.params["dt_init"] / 2)
    half = experiments.run_blowup(hot_cfg.with_(params=half_params), tmp_path / "half")
    detected = hot["verdict"]["detected"] and hot["verdict"]["t_detect"] < 2.0
    t1, t2 = hot["verdict"]["t_detect"], half["verdict"]["t_detect"]
    stable = t1 is not None and t2 is not None and abs(t2 - t1) <= T_DETECT_STABILITY * t1
    growth = hot["h_half_growth"]
    ok = sub_ok and hot["collapse_criterion"]["eligible"] and detected and growth >= GROWTH_MIN and stable
    assert verdict(
        criterion_log, 5, ok,
        f"subcritical ok={sub_ok} (mass drift {sub['mass_drift']:.1e}); supercritical "
        f"eligible={hot['collapse_criterion']['eligible']} detected={detected} "
        f"reason={hot['verdict']['reason']} t_detect {t1} vs {t2} (stable={stable}); "
        f"H^1/2 growth {growth:.2f}x (want >= {GROWTH_MIN:g}x)")


def _drift(series, name):
    s = series[name]
    return float(np.max(np.abs(s - s[0])))


def test_criterion_6_conservation_and_order(criterion_log):
    g = Grid(32, 16.0)
    f = gaussian(g, 1.0)
    mass_worst, energy = 0.0, []
    for dt in (2e-2, 1e-2, 5e-3):
        p = HartreeParams(lam=1.0, t_end=2.0, dt_init=dt, monitor_stride=1)
        tr = evolve(f, p)
        assert tr.termination == COMPLETED
        mass_worst = max(mass_worst, _drift(tr.series, "mass") / p.t_end)
        energy.append(_drift(tr.series, "energy"))
    ratios = [energy[0] / energy[1], energy[1] / energy[2]]

    lin = evolve(gaussian(g, 1.0, (0.5, 0.0, -0.5)),
                 HartreeParams(lam=0.0, t_end=2.0, dt_init=1e-2, monitor_stride=5))
    lin_worst = max(_drift(lin.series, m) / lin.series[m][0] for m in ("mass", "h_half", "h_one", "h_two"))
    ok = (mass_worst <= MASS_DRIFT and all(RICHARDSON[0] <= r <= RICHARDSON[1] for r in ratios)
          and lin_worst <= LINEAR_NORM_DRIFT)
    assert verdict(criterion_log, 6, ok,
                   f"mass drift/time {mass_worst:.1e}; energy Richardson ratios "
                   f"{ratios[0]:.3f}, {ratios[1]:.3f}; linear H^s drift {lin_worst:.1e}")


def test_criterion_7_fock_identities(tmp_path, criterion_log):
    cfg = load("fock_check.cfg")
    assert (cfg.fock["modes"], cfg.fock["n_max"], cfg.fock["trials"]) == (2, 40, 100)
    t0 = time.perf_counter()
    rep = experiments.run_fock_check(cfg, tmp_path)
    runtime = time.perf_counter() - t0
    ids = rep["identities"]
    ok = rep["status"] == "passed" and runtime < FOCK_RUNTIME and ids["phase_average"]["evaluated"] >= 6
    worst = ", ".join(f"{k} {v['max_defect']:.1e}" for k, v in sorted(ids.items()))
    assert verdict(criterion_log, 7, ok, f"status {rep['status']} in {runtime:.1f}s; max defects: {worst}")


SMALL = {
    "evolve": "experiment = evolve\ngrid.n = 16\ngrid.box_length = 16.0\nparams.lam = 1.0\n"
              "params.t_end = 0.3\nparams.dt_init = 0.02\n",
    "reg-sweep": "experiment = reg-sweep\ngrid.n = 16\ngrid.box_length = 16.0\nparams.lam = 1.0\n"
                 "params.t_end = 0.3\nparams.dt_init = 0.02\nparams.monitor_stride = 5\n"
                 "sweep = [0.4, 0.2, 0.1, 0.05, 0.025]\n",
    "blowup": "experiment = blowup\ngrid.n = 16\ngrid.box_length = 16.0\nparams.lam_factor = 3.0\n"
              "params.t_end = 1.0\nparams.dt_init = 0.02\n",
    "critical-lambda": "experiment = critical-lambda\ngrid.n = 16\ngrid.box_length = 16.0\n"
                       "critical.starts = ['gaussian', 'random']\nseed = 4\n",
    "fock-check": "experiment = fock-check\nfock.n_max = 20\nfock.trials = 10\nfock.phase_trials = 1\n"
                  "seed = 5\n",
    "inequalities": "experiment = inequalities\ngrid.n = 16\ngrid.box_length = 16.0\n"
                    "inequalities.trials = 10\nseed = 6\n",
}


def test_criterion_8_determinism(tmp_path, criterion_log):
    mismatched = []
    for name, text in SMALL.items():
        cfg = config.from_mapping(config.parse_text(text))
        outs = []
        for rerun in range(2):
            out = tmp_path / f"{name}-{rerun}"
            experiments.run(cfg, out, jobs=1 + rerun if name == "reg-sweep" else 1)
            outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        if outs[0] != outs[1] or not outs[0]:
            mismatched.append(name)
    ok = not mismatched
    assert verdict(criterion_log, 8, ok,
                   f"{len(SMALL)} experiments rerun, byte-identical outputs"
                   + (f"; mismatched: {', '.join(mismatched)}" if mismatched else ""))
