"""Experiment configuration files.

One ``key = value`` per line, ``#`` starts a comment, dotted keys nest::

    experiment = reg-sweep
    grid.n = 64
    grid.box_length = 32.0
    initial.kind = gaussian
    initial.sigma = 1.0
    params.lam = 1.0
    sweep = [0.2, 0.1, 0.05, 0.025, 0.0125]

Values are Python literals; anything that is not a literal is kept as a
bare string.
"""

from __future__ import annotations

import ast
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .evolution import HartreeParams

EXPERIMENTS = ("evolve", "reg-sweep", "blowup", "critical-lambda", "fock-check", "inequalities")
INITIAL_KINDS = ("gaussian", "plane_wave", "file")

_PARAM_FIELDS = {f.name for f in dataclasses.fields(HartreeParams)}

# defaults per section; a key absent here is rejected
_SECTIONS = {
    "grid": {"n": 64, "box_length": 32.0},
    "initial": {"kind": "gaussian", "sigma": 1.0, "center": (0.0, 0.0, 0.0),
                "normalized": True, "k_index": (0, 0, 0), "path": None},
    "critical": {"starts": ("gaussian", "random"), "max_iters": 500, "step": 0.5,
                 "tol": 1e-8, "coarse_n": None},
    "fock": {"modes": 2, "n_max": 40, "trials": 100, "f_norm": 1.0,
             "phase_trials": 2, "max_particles": 6},
    "inequalities": {"trials": 200, "bandwidth": None},
}
_TOP = {"experiment", "sweep", "output_dir", "seed"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    grid: dict
    initial: dict
    params: dict
    sweep: Optional[tuple] = None
    output_dir: Path = Path("out")
    seed: int = 0
    critical: dict = field(default_factory=dict)
    fock: dict = field(default_factory=dict)
    inequalities: dict = field(default_factory=dict)

    def hartree_params(self, **overrides) -> HartreeParams:
        p = {k: v for k, v in self.params.items() if k in _PARAM_FIELDS}
        p.update(overrides)
        try:
            return HartreeParams(**p)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad params: {exc}") from exc

    def with_(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def _literal(text: str) -> Any:
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def parse_text(text: str) -> dict:
    """Flat ``dotted.key -> value`` mapping, in file order."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = _literal(value.strip())
    return out


def _as_float(section: str, key: str, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key} must be a number, got {value!r}")
    return float(value)


def from_mapping(flat: dict) -> ExperimentConfig:
    top = {}
    sections = {name: dict(defaults) for name, defaults in _SECTIONS.items()}
    params = {}
    for key, value in flat.items():
        head, _, rest = key.partition(".")
        if not rest:
            if head not in _TOP:
                raise ConfigError(f"unknown key {key!r}")
            top[head] = value
        elif head == "params":
            if rest not in _PARAM_FIELDS and rest != "lam_factor":
                raise ConfigError(f"unknown parameter {key!r}")
            params[rest] = value
        elif head in sections and rest in sections[head]:
            sections[head][rest] = value
        else:
            raise ConfigError(f"unknown key {key!r}")

    experiment = top.get("experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {', '.join(EXPERIMENTS)}; got {experiment!r}")

    grid = sections["grid"]
    n = grid["n"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 4 or n % 2:
        raise ConfigError(f"grid.n must be an even integer >= 4, got {n!r}")
    grid["box_length"] = _as_float("grid", "box_length", grid["box_length"])
    if not grid["box_length"] > 0:
        raise ConfigError("grid.box_length must be positive")

    initial = sections["initial"]
    if initial["kind"] not in INITIAL_KINDS:
        raise ConfigError(f"initial.kind must be one of {', '.join(INITIAL_KINDS)}")
    if initial["kind"] == "file" and not initial["path"]:
        raise ConfigError("initial.kind = file needs initial.path")

    for k, v in params.items():
        if k in ("detect_blowup",):
            if not isinstance(v, bool):
                raise ConfigError(f"params.{k} must be True or False")
        elif k in ("monitor_stride", "snapshot_stride"):
            if isinstance(v, bool) or not isinstance(v, int):
                raise ConfigError(f"params.{k} must be an integer")
        elif v is not None:
            params[k] = _as_float("params", k, v)
    if "lam" not in params and "lam_factor" not in params and experiment in ("evolve", "reg-sweep", "blowup"):
        raise ConfigError("params.lam (or params.lam_factor) is required")

    sweep = top.get("sweep")
    if sweep is not None:
        if not isinstance(sweep, (list, tuple)) or not sweep:
            raise ConfigError("sweep must be a non-empty list")
        sweep = tuple(_as_float("", "sweep", v) for v in sweep)

    seed = top.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"seed must be an unsigned integer, got {seed!r}")

    cfg = ExperimentConfig(
        experiment=experiment,
        grid=grid,
        initial=initial,
        params=params,
        sweep=sweep,
        output_dir=Path(str(top.get("output_dir", "out"))),
        seed=seed,
        critical=sections["critical"],
        fock=sections["fock"],
        inequalities=sections["inequalities"],
    )
    if "lam" in params or experiment in ("evolve", "reg-sweep", "blowup"):
        cfg.hartree_params(lam=params.get("lam", 0.0))  # surface bad params now
    return cfg


def load(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return from_mapping(parse_text(text))
