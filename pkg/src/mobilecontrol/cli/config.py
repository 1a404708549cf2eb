"""Experiment configuration: TOML documents, overrides and validation."""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import tomli

from ..errors import ConfigError, InvalidArgumentError
from ..pde_solver import Frozen, Quasilinear, SpatialGrid, build_grid
from .expr import compile_expression

EXPERIMENTS = ("solve", "sweep", "pipeline", "picard", "certify", "witness")

# section -> field -> default (None: optional, no default)
SCHEMA = {
    "": {"experiment": None, "name": "run"},
    "grid": {"n": 200},
    "time": {"T": 1.0, "dt": None},
    "law": {"kind": "frozen", "b": "1", "a": None, "state_range": [-10.0, 10.0]},
    "data": {"y0": "sin(pi*x)", "y_d": "0"},
    "control": {"m": 0.0, "r": 0.0, "l": 1.0},
    "solve": {"oracle": True},
    "synthesis": {"eps": 0.1, "l": 0.5, "T_budget": None, "ladder_max_exponent": 20,
                  "delta_ratio": 2.5, "time_pieces": 6, "nnls_iter": 5000},
    "picard": {"R": 1.0, "gamma": 1.0, "max_iters": 5, "fix_tol": 1e-4},
    "certify": {"t_probe": None, "decay_T": [0.01, 0.1, 1.0], "comparison_scale": 0.5},
    "witness": {"omega": [0.0, 0.3], "probe": [0.4, 0.9], "count": 50, "amplitude": 100.0,
                "seed": 0, "pieces": 10},
}


@dataclass
class ExperimentConfig:
    experiment: str
    raw: dict
    grid: SpatialGrid
    law: object
    y0: np.ndarray
    y_d: np.ndarray
    source_text: str = ""
    overrides: list = field(default_factory=list)

    def get(self, section: str, key: str):
        return self.raw[section][key]

    @property
    def T(self) -> float:
        return float(self.raw["time"]["T"])

    @property
    def dt(self) -> Optional[float]:
        dt = self.raw["time"]["dt"]
        return None if dt is None else float(dt)


def _parse_value(text: str):
    try:
        return tomli.loads(f"v = {text}")["v"]
    except tomli.TOMLDecodeError:
        return text


def apply_override(doc: dict, item: str) -> None:
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not key=value")
    key, value = item.split("=", 1)
    parts = key.strip().split(".")
    if len(parts) == 1:
        section, name = "", parts[0]
    elif len(parts) == 2:
        section, name = parts
    else:
        raise ConfigError(f"override key {key!r} must be 'field' or 'section.field'")
    if section not in SCHEMA or name not in SCHEMA[section]:
        raise ConfigError(f"override names unknown field {key!r}")
    target = doc if section == "" else doc.setdefault(section, {})
    target[name] = _parse_value(value.strip())


def _fill(doc: dict) -> dict:
    out = {}
    for key, val in doc.items():
        if isinstance(val, dict):
            if key not in SCHEMA or key == "":
                raise ConfigError(f"unknown section [{key}]")
            unknown = set(val) - set(SCHEMA[key])
            if unknown:
                raise ConfigError(f"unknown field(s) {sorted(unknown)} in [{key}]")
        elif key not in SCHEMA[""]:
            raise ConfigError(f"unknown top-level field {key!r}")
    for section, fields in SCHEMA.items():
        if section == "":
            for k, d in fields.items():
                out[k] = doc.get(k, d)
        else:
            given = doc.get(section, {})
            out[section] = {k: given.get(k, d) for k, d in fields.items()}
    return out


def _number(raw, section, key, positive=False, integer=False):
    v = raw[section][key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"[{section}] {key} must be a number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(f"[{section}] {key} must be an integer")
    if not math.isfinite(v) or (positive and not v > 0):
        raise ConfigError(f"[{section}] {key} must be {'positive' if positive else 'finite'}, got {v!r}")
    return int(v) if integer else float(v)


def _data(source, grid: SpatialGrid, name: str) -> np.ndarray:
    if isinstance(source, list):
        vals = np.asarray(source, dtype=float)
        if vals.shape != (grid.n,):
            raise ConfigError(f"[data] {name} lists {vals.size} values, grid has {grid.n} nodes")
    elif isinstance(source, (int, float)) and not isinstance(source, bool):
        vals = np.full(grid.n, float(source))
    else:
        expr = compile_expression(source, ("x",))
        vals = expr(x=grid.nodes)
    if not np.all(np.isfinite(vals)):
        raise ConfigError(f"[data] {name} is not finite on the grid")
    return vals


def build_law(raw: dict, grid: SpatialGrid):
    """Compile and certify the diffusion law; refuses laws violating their bounds."""
    law = raw["law"]
    T = raw["time"]["T"]
    n = grid.n
    if law["kind"] == "frozen":
        expr = compile_expression(str(law["b"]), ("x", "t"))
        if expr.variables == set():
            value = float(expr())
            if not value > 0:
                raise ConfigError(f"diffusion b = {value:g} violates b >= rho > 0")
            return Frozen.constant(value)

        def b(x, t):
            return expr(x=x, t=np.full_like(np.asarray(x, dtype=float), t))
        try:
            return Frozen.from_function(b, T, n, max(n, 50))
        except InvalidArgumentError as exc:
            raise ConfigError(f"diffusion b: {exc}") from exc
    if law["kind"] == "quasilinear":
        if law["a"] is None:
            raise ConfigError("[law] a is required for kind = 'quasilinear'")
        expr = compile_expression(str(law["a"]), ("y",))
        lo, hi = map(float, law["state_range"])
        probe = expr(y=np.linspace(lo, hi, 4 * (n + 1) + 1))
        if not np.all(np.isfinite(probe)):
            raise ConfigError("diffusion a(y) is not finite on the state range")
        if probe.min() <= 0:
            raise ConfigError(f"diffusion a(y) violates inf a > 0 (min sampled {probe.min():.6g})")
        try:
            return Quasilinear.certified(lambda y: expr(y=y), (lo, hi), samples=4 * (n + 1) + 1)
        except InvalidArgumentError as exc:
            raise ConfigError(f"diffusion a(y): {exc}") from exc
    raise ConfigError(f"[law] kind must be 'frozen' or 'quasilinear', got {law['kind']!r}")


def validate(doc: dict, source_text: str = "", overrides=()) -> ExperimentConfig:
    raw = _fill(doc)
    exp = raw["experiment"]
    if exp not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {exp!r}")
    n = _number(raw, "grid", "n", positive=True, integer=True)
    try:
        grid = build_grid(n)
    except InvalidArgumentError as exc:
        raise ConfigError(str(exc)) from exc
    _number(raw, "time", "T", positive=True)
    if raw["time"]["dt"] is not None:
        _number(raw, "time", "dt", positive=True)
    for key in ("eps", "l", "delta_ratio"):
        _number(raw, "synthesis", key, positive=True)
    if not raw["synthesis"]["l"] <= 1:
        raise ConfigError("[synthesis] l must lie in (0, 1]")
    if not raw["synthesis"]["delta_ratio"] > 2:
        raise ConfigError("[synthesis] delta_ratio must exceed 2")
    for key in ("R", "gamma", "fix_tol"):
        _number(raw, "picard", key, positive=True)
    _number(raw, "picard", "max_iters", positive=True, integer=True)
    _number(raw, "witness", "count", positive=True, integer=True)
    _number(raw, "witness", "seed", integer=True)
    _number(raw, "witness", "amplitude", positive=True)
    law = build_law(raw, grid)
    y0 = _data(raw["data"]["y0"], grid, "y0")
    y_d = _data(raw["data"]["y_d"], grid, "y_d")
    return ExperimentConfig(exp, raw, grid, law, y0, y_d, source_text, list(overrides))


def load_config(path, overrides=()) -> ExperimentConfig:
    """Read, override and validate an experiment document.

    Raises
    ------
    ConfigError
        Parse errors (with line and column), unknown fields, non-finite data,
        or a diffusion law that violates its positivity bound.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return loads_config(text, overrides)


def loads_config(text: str, overrides=()) -> ExperimentConfig:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from exc
    doc = copy.deepcopy(doc)
    for item in overrides:
        apply_override(doc, item)
    return validate(doc, text, overrides)
