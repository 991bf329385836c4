"""Run configuration: one TOML file with nested sections, validated on load.

Every section has a fixed key set; unknown keys are rejected so that typos do
not silently fall back to defaults.  Command-line overrides are applied to the
raw tables before validation, so they pass the same range checks.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import tomli_w

try:
    import tomllib as tomli
except ModuleNotFoundError:  # Python < 3.11
    import tomli

from .init import SCENARIOS, InitSpec
from .lattice import BoundarySpec, DomainSpec
from .thermo import N_PHASES, ConfigError, ModelParams, PhaseThermo, TemperatureSchedule, stable_dt
from .timeloop import MovingWindow, StepSchedule

INIT_KINDS = ("voronoi",) + SCENARIOS

DEFAULTS: dict = {
    "domain": {"cells": [64, 64, 64], "dx": 1.0, "blocks": [1, 1, 1]},
    "model": {
        "epsilon": 3.0,
        "tau": [1.0] * N_PHASES,
        "gamma": 1.0,
        "diffusivity": [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [1.0, 1.0]],
        "mobility_weight": "phi",
        "at_phi_tol": 1e-9,
        "at_grad_tol": 1e-12,
    },
    "thermo": {
        "curvature": [[1.0, 1.0]] * N_PHASES,
        "c_eut": [[0.8, 0.1], [0.1, 0.8], [0.1, 0.1], [1 / 3, 1 / 3]],
        "slope": [[0.0, 0.0]] * N_PHASES,
        "latent": [10.0, 10.0, 10.0, 0.0],
    },
    "temperature": {"T_eut": 1.0, "G": 0.0, "v": 0.0, "z0": 0.0},
    "time": {
        "steps": 100,
        "dt": 0.0,
        "dt_safety": 0.5,
        "overlap_mode": "mu_only",
        "variant": "opt_full",
        "fast_rsqrt": False,
        "threads": 1,
    },
    "boundary": {"kind": "directional", "mu_top": [0.0, 0.0]},
    "init": {
        "kind": "voronoi",
        "nuclei_count": 16,
        "volume_fractions": [1 / 3, 1 / 3, 1 / 3],
        "nuclei_height": 8,
        "rng_seed": 0,
        "liquid_mu": [0.0, 0.0],
        "relax_steps": 100,
    },
    "window": {"enabled": False, "front_offset_target": 20, "check_every": 1},
    "output": {
        "directory": "out",
        "checkpoint_every": 0,
        "mesh_every": 0,
        "metrics_every": 100,
        "mesh_ratio": 1.0,
        "scrollback": False,
    },
}


@dataclass
class OutputSpec:
    directory: str = "out"
    checkpoint_every: int = 0
    mesh_every: int = 0
    metrics_every: int = 100
    mesh_ratio: float = 1.0
    scrollback: bool = False

    def __post_init__(self):
        if not 0.0 < self.mesh_ratio <= 1.0:
            raise ConfigError(f"output.mesh_ratio must lie in (0, 1], got {self.mesh_ratio!r}")
        for name in ("checkpoint_every", "mesh_every", "metrics_every"):
            if getattr(self, name) < 0:
                raise ConfigError(f"output.{name} must be >= 0")


@dataclass
class RunConfig:
    domain: DomainSpec
    model: ModelParams
    thermo: PhaseThermo
    temperature: TemperatureSchedule
    init: InitSpec
    init_kind: str
    schedule: StepSchedule
    boundary: BoundarySpec
    window: MovingWindow | None
    output: OutputSpec
    steps: int
    threads: int
    tables: dict  # effective raw tables, dt resolved

    @property
    def dt(self) -> float:
        return self.schedule.dt

    def dump(self) -> str:
        return tomli_w.dumps(self.tables)

    def write_effective(self, path) -> None:
        Path(path).write_text(self.dump())


def _merge(base: dict, extra: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in extra.items():
        name = f"{where}{key}"
        if key not in base:
            raise ConfigError(f"unknown configuration key {name!r}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{name!r} must be a table")
            out[key] = _merge(base[key], val, name + ".")
        else:
            out[key] = val
    return out


def _number(tables, section, key, kind=float):
    val = tables[section][key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{section}.{key} must be a number, got {val!r}")
    if kind is int:
        if isinstance(val, float) and not val.is_integer():
            raise ConfigError(f"{section}.{key} must be an integer, got {val!r}")
        return int(val)
    return float(val)


def _triple(tables, section, key):
    val = tables[section][key]
    if not isinstance(val, list) or len(val) != 3:
        raise ConfigError(f"{section}.{key} must be a list of three integers, got {val!r}")
    return tuple(int(v) for v in val)


def _gamma(val):
    if isinstance(val, (int, float)) and not isinstance(val, bool):
        g = np.full((N_PHASES, N_PHASES), float(val))
        np.fill_diagonal(g, 0.0)
        return g
    return np.asarray(val, dtype=np.float64)


def parse_overrides(pairs) -> dict:
    """``["time.steps=10", ...]`` -> nested dict, values parsed as TOML literals."""
    out: dict = {}
    for item in pairs:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        dotted, raw = item.split("=", 1)
        try:
            value = tomli.loads(f"v = {raw}")["v"]
        except tomli.TOMLDecodeError:
            value = raw
        node = out
        *head, last = dotted.strip().split(".")
        for part in head:
            node = node.setdefault(part, {})
        node[last] = value
    return out


def build_config(raw: dict, overrides: dict | None = None) -> RunConfig:
    tables = _merge(DEFAULTS, raw)
    if overrides:
        tables = _merge(tables, overrides)

    domain = DomainSpec(_triple(tables, "domain", "cells"), _number(tables, "domain", "dx"),
                        _triple(tables, "domain", "blocks"))
    m = tables["model"]
    model = ModelParams(_number(tables, "model", "epsilon"), m["tau"], _gamma(m["gamma"]), m["diffusivity"],
                        m["mobility_weight"], _number(tables, "model", "at_phi_tol"),
                        _number(tables, "model", "at_grad_tol"))
    th = tables["thermo"]
    thermo = PhaseThermo(th["curvature"], th["c_eut"], th["slope"], th["latent"])
    temperature = TemperatureSchedule(*(_number(tables, "temperature", k) for k in ("T_eut", "G", "v", "z0")))

    steps = _number(tables, "time", "steps", int)
    threads = _number(tables, "time", "threads", int)
    if steps < 0:
        raise ConfigError("time.steps must be >= 0")
    if threads < 1:
        raise ConfigError("time.threads must be >= 1")
    dt = _number(tables, "time", "dt")
    if dt < 0.0:
        raise ConfigError("time.dt must be >= 0 (0 selects the stable step)")
    if dt == 0.0:
        nz = domain.global_cells[2]
        T_top = temperature.T_eut + temperature.G * (nz * domain.dx - temperature.z0)
        dt = stable_dt(model, thermo, temperature, domain.dx, max(temperature.T_eut, T_top),
                       _number(tables, "time", "dt_safety"))
        tables["time"]["dt"] = dt

    out = OutputSpec(str(tables["output"]["directory"]),
                     *(_number(tables, "output", k, int) for k in ("checkpoint_every", "mesh_every", "metrics_every")),
                     _number(tables, "output", "mesh_ratio"), bool(tables["output"]["scrollback"]))
    schedule = StepSchedule(dt, tables["time"]["overlap_mode"], out.checkpoint_every, out.mesh_every,
                            out.metrics_every, tables["time"]["variant"], bool(tables["time"]["fast_rsqrt"]))

    b = tables["boundary"]
    if b["kind"] == "directional":
        boundary = BoundarySpec.directional(b["mu_top"])
    elif b["kind"] == "periodic":
        boundary = BoundarySpec.all_periodic()
    else:
        raise ConfigError(f"boundary.kind must be 'directional' or 'periodic', got {b['kind']!r}")

    ini = tables["init"]
    if ini["kind"] not in INIT_KINDS:
        raise ConfigError(f"init.kind must be one of {INIT_KINDS}, got {ini['kind']!r}")
    init = InitSpec(_number(tables, "init", "nuclei_count", int), tuple(ini["volume_fractions"]),
                    _number(tables, "init", "nuclei_height", int), _number(tables, "init", "rng_seed", int),
                    tuple(ini["liquid_mu"]), _number(tables, "init", "relax_steps", int))

    w = tables["window"]
    window = None
    if w["enabled"]:
        if boundary.periodic()[2]:
            raise ConfigError("the moving window needs a non-periodic z axis")
        window = MovingWindow(_number(tables, "window", "front_offset_target", int),
                              check_every=_number(tables, "window", "check_every", int))
        if window.check_every < 1:
            raise ConfigError("window.check_every must be >= 1")

    return RunConfig(domain, model, thermo, temperature, init, ini["kind"], schedule, boundary, window,
                     out, steps, threads, tables)


def load_config(path, overrides: dict | None = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc.strerror or exc}") from exc
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return build_config(raw, overrides)
