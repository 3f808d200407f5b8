"""Experiment configuration (TOML) with strict validation.

A config names a setting, a potential family, one schedule table per
driven parameter, the shortcut to apply, numerics and outputs::

    schema_version = 1
    setting = "quantum"
    shortcut = "ff"

    [potential]
    kind = "razavy"

    [schedule.xi]
    kind = "razavy_xivar"
    tau = 0.2

    [numerics]
    n_points = 1024
    dt = 2e-5

Every key is checked before any computation; unknown keys raise
:class:`~flowshortcuts.errors.ConfigError` naming the key path.
"""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigError, FlowShortcutError
from .grid import Grid, TimeMesh
from .models import DrivenPotential, PotentialSpec, ScheduleSpec
from .stochastic import BathSpec

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

SCHEMA_VERSION = 1
SETTINGS = ("quantum", "classical", "stochastic")
SHORTCUTS = ("none", "cd", "ff", "ucd")
OUTPUTS = ("fidelity", "snapshots", "flow", "shortcut", "trajectories", "actions",
           "ensemble", "positions", "eigen", "shell")


@dataclass(frozen=True)
class Numerics:
    """Grid, time-mesh and integrator parameters."""

    q_min: float = -4.0
    q_max: float = 4.0
    n_points: int = 1024
    n_times: int = 400
    dt: float = 2e-5
    n_out: int = 200
    state: int = 1
    scheme: str = "sinc"
    propagator: str = "split_step"
    seed: int = 0
    floor: float = 1e-10
    v_max: float = 1e3
    action: float = 2.0
    n_trajectories: int = 50
    n_particles: int = 100_000

    def __post_init__(self):
        if self.n_points < 16 or self.n_times < 4 or self.n_out < 2:
            raise ConfigError("numerics: need n_points >= 16, n_times >= 4, n_out >= 2")
        if not (self.dt > 0 and self.q_max > self.q_min):
            raise ConfigError("numerics: need dt > 0 and q_max > q_min")
        if self.scheme not in ("sinc", "fd3"):
            raise ConfigError(f"numerics.scheme: unknown {self.scheme!r}")
        if self.propagator not in ("split_step", "crank_nicolson"):
            raise ConfigError(f"numerics.propagator: unknown {self.propagator!r}")
        if self.state < 0 or self.n_trajectories < 1 or self.n_particles < 1 or self.seed < 0:
            raise ConfigError("numerics: state, seed >= 0 and positive ensemble sizes required")

    def grid(self) -> Grid:
        return Grid(self.q_min, self.q_max, self.n_points)


@dataclass(frozen=True)
class Outputs:
    files: tuple = ("fidelity",)
    snapshot_times: tuple = ()

    def __post_init__(self):
        bad = [f for f in self.files if f not in OUTPUTS]
        if bad:
            raise ConfigError(f"outputs.files: unknown artifacts {bad}; choose from {list(OUTPUTS)}")


@dataclass(frozen=True)
class ExperimentConfig:
    setting: str
    potential: PotentialSpec
    schedules: dict
    shortcut: str = "none"
    numerics: Numerics = field(default_factory=Numerics)
    bath: BathSpec = field(default_factory=BathSpec)
    outputs: Outputs = field(default_factory=Outputs)
    raw: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.setting not in SETTINGS:
            raise ConfigError(f"setting: unknown {self.setting!r}; choose from {list(SETTINGS)}")
        if self.shortcut not in SHORTCUTS:
            raise ConfigError(f"shortcut: unknown {self.shortcut!r}; choose from {list(SHORTCUTS)}")
        allowed = {"quantum": ("none", "cd", "ff"), "classical": ("none", "cd", "ff"),
                   "stochastic": ("none", "ucd")}[self.setting]
        if self.shortcut not in allowed:
            raise ConfigError(f"shortcut: {self.shortcut!r} is not available for {self.setting}")

    @property
    def driven(self) -> DrivenPotential:
        return DrivenPotential(self.potential, self.schedules)

    @property
    def tau(self) -> float:
        return self.driven.tau

    def mesh(self) -> TimeMesh:
        return TimeMesh(self.tau, self.numerics.n_times)

    def with_overrides(self, *, seed=None, dt=None, n_points=None) -> "ExperimentConfig":
        """Copy with command-line overrides applied (and echoed in ``raw``)."""
        changes = {k: v for k, v in (("seed", seed), ("dt", dt), ("n_points", n_points)) if v is not None}
        if not changes:
            return self
        raw = {**self.raw, "numerics": {**self.raw.get("numerics", {}), **changes}}
        return replace(self, numerics=replace(self.numerics, **changes), raw=raw)


def _take(table: dict, path: str, allowed) -> dict:
    if not isinstance(table, dict):
        raise ConfigError(f"{path}: expected a table")
    unknown = sorted(set(table) - set(allowed))
    if unknown:
        raise ConfigError(f"{path}: unknown keys {unknown}")
    return table


def _number(table: dict, key: str, path: str, default: float) -> float:
    value = table.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}.{key}: expected a number, got {value!r}")
    return float(value)


def _numbers(values, path: str) -> tuple:
    if not isinstance(values, list):
        raise ConfigError(f"{path}: expected an array of numbers")
    return tuple(_number({"x": v}, "x", path, 0.0) for v in values)


def _potential(table: dict, path: str) -> PotentialSpec:
    _take(table, path, ("kind", "parameters", "mass", "hbar", "base", "table"))
    if "kind" not in table:
        raise ConfigError(f"{path}.kind: missing")
    base = _potential(table["base"], f"{path}.base") if "base" in table else None
    tab = None
    if "table" in table:
        t = _take(table["table"], f"{path}.table", ("q", "values"))
        tab = (_numbers(t.get("q"), f"{path}.table.q"), _numbers(t.get("values"), f"{path}.table.values"))
    params = table.get("parameters", {})
    if not isinstance(params, dict):
        raise ConfigError(f"{path}.parameters: expected a table")
    params = {k: _number(params, k, f"{path}.parameters", 0.0) for k in params}
    try:
        return PotentialSpec(table["kind"], params, _number(table, "mass", path, 1.0),
                             _number(table, "hbar", path, 1.0), base=base, table=tab)
    except ConfigError:
        raise
    except FlowShortcutError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _schedule(table: dict, path: str) -> ScheduleSpec:
    _take(table, path, ("kind", "tau", "start", "end", "value", "times", "values"))
    for key in ("kind", "tau"):
        if key not in table:
            raise ConfigError(f"{path}.{key}: missing")
    samples = None
    if "times" in table or "values" in table:
        samples = (_numbers(table.get("times", []), f"{path}.times"),
                   _numbers(table.get("values", []), f"{path}.values"))
    nums = {k: _number(table, k, path, d) for k, d in (("tau", 0.0), ("start", 0.0), ("end", 1.0),
                                                       ("value", 0.0))}
    try:
        return ScheduleSpec(table["kind"], nums["tau"], nums["start"], nums["end"], nums["value"],
                            samples)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except FlowShortcutError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _dataclass(cls, table: dict, path: str):
    _take(table, path, [f.name for f in fields(cls)])
    defaults = cls()
    kwargs = {}
    for key, value in table.items():
        default = getattr(defaults, key)
        if isinstance(default, tuple):
            if not isinstance(value, list):
                raise ConfigError(f"{path}.{key}: expected an array, got {value!r}")
            value = tuple(value)
        elif isinstance(default, int) and not isinstance(value, int):
            raise ConfigError(f"{path}.{key}: expected an integer, got {value!r}")
        elif isinstance(default, float):
            if not isinstance(value, (int, float)):
                raise ConfigError(f"{path}.{key}: expected a number, got {value!r}")
            value = float(value)
        elif isinstance(default, str) and not isinstance(value, str):
            raise ConfigError(f"{path}.{key}: expected a string, got {value!r}")
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except FlowShortcutError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def config_from_dict(data: dict) -> ExperimentConfig:
    """Validate a parsed config mapping."""
    _take(data, "<root>", ("schema_version", "setting", "shortcut", "potential", "schedule",
                           "numerics", "bath", "outputs"))
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: expected {SCHEMA_VERSION}, got {version!r}")
    for key in ("setting", "potential"):
        if key not in data:
            raise ConfigError(f"{key}: missing")
    potential = _potential(data["potential"], "potential")
    schedules = {name: _schedule(tab, f"schedule.{name}")
                 for name, tab in _take(data.get("schedule", {}), "schedule", potential.parameters).items()}
    bath_tab = _take(data.get("bath", {}), "bath", ("gamma", "temperature"))
    try:
        bath = BathSpec(**{k: _number(bath_tab, k, "bath", 0.0) for k in bath_tab})
    except FlowShortcutError as exc:
        raise ConfigError(f"bath: {exc}") from exc
    numerics = _dataclass(Numerics, data.get("numerics", {}), "numerics")
    outputs = _dataclass(Outputs, data.get("outputs", {}), "outputs")
    return ExperimentConfig(data["setting"], potential, schedules, data.get("shortcut", "none"),
                            numerics, bath, outputs, raw=data)


def loads(text: str) -> ExperimentConfig:
    """Parse TOML text; syntax errors carry line and column."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config syntax: {exc}") from exc
    return config_from_dict(data)


def load(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        return loads(text)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def dumps(cfg: ExperimentConfig) -> str:
    """Serialize the validated config back to TOML (for manifests)."""
    data = config_to_dict(cfg)
    return _toml(data)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    pot = _potential_dict(cfg.potential)
    sched = {}
    for name, s in cfg.schedules.items():
        d = {"kind": s.kind, "tau": s.tau}
        if s.kind == "polynomial_smoothstep":
            d.update(start=s.start, end=s.end)
        elif s.kind == "constant":
            d["value"] = s.value_const
        elif s.kind == "custom_samples":
            d.update(times=list(s.samples[0]), values=list(s.samples[1]))
        sched[name] = d
    num = asdict(cfg.numerics)
    out = {"files": list(cfg.outputs.files), "snapshot_times": list(cfg.outputs.snapshot_times)}
    return {"schema_version": SCHEMA_VERSION, "setting": cfg.setting, "shortcut": cfg.shortcut,
            "potential": pot, "schedule": sched, "numerics": num,
            "bath": {"gamma": cfg.bath.gamma, "temperature": cfg.bath.temperature},
            "outputs": out}


def _potential_dict(p: PotentialSpec) -> dict:
    d = {"kind": p.kind, "mass": p.mass, "hbar": p.hbar, "parameters": dict(p.parameters)}
    if p.base is not None:
        d["base"] = _potential_dict(p.base)
    if p.table is not None:
        d["table"] = {"q": list(p.table[0]), "values": list(p.table[1])}
    return d


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    return "[" + ", ".join(_toml_value(x) for x in v) + "]"


def _toml(data: dict, prefix: str = "") -> str:
    scalars = [f"{k} = {_toml_value(v)}" for k, v in data.items() if not isinstance(v, dict)]
    lines = []
    if scalars:
        if prefix:
            lines.append(f"[{prefix}]")
        lines.extend(scalars)
        lines.append("")
    for k, v in data.items():
        if isinstance(v, dict):
            lines.append(_toml(v, f"{prefix}.{k}" if prefix else k))
    return "\n".join(lines)
