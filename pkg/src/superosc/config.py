"""Scenario configuration: presets, flat YAML files and environment overrides."""
from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, fields, replace

import yaml

from .core import ParameterRangeError, SuperoscSpec
from .opener import max_tau_step

ENV_PREFIX = "SUPEROSC_"


class ConfigError(ValueError):
    """Invalid or inconsistent scenario configuration."""


# (unit, description) per key, written as comments next to each value
UNITS = {
    "preset": ("-", "base preset: default | weak"),
    "n_order": ("-", "order N of the superoscillatory family"),
    "alpha": ("1/a", "target local wavenumber"),
    "unit_length": ("a", "length unit a"),
    "window_half_width": ("a", "release window half-width L"),
    "open_duration": ("hbar/E", "opening duration T (opener support [-T, 0])"),
    "opener_shape": ("-", "top_hat | smooth_bump | none"),
    "tau_step": ("hbar/E", "clock step; 0 = largest allowed, pi/(4 alpha^2)"),
    "k_max": ("1/a", "momentum cutoff for released branches; 0 = alpha + 20 pi/L"),
    "k_step": ("1/a", "momentum grid step; 0 = pi/(8L)"),
    "energy_step": ("E", "energy bin width; 0 = min(1/T, 2 pi/L)/4"),
    "grid_step": ("a", "box sampling step; 0 = 8 points per shortest wavelength"),
    "quad_nodes": ("-", "window quadrature nodes; 0 = automatic"),
    "trapped_modes": ("-", "box modes kept for trapped branches; 0 = k_max * 2 N a"),
    "tau_max_factor": ("T", "characteristic-function range in units of T"),
    "threads": ("-", "BLAS/OpenMP thread limit"),
    "out_dir": ("-", "output directory"),
}

# keys that do not change results
NON_PHYSICS = {"threads", "out_dir"}


@dataclass(frozen=True)
class ScenarioConfig:
    preset: str = "default"
    n_order: int = 100
    alpha: float = 4.0
    unit_length: float = 1.0
    window_half_width: float = 10.0
    open_duration: float = 10.0
    opener_shape: str = "top_hat"
    tau_step: float = 0.0
    k_max: float = 0.0
    k_step: float = 0.0
    energy_step: float = 0.0
    grid_step: float = 0.0
    quad_nodes: int = 0
    trapped_modes: int = 0
    tau_max_factor: float = 4.0
    threads: int = 1
    out_dir: str = "runs/default"

    def __post_init__(self):
        self.validate()

    # derived objects -----------------------------------------------------
    @property
    def spec(self) -> SuperoscSpec:
        return SuperoscSpec(self.n_order, self.alpha, self.unit_length)

    @property
    def clock_step(self) -> float:
        return self.tau_step or max_tau_step(self.alpha / self.unit_length)

    def validate(self) -> None:
        try:
            spec = SuperoscSpec(self.n_order, self.alpha, self.unit_length)
        except (ParameterRangeError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        if self.preset not in PRESETS:
            raise ConfigError(f"preset must be one of {sorted(PRESETS)}, got {self.preset!r}")
        if not self.window_half_width > 0:
            raise ConfigError("window_half_width must be positive (a zero-width window releases nothing)")
        if self.window_half_width >= spec.half_length:
            raise ConfigError(f"window_half_width must be below the box half-length {spec.half_length:.4g}")
        if not self.open_duration > 0:
            raise ConfigError("open_duration must be positive")
        if self.opener_shape not in ("top_hat", "smooth_bump", "none"):
            raise ConfigError(f"unknown opener_shape {self.opener_shape!r}")
        if self.tau_step < 0 or self.tau_step > max_tau_step(self.alpha / self.unit_length) * (1 + 1e-12):
            raise ConfigError(f"tau_step must lie in (0, {max_tau_step(self.alpha):.4g}] (0 = automatic)")
        m = self.alpha * self.n_order * self.unit_length
        if abs(m - round(m)) > 1e-9:
            raise ConfigError("alpha * n_order * unit_length must be an integer so that sin(alpha x) "
                              "is a box eigenstate for the control run")
        for key in ("k_max", "k_step", "energy_step", "grid_step"):
            if getattr(self, key) < 0:
                raise ConfigError(f"{key} must be >= 0")
        if self.quad_nodes < 0 or self.trapped_modes < 0 or self.threads < 1:
            raise ConfigError("quad_nodes and trapped_modes must be >= 0, threads >= 1")
        if self.tau_max_factor <= 1:
            raise ConfigError("tau_max_factor must exceed 1 to probe tau > T")

    # serialization ---------------------------------------------------------
    def to_dict(self) -> dict:
        return asdict(self)

    def to_yaml(self) -> str:
        lines = ["# superosc scenario (units: hbar = m = 1, lengths in a)"]
        for f in fields(self):
            unit, desc = UNITS[f.name]
            val = getattr(self, f.name)
            text = yaml.safe_dump({f.name: val}, default_flow_style=True).strip()[1:-1]
            lines.append(f"{text}  # [{unit}] {desc}")
        return "\n".join(lines) + "\n"

    def hash(self) -> str:
        phys = {k: v for k, v in self.to_dict().items() if k not in NON_PHYSICS}
        blob = json.dumps(phys, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def with_overrides(self, **kw) -> "ScenarioConfig":
        return replace(self, **_coerce_all(kw))


PRESETS = {
    "default": dict(n_order=100, alpha=4.0, window_half_width=10.0, open_duration=10.0,
                    out_dir="runs/default"),
    "weak": dict(n_order=25, alpha=2.0, window_half_width=5.0, open_duration=5.0,
                 out_dir="runs/weak"),
}


def _field_types() -> dict:
    defaults = ScenarioConfig.__dataclass_fields__
    return {name: type(f.default) for name, f in defaults.items()}


def _coerce(key: str, value):
    types = _field_types()
    if key not in types:
        raise ConfigError(f"unknown config key {key!r}")
    typ = types[key]
    try:
        if typ is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if typ is float:
            v = float(value)
            if not math.isfinite(v):
                raise ValueError
            return v
        return str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: cannot interpret {value!r} as {typ.__name__}") from exc


def _coerce_all(d: dict) -> dict:
    return {k: _coerce(k, v) for k, v in d.items()}


def load_config(path: str | None = None, preset: str | None = None, env: dict | None = None,
                **overrides) -> ScenarioConfig:
    """Preset < config file < environment < explicit overrides."""
    env = os.environ if env is None else env
    file_vals = {}
    if path:
        try:
            with open(path) as fh:
                file_vals = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: not valid YAML: {exc}") from exc
        if not isinstance(file_vals, dict):
            raise ConfigError(f"{path}: expected flat key: value pairs")
    env_vals = {}
    for key in _field_types():
        name = ENV_PREFIX + key.upper()
        if name in env:
            env_vals[key] = env[name]
    base = preset or env_vals.get("preset") or file_vals.get("preset") or "default"
    if base not in PRESETS:
        raise ConfigError(f"unknown preset {base!r}")
    merged = {"preset": base, **PRESETS[base]}
    for src in (file_vals, env_vals, {k: v for k, v in overrides.items() if v is not None}):
        merged.update(_coerce_all(src))
    merged["preset"] = base
    try:
        return ScenarioConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
