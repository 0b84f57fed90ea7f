"""Run configuration: a flat dataclass, an INI-style file format with exact
round-tripping, and per-variant defaults for the benchmark problems."""

from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass, fields


class ConfigurationError(ValueError):
    """Raised for malformed or inconsistent run configurations."""


PROBLEMS = ("damped_osc", "burgers", "coupled", "twod_linear")
VARIANTS = ("original", "to", "fs")
OBSERVABLE_SETS = ("loc1", "loc2", "all")
BASES = ("chebyshev", "monomial")
FS_MODES = ("exact", "shadow")


@dataclass
class RunConfig:
    """Everything needed to reproduce one training run byte for byte."""

    problem: str = "damped_osc"
    variant: str = "to"
    # model shape
    n_qubits: int = 4
    depth: int = 3                  # ansatz depth (original / fs)
    observables: str = "loc2"       # candidate set for the trainable observable
    basis: str = "chebyshev"        # weight functions for the flipped model
    fs_mode: str = "exact"          # exact expectations or simulated shadows
    # optimization
    epochs: int = 2000
    lr: float = 0.05
    stop_loss: float = 1e-6
    patience: int = 200
    seed: int = 0
    ub_seed: int = 2                # static basis-change unitary (TO candidates)
    # problem-size overrides (0 = keep the problem's default grid)
    grid_m: int = 0
    # shadow budget knobs
    shadow_c0: float = 34.0
    shadow_eps: float = 1.0
    shadow_exponent: int = 2
    shadow_w_max: int = 1
    # output
    out_dir: str = "runs/latest"
    chart: bool = False

    def validate(self) -> "RunConfig":
        checks = [
            ("problem", self.problem, PROBLEMS),
            ("variant", self.variant, VARIANTS),
            ("observables", self.observables, OBSERVABLE_SETS),
            ("basis", self.basis, BASES),
            ("fs_mode", self.fs_mode, FS_MODES),
        ]
        for name, value, allowed in checks:
            if value not in allowed:
                raise ConfigurationError(
                    f"{name} must be one of {', '.join(allowed)}; got {value!r}"
                )
        if not 1 <= self.n_qubits <= 12:
            raise ConfigurationError("n_qubits must be between 1 and 12")
        if self.depth < 1:
            raise ConfigurationError("depth must be at least 1")
        if self.epochs < 1:
            raise ConfigurationError("epochs must be at least 1")
        if self.lr <= 0:
            raise ConfigurationError("lr must be positive")
        if self.grid_m < 0:
            raise ConfigurationError("grid_m must be nonnegative (0 = default)")
        if self.shadow_eps <= 0 or self.shadow_c0 <= 0:
            raise ConfigurationError("shadow budget constants must be positive")
        if self.observables == "all" and self.n_qubits > 6:
            raise ConfigurationError("the full Pauli candidate set needs n_qubits <= 6")
        return self


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _parse_value(name: str, raw: str):
    kind = _FIELDS[name].type
    raw = raw.strip()
    if kind == "bool":
        low = raw.lower()
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        raise ConfigurationError(f"{name} expects a boolean, got {raw!r}")
    if kind == "int":
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigurationError(f"{name} expects an integer, got {raw!r}") from exc
    if kind == "float":
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigurationError(f"{name} expects a number, got {raw!r}") from exc
    return raw


def config_from_text(text: str) -> RunConfig:
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"could not parse configuration: {exc}") from exc
    if parser.sections() != ["run"]:
        raise ConfigurationError("expected exactly one [run] section")
    values = {}
    for key, raw in parser.items("run"):
        if key not in _FIELDS:
            raise ConfigurationError(f"unknown configuration key {key!r}")
        values[key] = _parse_value(key, raw)
    return RunConfig(**values).validate()


def config_to_text(config: RunConfig) -> str:
    parser = configparser.ConfigParser()
    parser["run"] = {}
    for f in fields(RunConfig):
        value = getattr(config, f.name)
        parser["run"][f.name] = str(value).lower() if isinstance(value, bool) else str(value)
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return config_from_text(fh.read())


def save_config(config: RunConfig, path) -> None:
    with open(path, "w") as fh:
        fh.write(config_to_text(config))


def apply_overrides(config: RunConfig, overrides: dict) -> RunConfig:
    """Return a copy with the given fields replaced (command-line flags win)."""
    unknown = set(overrides) - set(_FIELDS)
    if unknown:
        raise ConfigurationError(f"unknown configuration keys: {sorted(unknown)}")
    return dataclasses.replace(config, **overrides).validate()


# per (problem, variant) defaults tuned so the stock runs converge; anything
# can still be overridden from a file or the command line
_DEFAULTS = {
    ("damped_osc", "original"): dict(depth=3, epochs=1500),
    ("damped_osc", "to"): dict(epochs=4000, stop_loss=1e-9, patience=1000),
    ("damped_osc", "fs"): dict(depth=3, epochs=2000, stop_loss=1e-7, patience=500),
    ("burgers", "original"): dict(depth=3, epochs=1500),
    ("burgers", "to"): dict(epochs=4000, stop_loss=1e-9, patience=1000),
    ("burgers", "fs"): dict(depth=3, epochs=2000, stop_loss=1e-7, patience=500),
    ("coupled", "original"): dict(depth=3, epochs=1500),
    ("coupled", "to"): dict(epochs=4000, stop_loss=1e-9, patience=1000),
    ("coupled", "fs"): dict(depth=3, epochs=2000, stop_loss=1e-7, patience=500),
    ("twod_linear", "original"): dict(depth=3, epochs=3000, lr=0.08, stop_loss=1e-3, patience=2000),
    ("twod_linear", "to"): dict(epochs=4000, stop_loss=1e-9, patience=1000),
    ("twod_linear", "fs"): dict(depth=1, epochs=400, stop_loss=1e-3, patience=400),
}


def default_config(problem: str, variant: str) -> RunConfig:
    config = RunConfig(problem=problem, variant=variant)
    tweaks = _DEFAULTS.get((problem, variant), {})
    return dataclasses.replace(config, **tweaks).validate()
