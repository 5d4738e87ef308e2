"""Scenario configuration: a flat, dotted-key TOML file with validated fields.

Example::

    experiment = "edof-sweep"
    seed = 7
    array.n_bs = 128
    array.n_ue = 16
    link.range = 40.0
    sweep.axis = "eta"
    sweep.start = 1
    sweep.stop = 200
    sweep.num = 200

Every key has a default; unknown keys and invalid values are reported
together, each naming the offending key. A JSON object with the same
dotted keys (such as the config echo stored with every result) is accepted
as well.
"""

from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on Python 3.10
    import tomli as tomllib

__all__ = [
    "EXPERIMENTS",
    "ConfigError",
    "ScenarioConfig",
    "load_config",
    "config_from_mapping",
    "default_config",
    "read_mapping",
]

EXPERIMENTS = ("edof-sweep", "rate-sweep", "sumrate-far", "sumrate-near", "cdf", "fit-lobes")

_AXES = {
    "edof-sweep": ("eta",),
    "rate-sweep": ("eta",),
    "fit-lobes": ("eta",),
    "sumrate-far": ("eta_bs", "eta_ue", "phi_max_deg", "rx_snr_db"),
    "sumrate-near": ("eta_bs", "eta_ue", "range", "snr_db"),
    "cdf": ("r_bar",),
}


class ConfigError(ValueError):
    """Raised with every validation problem found in a configuration."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


def _positive(v) -> bool:
    return v > 0


def _at_least_one(v) -> bool:
    return v >= 1


def _non_negative(v) -> bool:
    return v >= 0


def _angle_deg(v) -> bool:
    return -90.0 <= v <= 90.0


def _phi_max_deg(v) -> bool:
    return 0.0 < v <= 90.0


def _fraction(v) -> bool:
    return 0.0 < v < 1.0


@dataclass(frozen=True)
class _Field:
    kind: type
    default: Any
    check: Callable[[Any], bool] | None = None
    rule: str = ""
    choices: tuple | None = None
    optional: bool = False


_SCHEMA: dict[str, _Field] = {
    "experiment": _Field(str, "edof-sweep", choices=EXPERIMENTS),
    "seed": _Field(int, 0, _non_negative, "must be >= 0"),
    "trials": _Field(int, 10_000, _at_least_one, "must be >= 1"),
    "array.n_bs": _Field(int, 64, _at_least_one, "must be >= 1"),
    "array.n_ue": _Field(int, 8, _at_least_one, "must be >= 1"),
    "array.eta_bs": _Field(float, 1.0, _at_least_one, "must be >= 1"),
    "array.eta_ue": _Field(float, 1.0, _at_least_one, "must be >= 1"),
    "array.wavelength": _Field(float, 0.01, _positive, "must be > 0"),
    "link.range": _Field(float, 40.0, _positive, "must be > 0"),
    "link.bearing_deg": _Field(float, 0.0, _angle_deg, "must lie in [-90, 90]"),
    "link.tilt_deg": _Field(float, 0.0, _angle_deg, "must lie in [-90, 90]"),
    "power.snr_db": _Field(float, 90.0),
    "power.rx_snr_db": _Field(float, None, optional=True),
    "users.k": _Field(int, 20, _at_least_one, "must be >= 1"),
    "users.phi_max_deg": _Field(float, 20.0, _phi_max_deg, "must lie in (0, 90]"),
    "users.law": _Field(str, "angle", choices=("angle", "sin")),
    "channel.rician_db": _Field(float, 20.0),
    "channel.ring_radius": _Field(float, 3.0, _positive, "must be > 0"),
    "channel.paths": _Field(int, 5, _at_least_one, "must be >= 1"),
    "channel.distance_model": _Field(str, None, choices=("exact", "near", "far"), optional=True),
    "channel.los_only": _Field(bool, False),
    "fit.alpha": _Field(float, None, lambda v: 0.0 <= v <= 1.0, "must lie in [0, 1]", optional=True),
    "fit.floor_db": _Field(float, -40.0),
    "fit.dominant_fraction": _Field(float, 0.1, _fraction, "must lie in (0, 1)"),
    "sweep.axis": _Field(str, None, optional=True),
    "sweep.values": _Field(list, None, optional=True),
    "sweep.start": _Field(float, None, optional=True),
    "sweep.stop": _Field(float, None, optional=True),
    "sweep.num": _Field(int, 16, _at_least_one, "must be >= 1"),
    "sweep.scale": _Field(str, "linear", choices=("linear", "log")),
    "sweep.split": _Field(str, "bs", choices=("bs", "ue", "equal")),
    "output.path": _Field(str, None, optional=True),
    "output.format": _Field(str, "csv", choices=("csv", "json")),
}


def _flatten(obj: Mapping[str, Any], prefix: str = "") -> dict[str, Any]:
    out: dict[str, Any] = {}
    for key, value in obj.items():
        name = f"{prefix}{key}"
        if isinstance(value, Mapping):
            out.update(_flatten(value, name + "."))
        else:
            out[name] = value
    return out


def _coerce(key: str, fdef: _Field, value, errors: list[str]):
    if value is None and fdef.optional:
        return None
    kind = fdef.kind
    if kind is bool:
        if not isinstance(value, bool):
            errors.append(f"{key}: expected true/false, got {value!r}")
            return None
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            errors.append(f"{key}: expected an integer, got {value!r}")
            return None
        value = int(value)
    elif kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            errors.append(f"{key}: expected a number, got {value!r}")
            return None
        value = float(value)
        if not math.isfinite(value):
            errors.append(f"{key}: must be finite, got {value!r}")
            return None
    elif kind is str:
        if not isinstance(value, str):
            errors.append(f"{key}: expected a string, got {value!r}")
            return None
    elif kind is list:
        if not isinstance(value, list) or not value or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v) for v in value
        ):
            errors.append(f"{key}: expected a non-empty list of numbers, got {value!r}")
            return None
        value = [float(v) for v in value]
    if fdef.choices is not None and value not in fdef.choices:
        errors.append(f"{key}: must be one of {', '.join(fdef.choices)}, got {value!r}")
        return None
    if fdef.check is not None and not fdef.check(value):
        errors.append(f"{key}: {fdef.rule}, got {value!r}")
        return None
    return value


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated scenario parameters addressed by dotted keys."""

    values: Mapping[str, Any] = field(default_factory=dict)

    def __getitem__(self, key: str):
        return self.values[key]

    @property
    def experiment(self) -> str:
        return self.values["experiment"]

    @property
    def seed(self) -> int:
        return self.values["seed"]

    @property
    def trials(self) -> int:
        return self.values["trials"]

    def to_dict(self) -> dict[str, Any]:
        """Flat dotted-key dictionary (the config echo)."""
        return dict(self.values)

    def replace(self, **overrides) -> "ScenarioConfig":
        """Copy with dotted keys overridden; ``seed=3`` or ``**{"link.range": 10}``."""
        merged = dict(self.values)
        merged.update(overrides)
        return config_from_mapping(merged)


def _cross_check(v: dict[str, Any], errors: list[str]) -> None:
    exp = v.get("experiment")
    axis = v.get("sweep.axis")
    if exp in _AXES and axis is not None and axis not in _AXES[exp]:
        errors.append(f"sweep.axis: {exp} supports {', '.join(_AXES[exp])}, got {axis!r}")
    if v.get("sweep.scale") == "log" and v.get("sweep.values") is None:
        start = v.get("sweep.start")
        if start is not None and start <= 0:
            errors.append(f"sweep.start: must be > 0 for a log sweep, got {start!r}")
    start, stop = v.get("sweep.start"), v.get("sweep.stop")
    if start is not None and stop is not None and stop < start:
        errors.append(f"sweep.stop: must be >= sweep.start ({start}), got {stop}")


def config_from_mapping(data: Mapping[str, Any]) -> ScenarioConfig:
    """Validate a (nested or flat dotted-key) mapping into a :class:`ScenarioConfig`."""
    flat = _flatten(data)
    errors: list[str] = []
    for key in flat:
        if key not in _SCHEMA:
            errors.append(f"{key}: unknown key")
    values: dict[str, Any] = {}
    for key, fdef in _SCHEMA.items():
        if key in flat:
            values[key] = _coerce(key, fdef, flat[key], errors)
        else:
            values[key] = fdef.default
    if values.get("sweep.axis") is None and values.get("experiment") in _AXES:
        values["sweep.axis"] = _AXES[values["experiment"]][0]
    _cross_check(values, errors)
    if errors:
        raise ConfigError(errors)
    return ScenarioConfig(values)


def default_config(experiment: str = "edof-sweep") -> ScenarioConfig:
    return config_from_mapping({"experiment": experiment})


def _reject_duplicates(pairs):
    seen: dict[str, Any] = {}
    for key, value in pairs:
        if key in seen:
            raise ConfigError([f"{key}: duplicate key"])
        seen[key] = value
    return seen


def read_mapping(path: str | Path) -> dict[str, Any]:
    """Parse a TOML (or JSON) scenario file into a flat dotted-key mapping.

    A JSON result file is reduced to its config echo.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        try:
            data = json.loads(text, object_pairs_hook=_reject_duplicates)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"parse error: {exc}"]) from None
        # Accept a full result file and use its config echo.
        if isinstance(data, Mapping) and isinstance(data.get("metadata"), Mapping):
            data = data["metadata"]
        if isinstance(data, Mapping) and isinstance(data.get("config"), Mapping):
            data = data["config"]
    else:
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError([f"parse error: {exc}"]) from None
    if not isinstance(data, Mapping):
        raise ConfigError(["top level must be a table of keys"])
    return _flatten(data)


def load_config(path: str | Path) -> ScenarioConfig:
    """Read and validate a TOML (or JSON) scenario file.

    Raises
    ------
    ConfigError
        On parse errors, duplicate or unknown keys and invalid values.
    FileNotFoundError
        If ``path`` does not exist.
    """
    return config_from_mapping(read_mapping(path))
