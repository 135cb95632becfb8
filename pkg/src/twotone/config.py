"""Strict JSON configuration schema for devices, drives and scenarios.

Physical quantities carry their unit in the key name (``_hz``, ``_rad``;
occupancies and ratios are dimensionless) and are converted to angular
frequencies on load. The schema is strict: unknown keys are rejected with
their full path, physical parameters have no defaults, and only numerical
knobs (grid sizes, spans) may be omitted.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import ConfigError
from .sysmodel import Cavity, Drive, DriveSet, MechanicalMode, SystemConfig
from .synthesis import NoiseModel

TWO_PI = 2.0 * math.pi

SCENARIO_NAMES = (
    "backaction_sweep",
    "squeeze_sweep",
    "tomography",
    "driven_response",
    "single_spectrum",
)


@dataclass(frozen=True)
class Scenario:
    """A named experiment with its sweep grid, noise model and output dir."""

    name: str
    params: dict
    noise: NoiseModel
    outputs: str | None = None
    note: str | None = None

    def __post_init__(self):
        if self.name not in SCENARIO_NAMES:
            raise ConfigError(f"unknown scenario name {self.name!r}")


def _require(mapping: dict, key: str, path: str):
    if key not in mapping:
        raise ConfigError(f"missing required field {path}.{key}")
    return mapping[key]


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path} must be a number, got {type(value).__name__}")
    return float(value)


def _integer(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path} must be an integer, got {type(value).__name__}")
    return value


def _check_keys(mapping: dict, allowed: set[str], path: str) -> None:
    if not isinstance(mapping, dict):
        raise ConfigError(f"{path} must be an object")
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"unknown field {path}.{sorted(unknown)[0]}")


def _number_list(value, path: str) -> list[float]:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{path} must be a non-empty list of numbers")
    return [_number(v, f"{path}[{i}]") for i, v in enumerate(value)]


def _parse_mechanics(section: dict) -> MechanicalMode:
    path = "system.mechanics"
    _check_keys(section, {"frequency_hz", "damping_hz", "thermal_occupancy"}, path)
    return MechanicalMode(
        omega=TWO_PI * _number(_require(section, "frequency_hz", path), f"{path}.frequency_hz"),
        gamma=TWO_PI * _number(_require(section, "damping_hz", path), f"{path}.damping_hz"),
        n_thermal=_number(_require(section, "thermal_occupancy", path), f"{path}.thermal_occupancy"),
    )


def _parse_cavity(section: dict, index: int) -> Cavity:
    path = f"system.cavities[{index}]"
    _check_keys(
        section,
        {"frequency_hz", "linewidth_hz", "external_coupling_hz", "vacuum_coupling_hz", "thermal_occupancy"},
        path,
    )
    return Cavity(
        omega=TWO_PI * _number(_require(section, "frequency_hz", path), f"{path}.frequency_hz"),
        kappa=TWO_PI * _number(_require(section, "linewidth_hz", path), f"{path}.linewidth_hz"),
        kappa_ext=TWO_PI
        * _number(_require(section, "external_coupling_hz", path), f"{path}.external_coupling_hz"),
        g0=TWO_PI * _number(_require(section, "vacuum_coupling_hz", path), f"{path}.vacuum_coupling_hz"),
        n_thermal=_number(_require(section, "thermal_occupancy", path), f"{path}.thermal_occupancy"),
    )


def _parse_drive(section: dict, index: int) -> Drive:
    path = f"drives[{index}]"
    _check_keys(section, {"cavity", "sideband", "rate_hz", "detuning_hz", "phase_rad"}, path)
    cavity = _integer(_require(section, "cavity", path), f"{path}.cavity")
    sideband = _require(section, "sideband", path)
    if sideband not in ("lower", "upper"):
        raise ConfigError(f"{path}.sideband must be 'lower' or 'upper'")
    return Drive(
        cavity_index=cavity,
        sideband=sideband,
        rate=TWO_PI * _number(_require(section, "rate_hz", path), f"{path}.rate_hz"),
        detuning=TWO_PI * _number(section.get("detuning_hz", 0.0), f"{path}.detuning_hz"),
        phase=_number(section.get("phase_rad", 0.0), f"{path}.phase_rad"),
    )


def _parse_noise(section: dict, path: str) -> NoiseModel:
    _check_keys(section, {"floor", "averages", "seed"}, path)
    return NoiseModel(
        floor=_number(_require(section, "floor", path), f"{path}.floor"),
        averages=_integer(_require(section, "averages", path), f"{path}.averages"),
        seed=_integer(_require(section, "seed", path), f"{path}.seed"),
    )


_PARAM_KEYS = {
    "backaction_sweep": {"ratios", "pair_detuning_hz", "points"},
    "squeeze_sweep": {"ratios", "measurement_ratio", "points"},
    "tomography": {"n_phases", "measurement_ratio", "points"},
    "driven_response": {"cavity", "points", "span_hz"},
    "single_spectrum": {"cavity", "points", "span_hz"},
}


def _parse_scenario(section: dict) -> Scenario:
    path = "scenario"
    _check_keys(section, {"name", "noise", "params", "output_dir", "note"}, path)
    name = _require(section, "name", path)
    if name not in SCENARIO_NAMES:
        raise ConfigError(f"{path}.name must be one of {SCENARIO_NAMES}, got {name!r}")
    noise = _parse_noise(_require(section, "noise", path), f"{path}.noise")
    raw = _require(section, "params", path)
    _check_keys(raw, _PARAM_KEYS[name], f"{path}.params")
    params: dict = {}
    ppath = f"{path}.params"
    if name == "backaction_sweep":
        params["ratios"] = _number_list(_require(raw, "ratios", ppath), f"{ppath}.ratios")
        params["pair_detuning"] = TWO_PI * _number(
            _require(raw, "pair_detuning_hz", ppath), f"{ppath}.pair_detuning_hz"
        )
        params["points"] = _integer(raw.get("points", 2001), f"{ppath}.points")
    elif name == "squeeze_sweep":
        params["ratios"] = _number_list(_require(raw, "ratios", ppath), f"{ppath}.ratios")
        params["measurement_ratio"] = _number(
            _require(raw, "measurement_ratio", ppath), f"{ppath}.measurement_ratio"
        )
        params["points"] = _integer(raw.get("points", 2001), f"{ppath}.points")
    elif name == "tomography":
        params["n_phases"] = _integer(_require(raw, "n_phases", ppath), f"{ppath}.n_phases")
        if params["n_phases"] < 5:
            raise ConfigError(f"{ppath}.n_phases must be at least 5")
        params["measurement_ratio"] = _number(
            _require(raw, "measurement_ratio", ppath), f"{ppath}.measurement_ratio"
        )
        params["points"] = _integer(raw.get("points", 2001), f"{ppath}.points")
    else:  # driven_response, single_spectrum
        params["cavity"] = _integer(_require(raw, "cavity", ppath), f"{ppath}.cavity")
        if params["cavity"] not in (1, 2):
            raise ConfigError(f"{ppath}.cavity must be 1 or 2")
        params["points"] = _integer(raw.get("points", 2001), f"{ppath}.points")
        if "span_hz" in raw:
            params["span"] = TWO_PI * _number(raw["span_hz"], f"{ppath}.span_hz")
    outputs = section.get("output_dir")
    if outputs is not None and not isinstance(outputs, str):
        raise ConfigError(f"{path}.output_dir must be a string path")
    note = section.get("note")
    if note is not None and not isinstance(note, str):
        raise ConfigError(f"{path}.note must be a string")
    return Scenario(name=name, params=params, noise=noise, outputs=outputs, note=note)


def load_config(path) -> tuple[SystemConfig, DriveSet, Scenario]:
    """Parse and validate a configuration file.

    Raises
    ------
    ConfigError
        On JSON syntax errors (with line and column), missing or unknown
        fields (with the field path), or physically invalid values.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"configuration file {path} does not exist")
    try:
        document = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    return parse_config(document)


def parse_config(document: dict) -> tuple[SystemConfig, DriveSet, Scenario]:
    """Validate an already-parsed configuration document."""
    from .errors import DomainError

    _check_keys(document, {"system", "drives", "scenario"}, "config")
    system = _require(document, "system", "config")
    _check_keys(system, {"mechanics", "cavities"}, "system")
    mech = _parse_mechanics(_require(system, "mechanics", "system"))
    cavities_raw = _require(system, "cavities", "system")
    if not isinstance(cavities_raw, list) or len(cavities_raw) != 2:
        raise ConfigError("system.cavities must list exactly two cavities")
    try:
        cavities = tuple(_parse_cavity(c, i) for i, c in enumerate(cavities_raw))
        cfg = SystemConfig(mech=mech, cavities=cavities)
        drives_raw = document.get("drives", [])
        if not isinstance(drives_raw, list):
            raise ConfigError("drives must be a list")
        ds = DriveSet(tuple(_parse_drive(d, i) for i, d in enumerate(drives_raw)))
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    scenario = _parse_scenario(_require(document, "scenario", "config"))
    return cfg, ds, scenario


def config_digest(path) -> str:
    """Stable digest of the configuration file bytes."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def bundled_config_path(name: str) -> Path:
    """Path of a configuration file shipped with the package."""
    ref = resources.files("twotone") / "configs" / name
    with resources.as_file(ref) as concrete:
        return Path(concrete)
