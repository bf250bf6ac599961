"""
Scenario files: INI sections with unit-suffixed ``key_unit = value`` lines.

Example::

    [source]
    signal_rate_hz = 32700

    [converter]
    efficiency_fraction = 0.09

    [noise]
    rate_hz = 154

    [fiber]
    length_km = 0
    attenuation_db_per_km = 0.16

    [detector]
    efficiency_fraction = 0.9
    dark_rate_hz = 54

Parsing is fail-closed: unknown sections or keys, duplicate keys and
missing required keys are all errors.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import (
    ConverterParams,
    DetectorModel,
    DomainError,
    FiberLink,
    FilterStage,
    NoiseModel,
    SourceModel,
)
from .montecarlo import GateConfig

LINK_SECTIONS = ("source", "converter", "noise", "fiber", "detector")

_KEYS = {
    "source": {"signal_rate_hz", "rep_rate_hz", "pulse_width_s"},
    "converter": {"efficiency_fraction", "waveguide_length_m", "alpha_qfc_per_w_m2",
                  "eta_max_fraction", "pump_w"},
    "noise": {"rate_hz", "slope_hz_per_w"},
    "fiber": {"length_km", "attenuation_db_per_km"},
    "detector": {"efficiency_fraction", "dark_rate_hz"},
    "gating": {"rep_period_ns", "signal_offset_ns", "signal_width_ns", "noise_offset_ns",
               "noise_width_ns", "bin_ns", "duration_s"},
    "coincidence": {"window_s", "sign"},
    "sweep": {"axis", "values", "start", "stop", "num_points"},
    "fit": {"efficiency_data", "noise_data", "waveguide_length_m"},
    "random": {"seed"},
}
_FILTER_KEYS = {"center_wavelength_nm", "bandwidth_hz", "bandwidth_nm", "insertion_loss_db",
                "isolation_db", "target_band"}
_CONVERTER_PARAM_KEYS = {"waveguide_length_m", "alpha_qfc_per_w_m2", "eta_max_fraction"}
SWEEP_AXES = ("pump_w", "length_km")


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Sweep:
    axis: str
    grid: np.ndarray


@dataclass(frozen=True)
class FitInputs:
    efficiency_data: Path | None = None
    noise_data: Path | None = None
    waveguide_length_m: float | None = None


@dataclass(frozen=True)
class Scenario:
    source: SourceModel | None = None
    converter: float | ConverterParams | None = None
    pump_w: float | None = None
    noise: NoiseModel | None = None
    fiber: FiberLink | None = None
    detector: DetectorModel | None = None
    filters: tuple[FilterStage, ...] = ()
    gating: GateConfig | None = None
    duration_s: float = 60.0
    window_s: float = 1.0
    sign: str = "+"
    sweep: Sweep | None = None
    fit: FitInputs = field(default_factory=FitInputs)
    seed: int = 0

    @property
    def has_link(self) -> bool:
        return self.source is not None


def _num(section: str, key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ScenarioError(f"[{section}] {key}: not a number: {raw!r}") from None


def _int(section: str, key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ScenarioError(f"[{section}] {key}: not an integer: {raw!r}") from None


def _floats(sec, names):
    return {k: _num(sec.name, k, v) for k, v in sec.items() if k in names}


def _require(sec, *keys):
    missing = [k for k in keys if k not in sec]
    if missing:
        raise ScenarioError(f"[{sec.name}] missing required key(s): {', '.join(missing)}")


def parse_scenario(text: str, base_dir: Path | str | None = None) -> Scenario:
    """Parse scenario text. Relative data paths resolve against ``base_dir``."""
    cp = configparser.ConfigParser(strict=True, interpolation=None, default_section="\x00",
                                   inline_comment_prefixes=(";",))
    cp.optionxform = str  # keys are case-sensitive
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ScenarioError(str(exc).splitlines()[0]) from None
    base = Path(base_dir) if base_dir is not None else Path.cwd()

    filters = []
    for name in cp.sections():
        sec = cp[name]
        if name.startswith("filter "):
            allowed = _FILTER_KEYS
        elif name in _KEYS:
            allowed = _KEYS[name]
        else:
            raise ScenarioError(f"unknown section [{name}]")
        unknown = sorted(set(sec) - allowed)
        if unknown:
            raise ScenarioError(f"[{name}] unknown key(s): {', '.join(unknown)}")

    try:
        present = [s for s in LINK_SECTIONS if cp.has_section(s)]
        if present and len(present) != len(LINK_SECTIONS):
            missing = [s for s in LINK_SECTIONS if s not in present]
            raise ScenarioError(f"missing required section(s): {', '.join('[' + s + ']' for s in missing)}")
        if not present and not cp.has_section("fit"):
            raise ScenarioError("scenario needs the link sections "
                                + ", ".join(f"[{s}]" for s in LINK_SECTIONS) + " or a [fit] section")

        kw = {}
        if present:
            sec = cp["source"]
            _require(sec, "signal_rate_hz")
            kw["source"] = SourceModel(**_floats(sec, _KEYS["source"]))

            sec = cp["converter"]
            has_fixed = "efficiency_fraction" in sec
            params = _CONVERTER_PARAM_KEYS & set(sec)
            if has_fixed == bool(params):
                raise ScenarioError("[converter] give exactly one of efficiency_fraction or "
                                    "(waveguide_length_m, alpha_qfc_per_w_m2, eta_max_fraction)")
            if has_fixed:
                eta = _num("converter", "efficiency_fraction", sec["efficiency_fraction"])
                if not 0 <= eta <= 1:
                    raise ScenarioError("[converter] efficiency_fraction must lie in [0, 1]")
                kw["converter"] = eta
            else:
                _require(sec, *sorted(_CONVERTER_PARAM_KEYS))
                kw["converter"] = ConverterParams(
                    waveguide_length=_num("converter", "waveguide_length_m", sec["waveguide_length_m"]),
                    alpha_qfc=_num("converter", "alpha_qfc_per_w_m2", sec["alpha_qfc_per_w_m2"]),
                    eta_max=_num("converter", "eta_max_fraction", sec["eta_max_fraction"]),
                )
            if "pump_w" in sec:
                kw["pump_w"] = _num("converter", "pump_w", sec["pump_w"])
                if kw["pump_w"] < 0:
                    raise ScenarioError("[converter] pump_w must be >= 0")

            sec = cp["noise"]
            if ("rate_hz" in sec) == ("slope_hz_per_w" in sec):
                raise ScenarioError("[noise] give exactly one of rate_hz or slope_hz_per_w")
            if "rate_hz" in sec:
                kw["noise"] = NoiseModel.fixed(_num("noise", "rate_hz", sec["rate_hz"]))
            else:
                kw["noise"] = NoiseModel.linear(_num("noise", "slope_hz_per_w", sec["slope_hz_per_w"]))

            sec = cp["fiber"]
            _require(sec, "length_km")
            kw["fiber"] = FiberLink(**_floats(sec, _KEYS["fiber"]))

            sec = cp["detector"]
            _require(sec, "efficiency_fraction", "dark_rate_hz")
            kw["detector"] = DetectorModel(
                efficiency=_num("detector", "efficiency_fraction", sec["efficiency_fraction"]),
                dark_rate_hz=_num("detector", "dark_rate_hz", sec["dark_rate_hz"]),
            )

        for name in cp.sections():
            if not name.startswith("filter "):
                continue
            sec = cp[name]
            _require(sec, "insertion_loss_db", "isolation_db", "target_band")
            if ("bandwidth_hz" in sec) == ("bandwidth_nm" in sec):
                raise ScenarioError(f"[{name}] give exactly one of bandwidth_hz or bandwidth_nm")
            unit = "hz" if "bandwidth_hz" in sec else "nm"
            band = sec["target_band"].strip()
            if band not in ("pump", "spdc_noise"):
                raise ScenarioError(f"[{name}] target_band must be 'pump' or 'spdc_noise'")
            filters.append(FilterStage(
                name=name[len("filter "):].strip(),
                center_wavelength_nm=_num(name, "center_wavelength_nm", sec.get("center_wavelength_nm", "nan")),
                bandwidth=_num(name, f"bandwidth_{unit}", sec[f"bandwidth_{unit}"]),
                bandwidth_unit=unit,
                insertion_loss_db=_num(name, "insertion_loss_db", sec["insertion_loss_db"]),
                isolation_db=_num(name, "isolation_db", sec["isolation_db"]),
                target_band=band,
            ))
        kw["filters"] = tuple(filters)

        if cp.has_section("gating"):
            sec = cp["gating"]
            ints = {k: _int("gating", k, v) for k, v in sec.items() if k != "duration_s"}
            if "duration_s" in sec:
                kw["duration_s"] = _num("gating", "duration_s", sec["duration_s"])
                if not kw["duration_s"] > 0:
                    raise ScenarioError("[gating] duration_s must be > 0")
        else:
            ints = {}
        if "source" in kw:
            base_gate = GateConfig.for_source(kw["source"])
            defaults = {k: getattr(base_gate, k) for k in GateConfig.__dataclass_fields__}
        else:
            defaults = {}
        defaults.update(ints)
        kw["gating"] = GateConfig(**defaults)

        if cp.has_section("coincidence"):
            sec = cp["coincidence"]
            if "window_s" in sec:
                kw["window_s"] = _num("coincidence", "window_s", sec["window_s"])
                if not kw["window_s"] > 0:
                    raise ScenarioError("[coincidence] window_s must be > 0")
            if "sign" in sec:
                kw["sign"] = sec["sign"].strip()
                if kw["sign"] not in ("+", "-"):
                    raise ScenarioError("[coincidence] sign must be '+' or '-'")

        if cp.has_section("sweep"):
            kw["sweep"] = _parse_sweep(cp["sweep"])

        if cp.has_section("fit"):
            sec = cp["fit"]
            kw["fit"] = FitInputs(
                efficiency_data=base / sec["efficiency_data"] if "efficiency_data" in sec else None,
                noise_data=base / sec["noise_data"] if "noise_data" in sec else None,
                waveguide_length_m=(_num("fit", "waveguide_length_m", sec["waveguide_length_m"])
                                    if "waveguide_length_m" in sec else None),
            )

        if cp.has_section("random"):
            _require(cp["random"], "seed")
            kw["seed"] = _int("random", "seed", cp["random"]["seed"])
    except DomainError as exc:
        raise ScenarioError(str(exc)) from None
    return Scenario(**kw)


def _parse_sweep(sec) -> Sweep:
    _require(sec, "axis")
    axis = sec["axis"].strip()
    if axis not in SWEEP_AXES:
        raise ScenarioError(f"[sweep] axis must be one of {', '.join(SWEEP_AXES)}, got {axis!r}")
    has_values = "values" in sec
    has_range = {"start", "stop", "num_points"} & set(sec)
    if has_values == bool(has_range):
        raise ScenarioError("[sweep] give either values or start/stop/num_points")
    if has_values:
        grid = np.array([_num("sweep", "values", v) for v in sec["values"].split(",") if v.strip()])
    else:
        _require(sec, "start", "stop", "num_points")
        n = _int("sweep", "num_points", sec["num_points"])
        if n < 1:
            raise ScenarioError("[sweep] num_points must be >= 1")
        grid = np.linspace(_num("sweep", "start", sec["start"]), _num("sweep", "stop", sec["stop"]), n)
    if grid.size == 0:
        raise ScenarioError("[sweep] empty grid")
    if np.any(grid < 0):
        raise ScenarioError(f"[sweep] {axis} values must be >= 0")
    return Sweep(axis, grid)


def load_scenario(path) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(), base_dir=path.parent)
