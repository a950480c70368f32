"""Scenario configuration: built-in presets, YAML files and ``key=value`` overrides."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from .controller import ControllerGains
from .model import CascadeParams, DelayLaw, ModelError, SaturationParams
from .signals import ReferenceTrajectory
from .sim import Scenario, SimConfig


class ConfigError(ValueError):
    pass


# Parameters for a trauma plasma sample, delay fit and gains used in the
# coagulation case studies.  Compiled in so the numbers cannot drift.
_BASE = {
    "name": "case1_1",
    "plant": {"n": 3, "d": [1.1311, 1.1362, 0.2727]},
    "saturation": {"beta": 50.0, "k_s": 0.0224, "eta": 75.0},
    "delay": {"gamma": 4.48, "k_d": 0.322, "phi1": 1e-3, "phi2": 4.0},
    "estimate": {"gamma_hat": 1.0, "k_d_hat": 1.0, "tau_tilde_bar": None},
    "gains": {"k": 0.15, "lambda": 0.1, "alpha": 5.0},
    "reference": {"kind": "tanh_squared", "amplitude": 200.0, "rate": 0.15, "offset": 0.0},
    "initial": {"x0": [500.0, 50.0, 5.0]},
    "sim": {"dt": 0.01, "t_end": 100.0, "enable_saturation": True, "enable_delay": True,
            "enable_control": True, "record_stride": 10, "monitor_enabled": True,
            "lk_weights": [1.0, 1.0, 1.0], "psi": 1e7, "settle_band": 20.0},
    "analysis": {"eps1": 1.0, "eps2": 1.0, "omega1": 1.0, "omega2": 0.1, "omega3": 1.0,
                 "c1": None, "m": None},
}


def _set_path(raw: dict, path: str, value: Any):
    keys = path.split(".")
    node = raw
    for key in keys[:-1]:
        if not isinstance(node.get(key), dict):
            raise ConfigError(f"{path}: no such section {key!r}")
        node = node[key]
    if keys[-1] not in node:
        raise ConfigError(f"{path}: unknown key")
    node[keys[-1]] = value


def _preset(name: str, **overrides) -> dict:
    raw = copy.deepcopy(_BASE)
    raw["name"] = name
    for path, value in overrides.items():
        _set_path(raw, path.replace("__", "."), value)
    return raw


PRESETS = {
    "case1_1": _preset("case1_1"),
    "case1_2": _preset("case1_2", sim__enable_saturation=False, sim__enable_delay=False),
    "case1_3": _preset("case1_3", estimate__gamma_hat=0.1),
    "case1_4": _preset("case1_4", delay__gamma=0.0448),
    "case2": _preset("case2", reference={"kind": "sinusoid", "amplitude": 100.0,
                                         "rate": 0.15, "offset": 300.0},
                     sim__t_end=200.0),
}

PRESET_NOTES = {
    "case1_1": "elevated start, tanh^2 reference, delay and saturation on",
    "case1_2": "case1_1 without input saturation and input delay",
    "case1_3": "case1_1 with a tenfold smaller delay estimate (gamma_hat=0.1)",
    "case1_4": "case1_1 with a hundredfold smaller delay (gamma=0.0448)",
    "case2": "sinusoidal reference 100 sin(0.15 t) + 300 over 200 time units",
}

UNITS = {
    "plant.n": "cascade order",
    "plant.d": "decay rates [1/time]",
    "saturation.beta": "ceiling [input units]",
    "saturation.k_s": "growth rate [1/input units]",
    "saturation.eta": "midpoint shift [input units]",
    "delay.gamma": "power-law coefficient [time * state^k_d]",
    "delay.k_d": "power-law exponent [-]",
    "delay.phi1": "floor on x_n [state units]",
    "delay.phi2": "bound on |d tau/dt| [-]",
    "estimate.gamma_hat": "estimated coefficient [time * state^k_d_hat]",
    "estimate.k_d_hat": "estimated exponent [-]",
    "estimate.tau_tilde_bar": "bound on |tau - tau_hat| [time]; null = measured on the run",
    "gains.k": "[-]",
    "gains.lambda": "[1/time]",
    "gains.alpha": "[-]",
    "reference.kind": "tanh_squared | sinusoid",
    "reference.amplitude": "[state units]",
    "reference.rate": "[1/time]",
    "reference.offset": "[state units]",
    "initial.x0": "initial state [state units]",
    "sim.dt": "step [time]",
    "sim.t_end": "horizon [time]",
    "sim.record_stride": "CSV decimation [steps]",
    "sim.lk_weights": "omega1, omega2, omega3 for the monitor",
    "sim.psi": "tripwire on |z| [mixed]",
    "sim.settle_band": "settling band on |e1| [state units]",
    "analysis.c1": "null = estimated on the run",
    "analysis.m": "bound on |u''|; null = estimated on the run",
}

_SCHEMA = {
    "name": str,
    "plant": {"n": int, "d": list},
    "saturation": {"beta": float, "k_s": float, "eta": float},
    "delay": {"gamma": float, "k_d": float, "phi1": float, "phi2": float},
    "estimate": {"gamma_hat": float, "k_d_hat": float, "tau_tilde_bar": (float, type(None))},
    "gains": {"k": float, "lambda": float, "alpha": float},
    "reference": {"kind": str, "amplitude": float, "rate": float, "offset": float},
    "initial": {"x0": list},
    "sim": {"dt": float, "t_end": float, "enable_saturation": bool, "enable_delay": bool,
            "enable_control": bool, "record_stride": int, "monitor_enabled": bool,
            "lk_weights": list, "psi": float, "settle_band": float},
    "analysis": {"eps1": float, "eps2": float, "omega1": float, "omega2": float,
                 "omega3": float, "c1": (float, type(None)), "m": (float, type(None))},
}


@dataclass
class ScenarioConfig:
    name: str
    scenario: Scenario
    sim: SimConfig
    analysis: dict
    raw: dict = field(repr=False, compare=False, default_factory=dict)

    def digest(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _check_schema(raw: Any, schema: dict, path: str = ""):
    if not isinstance(raw, dict):
        raise ConfigError(f"{path or '<root>'}: expected a mapping")
    for key in raw:
        if key not in schema:
            raise ConfigError(f"{path}{key}: unknown key")
    for key, typ in schema.items():
        where = f"{path}{key}"
        if key not in raw:
            raise ConfigError(f"{where}: missing")
        val = raw[key]
        if isinstance(typ, dict):
            _check_schema(val, typ, where + ".")
            continue
        types = typ if isinstance(typ, tuple) else (typ,)
        if float in types and isinstance(val, int) and not isinstance(val, bool):
            raw[key] = val = float(val)
        if isinstance(val, bool) and bool not in types:
            raise ConfigError(f"{where}: expected {types[0].__name__}, got bool")
        if not isinstance(val, types):
            raise ConfigError(f"{where}: expected {types[0].__name__}, got {type(val).__name__}")


def _floats(seq, where: str) -> list:
    try:
        return [float(v) for v in seq]
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected a list of numbers") from None


def build(raw: dict) -> ScenarioConfig:
    """Validate a raw mapping and build the typed configuration."""
    raw = copy.deepcopy(raw)
    _check_schema(raw, _SCHEMA)

    def section(where, fn):
        try:
            return fn()
        except (ModelError, ValueError, TypeError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{where}: {exc}") from None

    p, s, dl, est = raw["plant"], raw["saturation"], raw["delay"], raw["estimate"]
    plant = section("plant", lambda: CascadeParams(n=p["n"], d=_floats(p["d"], "plant.d")))
    sat = section("saturation", lambda: SaturationParams(s["beta"], s["k_s"], s["eta"]))
    law = section("delay", lambda: DelayLaw(dl["gamma"], dl["k_d"], dl["phi1"], dl["phi2"]))
    section("delay.phi2", lambda: law.check_slew_bound(plant.d[-1]))
    for key in ("gamma_hat", "k_d_hat"):
        if not est[key] > 0:
            raise ConfigError(f"estimate.{key}: must be > 0")
    ttb = est["tau_tilde_bar"]
    if ttb is not None and ttb < 0:
        raise ConfigError("estimate.tau_tilde_bar: must be >= 0")
    gn = raw["gains"]
    gains = section("gains", lambda: ControllerGains(gn["k"], gn["lambda"], gn["alpha"]))
    rf = raw["reference"]
    if rf["kind"] == "custom":
        raise ConfigError("reference.kind: custom references are not loadable from files")
    ref = section("reference", lambda: ReferenceTrajectory(
        rf["kind"], rf["amplitude"], rf["rate"], rf["offset"], max_order=max(4, plant.n + 1)))
    x0 = _floats(raw["initial"]["x0"], "initial.x0")
    if len(x0) != plant.n:
        raise ConfigError(f"initial.x0: has {len(x0)} entries, expected plant.n={plant.n}")
    if any(v < 0 for v in x0):
        raise ConfigError("initial.x0: must be non-negative")
    if raw["sim"]["enable_delay"] and not x0[-1] > dl["phi1"]:
        raise ConfigError(f"initial.x0: x_n(0) = {x0[-1]} must exceed delay.phi1 = {dl['phi1']}")
    if not x0[-1] > 0:
        raise ConfigError("initial.x0: x_n(0) must be > 0 to form the delay estimate")
    sm = dict(raw["sim"])
    for key in ("dt", "t_end", "psi", "settle_band"):
        if not sm[key] > 0:
            raise ConfigError(f"sim.{key}: must be > 0, got {sm[key]}")
    if not sm["t_end"] > sm["dt"]:
        raise ConfigError(f"sim.t_end: must exceed sim.dt ({sm['t_end']} <= {sm['dt']})")
    if sm["record_stride"] < 1:
        raise ConfigError("sim.record_stride: must be >= 1")
    sm["lk_weights"] = tuple(_floats(sm["lk_weights"], "sim.lk_weights"))
    if len(sm["lk_weights"]) != 3:
        raise ConfigError("sim.lk_weights: expected three weights")
    sim = section("sim", lambda: SimConfig(**sm))
    an = raw["analysis"]
    for key in ("eps1", "eps2", "omega1", "omega2", "omega3"):
        if not an[key] > 0:
            raise ConfigError(f"analysis.{key}: must be > 0")
    for key in ("c1", "m"):
        if an[key] is not None and an[key] < 0:
            raise ConfigError(f"analysis.{key}: must be >= 0")

    scenario = Scenario(raw["name"], plant, sat, law, est["gamma_hat"], est["k_d_hat"],
                        gains, ref, tuple(x0), tau_tilde_bar=ttb or 0.0)
    analysis = dict(an, tau_tilde_bar=ttb, phi2=dl["phi2"])
    return ScenarioConfig(raw["name"], scenario, sim, analysis, raw)


def parse_value(text: str) -> Any:
    return yaml.safe_load(text)


def parse_config(source: str, overrides: Optional[list] = None) -> ScenarioConfig:
    """Load a preset by name or a YAML file, then apply ``key=value`` overrides."""
    if source in PRESETS:
        raw = copy.deepcopy(PRESETS[source])
    else:
        path = Path(source)
        if not path.exists():
            raise ConfigError(f"{source}: unknown preset and no such file "
                              f"(presets: {', '.join(PRESETS)})")
        try:
            raw = yaml.safe_load(path.read_text())
        except yaml.YAMLError as exc:
            raise ConfigError(f"{source}: not valid YAML ({exc})") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{source}: expected a mapping at top level")
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set {item!r}: expected key=value")
        key, text = item.split("=", 1)
        _set_path(raw, key.strip(), parse_value(text))
    return build(raw)


def _fmt(v: Any) -> str:
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    if isinstance(v, str):
        return json.dumps(v)
    return str(v)


def dump_config(cfg_or_raw) -> str:
    """YAML text with unit comments; ``parse_config`` reads it back unchanged."""
    raw = cfg_or_raw.raw if isinstance(cfg_or_raw, ScenarioConfig) else cfg_or_raw
    lines = [f"name: {_fmt(raw['name'])}"]
    for sec, body in raw.items():
        if sec == "name":
            continue
        lines.append(f"{sec}:")
        for key, val in body.items():
            note = UNITS.get(f"{sec}.{key}")
            line = f"  {key}: {_fmt(val)}"
            lines.append(f"{line:<44}# {note}" if note else line)
    return "\n".join(lines) + "\n"
