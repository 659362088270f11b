"""Scenario documents: JSON <-> ScenarioConfig, overrides, seeds and presets.

A scenario document is a JSON object whose layout mirrors ScenarioConfig.
Every key is optional; missing keys take the defaults of the severe
milliAmpere scenario. Angles may be given in radians under their plain name
(``gamma_wind``, ``psi``) or in degrees under the ``_deg`` suffix
(``gamma_wind_deg``, ``psi_deg``), never both. Matrices (``Q``, ``R``,
``H``) accept a scalar multiple of the identity or a 3x3 nested list.

Example::

    {
      "dt": 0.01, "duration": 200,
      "env": {"F_wind": 10000, "gamma_current_deg": 300, "noise_enabled": false},
      "noise": {"Q": 30000, "R": 1, "scaling": "force"},
      "gains": {"gamma": 50},
      "eta0": {"x": 0, "y": 0, "psi_deg": 30},
      "seeds": {"plant": 1, "measurement": 2, "disturbance": 3}
    }

:func:`config_to_dict` writes the normalized form (SI units, radians) that
:func:`config_from_dict` reads back to an identical ScenarioConfig.
"""
from __future__ import annotations

import copy
import json
import math
import os
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from .environment import EnvConfig
from .errors import ConfigError
from .estimator import UkfParams
from .observer import ObserverGains
from .sim import ScenarioConfig
from .vessel import MILLIAMPERE, VesselParams

SEED_ENV_VAR = "OBSERVER_SEED"

_TOP_KEYS = {
    "vessel", "env", "noise", "ukf", "gains", "dt", "duration", "eta0", "nu0", "tau",
    "seed", "seeds", "damping_form", "estimator", "measurement_decimation", "transient",
}
_ENV_ANGLES = ("gamma_wind", "gamma_wave", "gamma_current")
_ENV_SCALARS = (
    "F_wind", "F_wave", "F_current", "L_ship", "T_s",
    "wave_harmonic_ratio", "wave_harmonic_freq", "omega",
)
_SEED_NAMES = ("plant", "measurement", "disturbance")


def _take_angle(doc: dict, name: str, where: str, default: float) -> float:
    deg_key = name + "_deg"
    if name in doc and deg_key in doc:
        raise ConfigError(f"{where}: give either {name!r} or {deg_key!r}, not both")
    if deg_key in doc:
        return math.radians(_number(doc.pop(deg_key), f"{where}.{deg_key}"))
    if name in doc:
        return _number(doc.pop(name), f"{where}.{name}")
    return default


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number, got {value!r}")
    return float(value)


def _vector(value, where: str) -> tuple:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ConfigError(f"{where} must be a list of three numbers, got {value!r}")
    return tuple(_number(v, where) for v in value)


def _matrix(value, where: str) -> np.ndarray:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value) * np.eye(3)
    try:
        m = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where} must be a number or a 3x3 list") from exc
    if m.shape != (3, 3):
        raise ConfigError(f"{where} must be a number or a 3x3 list, got shape {m.shape}")
    return m


def _reject_unknown(doc: dict, where: str) -> None:
    if doc:
        raise ConfigError(f"unknown keys in {where}: {sorted(doc)}")


def _section(doc: dict, key: str) -> dict:
    value = doc.pop(key, {})
    if not isinstance(value, dict):
        raise ConfigError(f"{key} must be an object")
    return dict(value)


def _parse_vessel(value) -> VesselParams:
    if value is None or value == "milliampere":
        return MILLIAMPERE
    if not isinstance(value, dict):
        raise ConfigError("vessel must be 'milliampere' or an object of coefficients")
    merged = MILLIAMPERE.to_dict()
    unknown = set(value) - set(merged)
    if unknown:
        raise ConfigError(f"unknown vessel parameters: {sorted(unknown)}")
    for k, v in value.items():
        merged[k] = _number(v, f"vessel.{k}")
    return VesselParams.from_dict(merged)


def _parse_env(doc: dict) -> EnvConfig:
    base = EnvConfig()
    kw = {}
    for name in _ENV_ANGLES:
        kw[name] = _take_angle(doc, name, "env", getattr(base, name))
    for name in _ENV_SCALARS:
        if name in doc:
            kw[name] = _number(doc.pop(name), f"env.{name}")
    if "H" in doc:
        kw["H"] = _matrix(doc.pop("H"), "env.H")
    if "noise_enabled" in doc:
        flag = doc.pop("noise_enabled")
        if not isinstance(flag, bool):
            raise ConfigError("env.noise_enabled must be true or false")
        kw["noise_enabled"] = flag
    if "kind" in doc:
        kw["kind"] = str(doc.pop("kind"))
    if "amplitude" in doc:
        kw["amplitude"] = _vector(doc.pop("amplitude"), "env.amplitude")
    _reject_unknown(doc, "env")
    return EnvConfig(**kw)


def _parse_seeds(doc: dict) -> tuple:
    if "seed" in doc and "seeds" in doc:
        raise ConfigError("give either 'seed' or 'seeds', not both")
    if "seed" in doc:
        return derive_seeds(doc.pop("seed"))
    value = doc.pop("seeds", None)
    if value is None:
        return ScenarioConfig().seeds
    if isinstance(value, dict):
        extra = set(value) - set(_SEED_NAMES)
        if extra or len(value) != 3:
            raise ConfigError(f"seeds must have exactly the keys {_SEED_NAMES}")
        value = [value[n] for n in _SEED_NAMES]
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ConfigError("seeds must hold three integers")
    out = []
    for s in value:
        if isinstance(s, bool) or not isinstance(s, int) or s < 0:
            raise ConfigError(f"seeds must be non-negative integers, got {s!r}")
        out.append(s)
    return tuple(out)


def config_from_dict(document: dict) -> ScenarioConfig:
    """Build a ScenarioConfig from a scenario document (not validated)."""
    if not isinstance(document, dict):
        raise ConfigError("a scenario document must be a JSON object")
    doc = copy.deepcopy(document)
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    defaults = ScenarioConfig()
    kw = {"vessel": _parse_vessel(doc.pop("vessel", None))}
    kw["env"] = _parse_env(_section(doc, "env"))

    noise = _section(doc, "noise")
    if "Q" in noise:
        kw["Q"] = _matrix(noise.pop("Q"), "noise.Q")
    if "R" in noise:
        kw["R"] = _matrix(noise.pop("R"), "noise.R")
    if "scaling" in noise:
        kw["noise_scaling"] = str(noise.pop("scaling"))
    _reject_unknown(noise, "noise")

    u = _section(doc, "ukf")
    ukf_kw = {k: _number(u.pop(k), f"ukf.{k}") for k in ("alpha", "beta", "kappa") if k in u}
    kw["ukf"] = UkfParams(**ukf_kw)
    if "P_init" in u:
        kw["P_init"] = _number(u.pop("P_init"), "ukf.P_init")
    if "cov_update" in u:
        kw["cov_update"] = str(u.pop("cov_update"))
    if "filter_disturbance" in u:
        kw["filter_disturbance"] = str(u.pop("filter_disturbance"))
    _reject_unknown(u, "ukf")

    g = _section(doc, "gains")
    if "gamma" in g:
        if set(g) & {"g1", "g2", "g3"}:
            raise ConfigError("gains: give either 'gamma' or g1..g3, not both")
        kw["gains"] = ObserverGains.uniform(_number(g.pop("gamma"), "gains.gamma"))
    else:
        gains_kw = {k: _number(g.pop(k), f"gains.{k}") for k in ("g1", "g2", "g3") if k in g}
        kw["gains"] = ObserverGains(**gains_kw)
    _reject_unknown(g, "gains")

    for name in ("dt", "duration", "transient"):
        if name in doc:
            kw[name] = _number(doc.pop(name), name)

    eta0 = doc.pop("eta0", None)
    if eta0 is not None:
        if isinstance(eta0, dict):
            eta0 = dict(eta0)
            x = _number(eta0.pop("x", 0.0), "eta0.x")
            y = _number(eta0.pop("y", 0.0), "eta0.y")
            psi = _take_angle(eta0, "psi", "eta0", 0.0)
            _reject_unknown(eta0, "eta0")
            kw["eta0"] = (x, y, psi)
        else:
            kw["eta0"] = _vector(eta0, "eta0")
    for name in ("nu0", "tau"):
        if name in doc:
            kw[name] = _vector(doc.pop(name), name)

    kw["seeds"] = _parse_seeds(doc)
    for name in ("damping_form", "estimator"):
        if name in doc:
            kw[name] = str(doc.pop(name))
    if "measurement_decimation" in doc:
        value = doc.pop("measurement_decimation")
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError("measurement_decimation must be an integer")
        kw["measurement_decimation"] = value
    _reject_unknown(doc, "scenario")
    return replace(defaults, **kw)


def _matrix_out(m: np.ndarray):
    return [[float(x) for x in row] for row in m]


def config_to_dict(cfg: ScenarioConfig) -> dict:
    """Normalized scenario document: SI units, radians, explicit matrices."""
    env = cfg.env
    return {
        "vessel": cfg.vessel.to_dict(),
        "env": {
            **{name: getattr(env, name) for name in _ENV_ANGLES},
            **{name: getattr(env, name) for name in _ENV_SCALARS},
            "H": _matrix_out(env.H),
            "noise_enabled": env.noise_enabled,
            "kind": env.kind,
            "amplitude": list(env.amplitude),
        },
        "noise": {"Q": _matrix_out(cfg.Q), "R": _matrix_out(cfg.R), "scaling": cfg.noise_scaling},
        "ukf": {
            "alpha": cfg.ukf.alpha,
            "beta": cfg.ukf.beta,
            "kappa": cfg.ukf.kappa,
            "P_init": cfg.P_init,
            "cov_update": cfg.cov_update,
            "filter_disturbance": cfg.filter_disturbance,
        },
        "gains": {"g1": cfg.gains.g1, "g2": cfg.gains.g2, "g3": cfg.gains.g3},
        "dt": cfg.dt,
        "duration": cfg.duration,
        "transient": cfg.transient,
        "eta0": {"x": cfg.eta0[0], "y": cfg.eta0[1], "psi": cfg.eta0[2]},
        "nu0": list(cfg.nu0),
        "tau": list(cfg.tau),
        "seeds": dict(zip(_SEED_NAMES, cfg.seeds)),
        "damping_form": cfg.damping_form,
        "estimator": cfg.estimator,
        "measurement_decimation": cfg.measurement_decimation,
    }


def configs_equal(a: ScenarioConfig, b: ScenarioConfig) -> bool:
    """Field-wise equality, comparing array fields exactly."""
    for f in fields(ScenarioConfig):
        x, y = getattr(a, f.name), getattr(b, f.name)
        if isinstance(x, np.ndarray):
            if not np.array_equal(x, y):
                return False
        elif f.name == "env":
            if config_to_dict(a)["env"] != config_to_dict(b)["env"]:
                return False
        elif x != y:
            return False
    return True


def load_document(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def parse_value(text: str):
    """Override values are JSON literals; anything else is taken as a string."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(document: dict, assignment: str) -> dict:
    """Return a copy of ``document`` with ``a.b.c=value`` applied."""
    key, sep, raw = assignment.partition("=")
    if not sep or not key:
        raise ConfigError(f"override must look like key=value, got {assignment!r}")
    parts = key.split(".")
    out = copy.deepcopy(document)
    node = out
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigError(f"override {key!r}: {part!r} is not an object")
        node = child
    leaf = parts[-1]
    # a degree override replaces a radian value of the same angle and vice versa
    if leaf.endswith("_deg"):
        node.pop(leaf[:-4], None)
    else:
        node.pop(leaf + "_deg", None)
    if leaf == "gamma" and parts[:-1] == ["gains"]:
        for name in ("g1", "g2", "g3"):
            node.pop(name, None)
    node[leaf] = parse_value(raw)
    return out


def derive_seeds(master) -> tuple:
    """Three independent stream seeds (plant, measurement, disturbance) from one integer."""
    if isinstance(master, bool) or not isinstance(master, int) or master < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {master!r}")
    state = np.random.SeedSequence(master).generate_state(3, dtype=np.uint32)
    return tuple(int(s) for s in state)


def seed_from_env(environ=None):
    """Master seed from the OBSERVER_SEED environment variable, or None."""
    environ = os.environ if environ is None else environ
    text = environ.get(SEED_ENV_VAR)
    if text is None or text.strip() == "":
        return None
    try:
        return int(text)
    except ValueError as exc:
        raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {text!r}") from exc


# Built-in scenario documents, angles in degrees as they are usually quoted.
_TABLE3 = {
    "dt": 0.01,
    "duration": 200,
    "env": {
        "F_wind": 10000,
        "F_wave": 8000,
        "F_current": 18000,
        "gamma_wind_deg": 135,
        "gamma_wave_deg": 155,
        "gamma_current_deg": 300,
        "L_ship": 5,
        "T_s": 15,
        "H": 1000,
        "noise_enabled": False,
    },
    "noise": {"Q": 30000, "R": 1, "scaling": "force"},
    "ukf": {"alpha": 1e-3, "beta": 2, "kappa": 0, "P_init": 0.1},
    "gains": {"gamma": 50},
    "eta0": {"x": 0, "y": 0, "psi_deg": 30},
    "nu0": [0, 0, 0],
    "tau": [0, 0, 0],
}


def _preset(**changes) -> dict:
    doc = copy.deepcopy(_TABLE3)
    for key, value in changes.items():
        if isinstance(value, dict) and isinstance(doc.get(key), dict):
            doc[key].update(value)
        else:
            doc[key] = value
    return doc


PRESETS = {
    "severe-table3": {
        "kind": "run",
        "document": _preset(),
        "about": "Table-2 vessel under the Table-3 wind, wave and current loads, 200 s",
    },
    "stochastic-fig5": {
        "kind": "run",
        "document": _preset(env={"noise_enabled": True}),
        "about": "severe scenario with Gaussian disturbance noise of covariance H superposed",
    },
    "q-sweep-fig6": {
        "kind": "q-sweep",
        "document": _preset(),
        "values": [1e3, 1e4, 3e4, 1e5],
        "about": "severe scenario repeated for Q = 1e3, 1e4, 3e4 and 1e5 times I",
    },
    "gamma-fig8": {
        "kind": "gamma",
        "document": _preset(
            duration=60,
            env={"kind": "decay", "amplitude": [10000, 10000, 10000]},
            noise={"Q": 0, "R": 0},
            estimator="none",
        ),
        "values": [0.01, 0.1, 1, 10, 30],
        "about": "equal decaying loads on all channels, gains 0.01 to 30",
    },
    "trajectory-fig1": {
        "kind": "trajectory",
        "document": _preset(),
        "about": "pose with the configured model noise Q against Q = 0",
    },
}


def preset_document(name: str) -> dict:
    try:
        return copy.deepcopy(PRESETS[name]["document"])
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def load_config(path) -> ScenarioConfig:
    return config_from_dict(load_document(Path(path)))
