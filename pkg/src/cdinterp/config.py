"""Experiment configuration: YAML schema, defaults and validation."""
from __future__ import annotations

import copy

import yaml

from .registration import METHODS, ElasticityConfig, RegistrationConfig
from .sensors import SENSOR_KINDS, SensorConfig
from .synthetic import KINDS, MOTIONS

EXPERIMENTS = ("motivating", "synthetic_sweep", "two_field_study", "data_augmentation")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


DEFAULTS = {
    "experiment": None,
    "seed": 0,
    "output": "cdinterp-output",
    "motivating": {"sigma": [1e-1, 1e-3], "n_train": 15, "n_test": 50,
                   "pod_sizes": [5, 10, 15]},
    "augmentation": {"sigma": [1e-1, 1e-3], "n_train": 15, "n_test": 50, "n_aug": None,
                     "sizes": None},
    "synthetic": {"family": "moving_front_2d", "motion": "linear", "resolution": None,
                  "n_train": 5, "n_test": 8, "frame_checks": 10},
    "two_field": {"family": "moving_front_2d", "motion": "quadratic", "mu0": None, "mu1": None,
                  "mus": [0.3, 0.5, 0.7], "s_resolution": 11, "optimal_s_resolution": 21},
    "cdi": {"kappa": 4, "p": 1.0, "norm": "L2"},
    "registration": {"method": "elasticity", "epsilon": 1e-8, "delta": 50.0, "eta": 1e-2,
                     "dt": 5e-3, "resolution": None, "basis_size": 4,
                     "penalty_weight": 1e-6},
    "regression": {"mode": "auto", "r2_threshold": 0.5, "guard_factor": 2.0},
    "sensor": {"kind": None, "gamma_thr": 0.996, "epsilon_ducros": 0.01},
}


def _merge(base, override, path=""):
    out = copy.deepcopy(base)
    for key, val in (override or {}).items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key '{where}'")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"config key '{where}' must be a mapping")
            out[key] = _merge(base[key], val, where + ".")
        else:
            out[key] = val
    return out


def load_config(path=None, overrides=None):
    """Defaults updated with the YAML file at ``path`` and then ``overrides``."""
    data = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                data = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file {path} is not valid YAML: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("the config file must contain a mapping at top level")
    cfg = _merge(DEFAULTS, data)
    return _merge(cfg, overrides or {})


def _as_list(x):
    return list(x) if isinstance(x, (list, tuple)) else [x]


def validate(cfg):
    """List of findings (empty when the configuration is usable)."""
    findings = []
    exp = cfg.get("experiment")
    if exp not in EXPERIMENTS:
        findings.append(f"experiment: unknown experiment {exp!r}; expected one of {EXPERIMENTS}")
    try:
        int(cfg["seed"])
    except (TypeError, ValueError):
        findings.append("seed: must be an integer")

    for block in ("motivating", "augmentation"):
        b = cfg[block]
        for s in _as_list(b["sigma"]):
            if not isinstance(s, (int, float)) or s <= 0:
                findings.append(f"{block}.sigma: values must be positive numbers")
        if not isinstance(b["n_train"], int) or b["n_train"] < 2:
            findings.append(f"{block}.n_train: must be an integer >= 2")
        if not isinstance(b["n_test"], int) or b["n_test"] < 1:
            findings.append(f"{block}.n_test: must be a positive integer")
    for n in cfg["motivating"]["pod_sizes"]:
        if not isinstance(n, int) or not 1 <= n <= cfg["motivating"]["n_train"]:
            findings.append("motivating.pod_sizes: sizes must lie in [1, n_train]")

    syn = cfg["synthetic"]
    for block in ("synthetic", "two_field"):
        if cfg[block]["family"] not in KINDS:
            findings.append(f"{block}.family: unknown family {cfg[block]['family']!r}")
        if cfg[block]["motion"] not in MOTIONS:
            findings.append(f"{block}.motion: unknown motion {cfg[block]['motion']!r}")
    if not isinstance(syn["n_train"], int) or syn["n_train"] < 2:
        findings.append("synthetic.n_train: must be an integer >= 2")

    c = cfg["cdi"]
    if not isinstance(c["kappa"], int) or c["kappa"] < 1:
        findings.append("cdi.kappa: must be a positive integer")
    elif exp == "synthetic_sweep" and isinstance(syn["n_train"], int) and c["kappa"] > syn["n_train"]:
        findings.append(f"cdi.kappa: kappa={c['kappa']} exceeds n_train={syn['n_train']}")
    if not isinstance(c["p"], (int, float)) or c["p"] < 1:
        findings.append("cdi.p: the IDW power must be >= 1")
    if c["norm"] not in ("L2", "H1"):
        findings.append("cdi.norm: must be L2 or H1")

    r = cfg["registration"]
    if r["method"] not in METHODS:
        findings.append(f"registration.method: unknown method {r['method']!r}")
    for key in ("epsilon", "delta", "eta", "dt", "penalty_weight"):
        if not isinstance(r[key], (int, float)) or r[key] < 0 or (key != "penalty_weight" and r[key] == 0):
            findings.append(f"registration.{key}: must be a positive number")
    if cfg["sensor"]["kind"] is not None and cfg["sensor"]["kind"] not in SENSOR_KINDS:
        findings.append(f"sensor.kind: unknown sensor {cfg['sensor']['kind']!r}")
    g = cfg["sensor"]["gamma_thr"]
    if not isinstance(g, (int, float)) or not 0 < g < 1:
        findings.append("sensor.gamma_thr: must lie in (0, 1)")
    tf = cfg["two_field"]
    if not isinstance(tf["s_resolution"], int) or tf["s_resolution"] < 2:
        findings.append("two_field.s_resolution: must be an integer >= 2")
    if not isinstance(tf["optimal_s_resolution"], int) or tf["optimal_s_resolution"] < 2:
        findings.append("two_field.optimal_s_resolution: must be an integer >= 2")
    return findings


def registration_config(cfg):
    r = cfg["registration"]
    res = r["resolution"]
    el = ElasticityConfig(r["epsilon"], r["delta"], r["eta"], r["dt"],
                          tuple(res) if isinstance(res, list) else res)
    return RegistrationConfig(r["method"], el, int(r["basis_size"]), float(r["penalty_weight"]))


def sensor_config(cfg, default_kind):
    s = cfg["sensor"]
    return SensorConfig(s["kind"] or default_kind, s["gamma_thr"], s["epsilon_ducros"])
