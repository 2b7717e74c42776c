"""Run configuration: YAML or JSON files flattened to dotted keys over defaults."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Mapping

import yaml

from .errors import ConfigError

DEFAULTS: dict[str, Any] = {
    "metric": "minkowski",
    "n": 4,
    "field.name": "uniform_B",
    "field.params.E0": 1.0,
    "field.params.B0": 1.0,
    "field.params.gradient": 1.0,
    "field.params.axis": None,
    "field.params.E_axis": None,
    "dist.kind": "gaussian_bump",
    "dist.center_rapidity": math.acosh(10.0),
    "dist.gamma": None,
    "dist.sigma": 0.00625,
    "dist.alpha": None,
    "dist.r_cut": None,
    "dist.N": 256,
    "dist.seed": None,
    "dist.x0": None,
    "run.T": 20.0,
    "run.tol": 1e-10,
    "run.output_dir": "out",
    "run.seed": 0,
    "run.mode": "vlasov",
    "run.n_out": 101,
    "run.connection": "lorentz",
    "bounds.C": 2.0,
    "bounds.C2": 1.0,
    "bounds.C3": 1.0,
    "bounds.B2": 1.0,
    "bounds.K": 1.0,
    "bounds.K2": 1.0,
    "bounds.D2": 1.0,
    "hypotheses.E_min": 5.0,
    "hypotheses.alpha_max": 0.2,
    "hypotheses.theta_max": 0.1,
    "hypotheses.adiabatic_max": 0.05,
    "scaling.alphas": [0.02, 0.04, 0.08, 0.16],
    "scaling.energies": [5.0, 10.0, 20.0, 40.0],
    "scaling.alpha_fixed": 0.08,
    "scaling.energy_fixed": 10.0,
    "scaling.t_early": 5.0,
    "scaling.workers": 1,
}

_FREE_PREFIXES = ("field.params.",)


def flatten(tree: Mapping, prefix: str = "") -> dict[str, Any]:
    out: dict[str, Any] = {}
    for key, value in tree.items():
        name = f"{prefix}{key}"
        if isinstance(value, Mapping):
            out.update(flatten(value, name + "."))
        else:
            out[name] = value
    return out


def make_config(overrides: Mapping | None = None) -> dict[str, Any]:
    """Defaults updated with ``overrides`` (nested or dotted); unknown keys are rejected."""
    cfg = dict(DEFAULTS)
    for key, value in flatten(overrides or {}).items():
        if key not in DEFAULTS and not key.startswith(_FREE_PREFIXES):
            raise ConfigError(f"unknown config key {key!r}")
        cfg[key] = value
    if cfg["run.mode"] not in ("vlasov", "frozen"):
        raise ConfigError(f"run.mode must be 'vlasov' or 'frozen', got {cfg['run.mode']!r}")
    if int(cfg["n"]) < 2:
        raise ConfigError("n must be >= 2")
    return cfg


def load_config(path, overrides: Mapping | None = None) -> dict[str, Any]:
    text = Path(path).read_text()
    try:
        data = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, Mapping):
        raise ConfigError("config file must hold a mapping")
    merged = flatten(data)
    merged.update(flatten(overrides or {}))
    return make_config(merged)


def parse_assignment(text: str) -> tuple[str, Any]:
    """Parse ``key=value`` with the value read as YAML (numbers, lists, strings)."""
    if "=" not in text:
        raise ConfigError(f"expected key=value, got {text!r}")
    key, raw = text.split("=", 1)
    return key.strip(), yaml.safe_load(raw)


def field_params(cfg: Mapping) -> dict[str, Any]:
    prefix = "field.params."
    return {k[len(prefix):]: v for k, v in cfg.items() if k.startswith(prefix) and v is not None}
