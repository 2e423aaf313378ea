"""JSON run configuration.

A configuration file has up to four sections: ``physics``, ``geometry``,
``photon`` and ``sweep``. Frequencies are given in MHz and stored as 1/us
one-to-one; lengths are in um. Unknown keys are rejected.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError
from ..model import FORSTER_RESONANCES, SINGLE_QUBIT, TWO_QUBITS, CloudGeometry, PhysicsParams

GATES = ("atom_photon", "atom_atom")
PRESETS = ("F1", "F1_tuned", "F2", "F2_tuned", "fig3_right")

DEFAULTS = {
    "physics": {
        "forster": "F2",
        "kappa_mhz": 10.0,
        "gamma_e_mhz": 3.0,
        "gamma_r_mhz": 0.01,
        "gamma_p_mhz": 0.01,
        "omega_mhz": 1.0,
        "delta_mhz": None,
        "c3_mhz_um3": None,
        "angular_model": None,
        "g0_mhz": 1.0,
        "lambda_um": 0.788,
    },
    "geometry": {
        "r_c_um": 5.0,
        "r_y_um": 20.0,
        "r_g_um": 15.0,
        "n_atoms": 1000,
        "qubit_positions_um": None,
        "min_separation_um": 1.0,
        "seed": 0,
    },
    "photon": {
        "bandwidth_mhz": 0.01,
        "nodes": 64,
        "grid_points": 257,
        "grid_half_width_mhz": None,
    },
    "sweep": {
        "gate": "atom_photon",
        "omega_min_mhz": 0.1,
        "omega_max_mhz": 10.0,
        "omega_points": 9,
        "omega_values_mhz": None,
        "nc_min": 10.0,
        "nc_max": 1000.0,
        "nc_points": 5,
        "nc_values": None,
        "nc_mode": "vary_n",
        "realizations": 8,
        "max_atoms": 10000,
    },
}

_PRESET_CHANGES = {
    "F1": {"physics": {"forster": "F1"}},
    "F1_tuned": {"physics": {"forster": "F1_tuned"}},
    "F2": {"physics": {"forster": "F2"}},
    "F2_tuned": {"physics": {"forster": "F2_tuned"}},
    # broadband photons and a faster cavity, with the control range doubled
    "fig3_right": {
        "physics": {"forster": "F2_tuned", "kappa_mhz": 30.0},
        "photon": {"bandwidth_mhz": 1.0},
        "sweep": {"omega_min_mhz": 0.2, "omega_max_mhz": 20.0},
    },
}


def _merge(base: dict, changes: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for section, values in changes.items():
        if section not in out:
            raise ConfigurationError(f"unknown config section {where}{section!r}")
        if not isinstance(values, dict):
            raise ConfigurationError(f"config section {section!r} must be an object")
        for key, val in values.items():
            if key not in out[section]:
                raise ConfigurationError(f"unknown key {section}.{key} in {where or 'config'}")
            out[section][key] = val
    return out


def resolve(config: dict | None = None, preset: str | None = None, seed: int | None = None) -> dict:
    """Defaults, then preset, then the user's config, then command-line overrides."""
    cfg = copy.deepcopy(DEFAULTS)
    if preset is not None:
        if preset not in _PRESET_CHANGES:
            raise ConfigurationError(f"unknown preset {preset!r}; choose from {PRESETS}")
        cfg = _merge(cfg, _PRESET_CHANGES[preset], "preset ")
    if config:
        cfg = _merge(cfg, config)
    if seed is not None:
        cfg["geometry"]["seed"] = int(seed)
    validate(cfg)
    return cfg


def load(path, preset: str | None = None, seed: int | None = None) -> dict:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ConfigurationError("config file must hold a JSON object")
    return resolve(raw, preset=preset, seed=seed)


def validate(cfg: dict) -> None:
    if cfg["physics"]["forster"] not in FORSTER_RESONANCES:
        raise ConfigurationError(f"unknown Forster resonance {cfg['physics']['forster']!r}")
    if cfg["sweep"]["gate"] not in GATES:
        raise ConfigurationError(f"gate must be one of {GATES}")
    if cfg["sweep"]["nc_mode"] not in ("vary_n", "vary_g0"):
        raise ConfigurationError("nc_mode must be 'vary_n' or 'vary_g0'")
    if int(cfg["sweep"]["realizations"]) < 1:
        raise ConfigurationError("realizations must be at least 1")
    physics_params(cfg)
    geometry(cfg)


def physics_params(cfg: dict, **overrides) -> PhysicsParams:
    ph = cfg["physics"]
    forster = FORSTER_RESONANCES[ph["forster"]]
    kw = dict(
        kappa=float(ph["kappa_mhz"]),
        gamma_e=float(ph["gamma_e_mhz"]),
        gamma_r=float(ph["gamma_r_mhz"]),
        gamma_p=float(ph["gamma_p_mhz"]),
        omega_ctrl=float(ph["omega_mhz"]),
        delta=forster["delta"] if ph["delta_mhz"] is None else float(ph["delta_mhz"]),
        c3=forster["c3"] if ph["c3_mhz_um3"] is None else float(ph["c3_mhz_um3"]),
        angular_model=forster["angular_model"] if ph["angular_model"] is None else ph["angular_model"],
        g0=float(ph["g0_mhz"]),
        lambda_cav=float(ph["lambda_um"]),
    )
    kw.update(overrides)
    try:
        return PhysicsParams(**kw)
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from None


def default_qubits(gate: str):
    return TWO_QUBITS if gate == "atom_atom" else SINGLE_QUBIT


def geometry(cfg: dict, **overrides) -> CloudGeometry:
    geo = cfg["geometry"]
    qpos = geo["qubit_positions_um"]
    if qpos is None:
        qpos = default_qubits(cfg["sweep"]["gate"])
    kw = dict(
        r_c=float(geo["r_c_um"]),
        r_y=float(geo["r_y_um"]),
        r_g=float(geo["r_g_um"]),
        n_atoms=int(geo["n_atoms"]),
        qubit_positions=tuple(tuple(q) for q in qpos),
        min_separation=float(geo["min_separation_um"]),
        seed=int(geo["seed"]),
    )
    kw.update(overrides)
    return CloudGeometry(**kw)


def omega_values(cfg: dict) -> tuple:
    sw = cfg["sweep"]
    if sw["omega_values_mhz"] is not None:
        return tuple(float(v) for v in sw["omega_values_mhz"])
    return tuple(np.geomspace(sw["omega_min_mhz"], sw["omega_max_mhz"], int(sw["omega_points"])).tolist())


def nc_values(cfg: dict) -> tuple:
    sw = cfg["sweep"]
    if sw["nc_values"] is not None:
        return tuple(float(v) for v in sw["nc_values"])
    return tuple(np.geomspace(sw["nc_min"], sw["nc_max"], int(sw["nc_points"])).tolist())


def dump(cfg: dict, path) -> None:
    Path(path).write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n", encoding="utf-8")
