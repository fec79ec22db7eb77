"""Run configuration: a nested key-value tree (YAML on disk), validated
strictly — unknown keys are hard errors so a typo can never silently change
an experiment. The fully resolved tree is echoed into every output directory.
"""
from __future__ import annotations

import copy
import math
from pathlib import Path

import yaml


class ConfigError(Exception):
    """Invalid run configuration (bad key, type, or value)."""


DEFAULTS = {
    "seed": 20240607,
    "stochastic_noise": False,
    "room": {
        "dims": [5.0, 5.0, 3.0],
        "led_grid": 4,
        "emit_power_w": 1.0,
        "half_power_angle_deg": 60.0,
    },
    "photodiode": {
        "area_m2": 1e-4,
        "fov_deg": 90.0,
        "responsivity_a_per_w": 0.6,
        "filter_gain": 1.0,
        "concentrator_index": 1.0,
    },
    "noise": {
        "background_current_a": 740e-6,
        "bandwidth_hz": 5e6,
        "temperature_k": 295.0,
        "open_loop_gain": 10.0,
        "capacitance_per_area_f_m2": 1.12e-6,
        "fet_noise_factor": 1.5,
        "transconductance_s": 30e-3,
    },
    "walls": {
        "reflectance": 0.7,
        "patch_edge_m": 0.25,
    },
    "scenario": {
        "kinds": ["stationary"],
        "ambient_step_a": 50e-6,
        "blackout_led_ids": None,
        "blackout_round": 0,
        "aging_initial_w": 1.0,
        "aging_beta": -math.log(0.8) / 100.0,
    },
    "sensing": {
        "capacity": 900,
        "z_plane_m": 0.85,
        "z_range_m": None,
        "partition": "region",
        "replace_fraction": 0.1,
    },
    "model": {
        "type": "cvposnet",
        "conv_filters": 16,
        "conv_kernel": 3,
        "dropout_p": 0.2,
        "lstm_units": 64,
        "mlp_hidden": [64, 64],
        "output_dim": 3,
    },
    "federation": {
        "n_ues": 10,
        "local_epochs": 5,
        "minibatch_size": 128,
        "rounds": 200,
        "learning_rate": 0.01,
        "refresh_interval": 10,
        "checkpoint_interval": 50,
        "workers": 1,
    },
    "baselines": {
        "knn_k": 4,
        "knn_weighting": "inverse_distance",
    },
    "sweep": {
        "scenario_rounds": 100,
        "pretrain_rounds": 50,
        "frozen_arm": "checkpoint",  # "checkpoint" or "centralized"
        "central_epochs": 5,
    },
    "eval": {
        "grid_n": 41,
        "error_dim": 3,
        "cdf_max_m": 0.5,
        "cdf_step_m": 0.005,
    },
}

_SCENARIO_KINDS = {"stationary", "ambient_drift", "led_blackout", "device_aging"}
_PARTITIONS = {"region", "uniform"}
_MODEL_TYPES = {"cvposnet", "mlp"}
_WEIGHTINGS = {"inverse_distance", "uniform"}
_FROZEN_ARMS = {"checkpoint", "centralized"}


def default_config() -> dict:
    return copy.deepcopy(DEFAULTS)


def _type_name(value) -> str:
    return type(value).__name__


def _check_number(path, value, kind=float, minimum=None, maximum=None,
                  exclusive_min=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {_type_name(value)}")
    if kind is int and not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    if minimum is not None:
        if exclusive_min and not value > minimum:
            raise ConfigError(f"{path}: must be > {minimum}, got {value!r}")
        if not exclusive_min and not value >= minimum:
            raise ConfigError(f"{path}: must be >= {minimum}, got {value!r}")
    if maximum is not None and not value <= maximum:
        raise ConfigError(f"{path}: must be <= {maximum}, got {value!r}")


def _check_choice(path, value, choices):
    if value not in choices:
        raise ConfigError(f"{path}: must be one of {sorted(choices)}, got {value!r}")


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key: {here}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{here}: expected a section, got "
                                  f"{_type_name(value)}")
            out[key] = _merge(base[key], value, here)
        else:
            out[key] = copy.deepcopy(value)
    return out


def validate(cfg: dict) -> None:
    _check_number("seed", cfg["seed"], int, minimum=0)
    if not isinstance(cfg["stochastic_noise"], bool):
        raise ConfigError("stochastic_noise: expected a boolean")

    room = cfg["room"]
    dims = room["dims"]
    if not (isinstance(dims, (list, tuple)) and len(dims) == 3):
        raise ConfigError("room.dims: expected a list of three numbers")
    for i, v in enumerate(dims):
        _check_number(f"room.dims[{i}]", v, minimum=0, exclusive_min=True)
    _check_number("room.led_grid", room["led_grid"], int, minimum=1)
    _check_number("room.emit_power_w", room["emit_power_w"], minimum=0)
    _check_number("room.half_power_angle_deg", room["half_power_angle_deg"],
                  minimum=0, maximum=90, exclusive_min=True)
    if room["half_power_angle_deg"] >= 90:
        raise ConfigError("room.half_power_angle_deg: must be strictly below 90")

    pd = cfg["photodiode"]
    for key in ("area_m2", "responsivity_a_per_w", "filter_gain",
                "concentrator_index"):
        _check_number(f"photodiode.{key}", pd[key], minimum=0, exclusive_min=True)
    _check_number("photodiode.fov_deg", pd["fov_deg"], minimum=0, maximum=90,
                  exclusive_min=True)

    noise = cfg["noise"]
    _check_number("noise.background_current_a", noise["background_current_a"],
                  minimum=0)
    for key in ("bandwidth_hz", "temperature_k", "open_loop_gain",
                "capacitance_per_area_f_m2", "fet_noise_factor",
                "transconductance_s"):
        _check_number(f"noise.{key}", noise[key], minimum=0, exclusive_min=True)

    walls = cfg["walls"]
    _check_number("walls.reflectance", walls["reflectance"], minimum=0, maximum=1)
    _check_number("walls.patch_edge_m", walls["patch_edge_m"], minimum=0,
                  exclusive_min=True)

    scenario = cfg["scenario"]
    kinds = scenario["kinds"]
    if not isinstance(kinds, list) or not kinds:
        raise ConfigError("scenario.kinds: expected a non-empty list")
    for kind in kinds:
        _check_choice("scenario.kinds", kind, _SCENARIO_KINDS)
    _check_number("scenario.ambient_step_a", scenario["ambient_step_a"], minimum=0)
    if scenario["blackout_led_ids"] is not None:
        ids = scenario["blackout_led_ids"]
        if not isinstance(ids, list):
            raise ConfigError("scenario.blackout_led_ids: expected a list or null")
        n_leds = room["led_grid"] ** 2
        for i in ids:
            _check_number("scenario.blackout_led_ids[]", i, int, minimum=0,
                          maximum=n_leds - 1)
    _check_number("scenario.blackout_round", scenario["blackout_round"], int,
                  minimum=0)
    _check_number("scenario.aging_initial_w", scenario["aging_initial_w"],
                  minimum=0, exclusive_min=True)
    _check_number("scenario.aging_beta", scenario["aging_beta"], minimum=0,
                  exclusive_min=True)

    sensing = cfg["sensing"]
    _check_number("sensing.capacity", sensing["capacity"], int, minimum=1)
    _check_number("sensing.z_plane_m", sensing["z_plane_m"], minimum=0,
                  maximum=dims[2])
    if sensing["z_range_m"] is not None:
        zr = sensing["z_range_m"]
        if not (isinstance(zr, list) and len(zr) == 2 and zr[0] < zr[1]):
            raise ConfigError("sensing.z_range_m: expected [lo, hi] with lo < hi")
        for v in zr:
            _check_number("sensing.z_range_m[]", v, minimum=0, maximum=dims[2])
    _check_choice("sensing.partition", sensing["partition"], _PARTITIONS)
    _check_number("sensing.replace_fraction", sensing["replace_fraction"],
                  minimum=0, maximum=1)

    model = cfg["model"]
    _check_choice("model.type", model["type"], _MODEL_TYPES)
    _check_number("model.conv_filters", model["conv_filters"], int, minimum=1)
    _check_number("model.conv_kernel", model["conv_kernel"], int, minimum=1)
    if model["conv_kernel"] % 2 != 1:
        raise ConfigError("model.conv_kernel: must be odd")
    _check_number("model.dropout_p", model["dropout_p"], minimum=0)
    if not model["dropout_p"] < 1:
        raise ConfigError("model.dropout_p: must be strictly below 1")
    _check_number("model.lstm_units", model["lstm_units"], int, minimum=1)
    if not isinstance(model["mlp_hidden"], list) or not model["mlp_hidden"]:
        raise ConfigError("model.mlp_hidden: expected a non-empty list")
    for width in model["mlp_hidden"]:
        _check_number("model.mlp_hidden[]", width, int, minimum=1)
    _check_choice("model.output_dim", model["output_dim"], {2, 3})

    fed = cfg["federation"]
    for key in ("n_ues", "minibatch_size", "refresh_interval", "workers"):
        _check_number(f"federation.{key}", fed[key], int, minimum=1)
    for key in ("local_epochs", "rounds", "checkpoint_interval"):
        _check_number(f"federation.{key}", fed[key], int, minimum=0)
    _check_number("federation.learning_rate", fed["learning_rate"], minimum=0)
    if fed["minibatch_size"] > sensing["capacity"]:
        raise ConfigError("federation.minibatch_size: must not exceed "
                          "sensing.capacity")

    base = cfg["baselines"]
    _check_number("baselines.knn_k", base["knn_k"], int, minimum=1)
    _check_choice("baselines.knn_weighting", base["knn_weighting"], _WEIGHTINGS)

    sweep = cfg["sweep"]
    _check_number("sweep.scenario_rounds", sweep["scenario_rounds"], int, minimum=1)
    _check_number("sweep.pretrain_rounds", sweep["pretrain_rounds"], int, minimum=0)
    _check_choice("sweep.frozen_arm", sweep["frozen_arm"], _FROZEN_ARMS)
    _check_number("sweep.central_epochs", sweep["central_epochs"], int, minimum=1)

    ev = cfg["eval"]
    _check_number("eval.grid_n", ev["grid_n"], int, minimum=2)
    _check_choice("eval.error_dim", ev["error_dim"], {2, 3})
    _check_number("eval.cdf_max_m", ev["cdf_max_m"], minimum=0, exclusive_min=True)
    _check_number("eval.cdf_step_m", ev["cdf_step_m"], minimum=0,
                  exclusive_min=True)


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Defaults, deep-merged with the YAML file and then CLI overrides."""
    cfg = default_config()
    if path is not None:
        try:
            with open(Path(path)) as fh:
                loaded = yaml.safe_load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError("config file must contain a mapping at top level")
        cfg = _merge(cfg, loaded)
    if overrides:
        cfg = _merge(cfg, overrides)
    validate(cfg)
    return cfg


def save_config(cfg: dict, path) -> None:
    with open(Path(path), "w", newline="\n") as fh:
        yaml.safe_dump(cfg, fh, sort_keys=True, default_flow_style=None)
