"""Binds a validated config tree to simulator objects and on-disk run
artifacts: dataset generation, training runs, checkpoint evaluation, and the
scenario sweep comparing the adaptive and frozen arms."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import baselines, metrics
from .config import ConfigError
from .environment import RoomEnvironment, ScenarioKind, ScenarioSpec, advance, build_environment
from .federation import FederationConfig, FederationRun
from .nn.network import CvposnetConfig, Network, build_cvposnet
from .nn.weights import ModelWeights, load_weights, save_weights
from .optics import NoiseParams, Photodiode
from .rng import substream
from .sensing import (
    FeatureScaler,
    default_trajectories,
    export_dataset_csv,
    fit_scaler_from_pilot,
    read_manifest,
    write_manifest,
)


@dataclass
class Setup:
    """Everything a run needs, resolved from one config tree."""

    cfg: dict
    base_env: RoomEnvironment
    scenarios: list
    network: Network
    fed_cfg: FederationConfig
    trajectories: list
    scaler: FeatureScaler
    thresholds: np.ndarray
    grid: np.ndarray


def build_env_from_config(cfg: dict) -> RoomEnvironment:
    room, pdc, nc, walls = cfg["room"], cfg["photodiode"], cfg["noise"], cfg["walls"]
    return build_environment(
        dims=tuple(room["dims"]),
        led_grid=room["led_grid"],
        emit_power_w=room["emit_power_w"],
        half_power_angle_rad=math.radians(room["half_power_angle_deg"]),
        pd=Photodiode(
            area_m2=pdc["area_m2"],
            fov_rad=math.radians(pdc["fov_deg"]),
            responsivity_a_per_w=pdc["responsivity_a_per_w"],
            filter_gain=pdc["filter_gain"],
            concentrator_index=pdc["concentrator_index"],
        ),
        noise=NoiseParams(
            background_current_a=nc["background_current_a"],
            bandwidth_hz=nc["bandwidth_hz"],
            temperature_k=nc["temperature_k"],
            open_loop_gain=nc["open_loop_gain"],
            capacitance_per_area_f_m2=nc["capacitance_per_area_f_m2"],
            fet_noise_factor=nc["fet_noise_factor"],
            transconductance_s=nc["transconductance_s"],
        ),
        wall_reflectance=walls["reflectance"],
        patch_edge_m=walls["patch_edge_m"],
    )


def build_scenarios_from_config(cfg: dict, kinds=None) -> list:
    sc = cfg["scenario"]
    if kinds is None:
        kinds = sc["kinds"]
    return [
        ScenarioSpec(
            kind=ScenarioKind(kind),
            ambient_step_a=sc["ambient_step_a"],
            blackout_led_ids=sc["blackout_led_ids"],
            blackout_round=sc["blackout_round"],
            aging_initial_w=sc["aging_initial_w"],
            aging_beta=sc["aging_beta"],
        )
        for kind in kinds
    ]


def build_network_from_config(cfg: dict, model_type: str | None = None) -> Network:
    model = cfg["model"]
    n_inputs = cfg["room"]["led_grid"] ** 2
    kind = model_type or model["type"]
    if kind == "cvposnet":
        return build_cvposnet(CvposnetConfig(
            n_inputs=n_inputs,
            conv_filters=model["conv_filters"],
            conv_kernel=model["conv_kernel"],
            dropout_p=model["dropout_p"],
            lstm_units=model["lstm_units"],
            output_dim=model["output_dim"],
        ))
    if kind == "mlp":
        return baselines.mlp_network(n_inputs, tuple(model["mlp_hidden"]),
                                     model["output_dim"])
    raise ConfigError(f"unknown model type {kind!r}")


def build_fed_config(cfg: dict, rounds: int | None = None) -> FederationConfig:
    fed = cfg["federation"]
    return FederationConfig(
        n_ues=fed["n_ues"],
        local_epochs=fed["local_epochs"],
        minibatch_size=fed["minibatch_size"],
        rounds=fed["rounds"] if rounds is None else rounds,
        learning_rate=fed["learning_rate"],
        refresh_interval=fed["refresh_interval"],
        seed=cfg["seed"],
        checkpoint_interval=fed["checkpoint_interval"],
    )


def make_setup(cfg: dict, *, model_type: str | None = None,
               scenario_kinds=None, rounds: int | None = None) -> Setup:
    base_env = build_env_from_config(cfg)
    scenarios = build_scenarios_from_config(cfg, kinds=scenario_kinds)
    network = build_network_from_config(cfg, model_type)
    fed_cfg = build_fed_config(cfg, rounds=rounds)
    sensing = cfg["sensing"]
    trajectories = default_trajectories(
        base_env.dims, fed_cfg.n_ues,
        mode=sensing["partition"],
        z_plane_m=sensing["z_plane_m"],
        z_range_m=tuple(sensing["z_range_m"]) if sensing["z_range_m"] else None,
    )
    # scaling statistics frozen from a deterministic pilot survey of the
    # run's round-0 environment
    env0 = advance(base_env, scenarios, 0)
    scaler = fit_scaler_from_pilot(env0, sensing["z_plane_m"], cfg["eval"]["grid_n"])
    ev = cfg["eval"]
    thresholds = metrics.default_thresholds(ev["cdf_max_m"], ev["cdf_step_m"])
    grid = metrics.evaluation_grid(base_env.dims, sensing["z_plane_m"],
                                   ev["grid_n"])
    return Setup(cfg=cfg, base_env=base_env, scenarios=scenarios,
                 network=network, fed_cfg=fed_cfg, trajectories=trajectories,
                 scaler=scaler, thresholds=thresholds, grid=grid)


def make_eval_hook(setup: Setup):
    return metrics.make_grid_evaluator(
        setup.network, setup.scaler, setup.grid,
        thresholds=setup.thresholds, seed=setup.cfg["seed"],
        stochastic=setup.cfg["stochastic_noise"],
        error_dim=setup.cfg["eval"]["error_dim"])


def make_run(setup: Setup, *, out_dir=None, workers: int | None = None,
             eval_hook=None, manifest_extra=None) -> FederationRun:
    cfg = setup.cfg
    return FederationRun(
        setup.base_env, setup.scenarios, setup.network, setup.fed_cfg,
        scaler=setup.scaler, trajectories=setup.trajectories,
        capacity=cfg["sensing"]["capacity"],
        replace_fraction=cfg["sensing"]["replace_fraction"],
        eval_hook=eval_hook if eval_hook is not None else make_eval_hook(setup),
        stochastic=cfg["stochastic_noise"],
        workers=workers if workers is not None else cfg["federation"]["workers"],
        out_dir=out_dir,
        manifest_extra=manifest_extra,
    )


def scenario_state_manifest(cfg: dict) -> dict:
    sc = dict(cfg["scenario"])
    return {"scenario": sc, "model": dict(cfg["model"]),
            "room": dict(cfg["room"])}


def run_training(cfg: dict, out_dir=None, *, workers: int | None = None,
                 init_weights: ModelWeights | None = None,
                 start_round: int = 0, progress=None):
    """Train per the config; returns (setup, round log)."""
    setup = make_setup(cfg)
    run = make_run(setup, out_dir=out_dir, workers=workers,
                   manifest_extra=scenario_state_manifest(cfg))
    log = run.execute(init_weights=init_weights, start_round=start_round,
                      progress=progress)
    return setup, log


def generate_datasets(cfg: dict, out_dir) -> list:
    """Round-0 warm fill for every UE, exported one CSV per UE + manifest."""
    setup = make_setup(cfg)
    run = make_run(setup)
    datasets = run.datasets_at(0)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for ds in datasets:
        export_dataset_csv(ds, out_dir / f"ue_{ds.ue_id:02d}.csv")
    manifest = {
        "seed": cfg["seed"],
        "stochastic": cfg["stochastic_noise"],
        "n_ues": setup.fed_cfg.n_ues,
        "capacity": cfg["sensing"]["capacity"],
        "scaler": setup.scaler.to_jsonable(),
    }
    manifest.update(scenario_state_manifest(cfg))
    write_manifest(out_dir / "manifest.json", manifest)
    return datasets


def evaluate_checkpoint(cfg: dict, checkpoint_path, out_dir=None,
                        round_index: int | None = None):
    """Evaluate stored weights on the held-out grid; returns the report.

    The checkpoint's sidecar manifest supplies the round and the frozen
    scaling statistics the weights were trained against.
    """
    weights = load_weights(checkpoint_path)
    sidecar = Path(checkpoint_path).with_suffix(".json")
    manifest = read_manifest(sidecar) if sidecar.exists() else {}
    if round_index is None:
        round_index = manifest.get("round", 0)
    setup = make_setup(cfg)
    if "scaler" in manifest:
        setup.scaler = FeatureScaler.from_jsonable(manifest["scaler"])
    setup.network.check_layout(weights)
    hook = make_eval_hook(setup)
    env_t = advance(setup.base_env, setup.scenarios, round_index)
    report = hook(round_index, env_t, weights)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        metrics.write_cdf_csv(out_dir / "cdf.csv",
                              {setup.cfg["model"]["type"]: report.cdf})
        write_manifest(out_dir / "summary.json", {
            "round": report.round,
            "mean_err_m": report.mean_m,
            "median_err_m": report.median_m,
            "p95_err_m": report.p95_m,
        })
    return report


SWEEP_SCENARIOS = ("ambient_drift", "led_blackout", "device_aging", "stationary")


def run_scenario_sweep(cfg: dict, out_dir, *, pretrained_path=None,
                       workers: int | None = None, progress=None) -> dict:
    """Pre-train under the stationary profile, then compare the adaptive
    (federated) arm against the frozen one-shot arm in every scenario.

    Returns {scenario: {"adaptive": [EvalReport...], "frozen": [...]}} and
    writes comparison.csv.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sweep = cfg["sweep"]

    if pretrained_path is not None:
        pretrained = load_weights(pretrained_path)
        sidecar = Path(pretrained_path).with_suffix(".json")
        manifest = read_manifest(sidecar) if sidecar.exists() else {}
        if "scaler" not in manifest:
            raise ConfigError(
                f"pretrained checkpoint {pretrained_path} has no sidecar "
                "manifest with scaling statistics")
        scaler = FeatureScaler.from_jsonable(manifest["scaler"])
        pretrain_setup = make_setup(cfg, scenario_kinds=["stationary"])
        pretrain_setup.network.check_layout(pretrained)
    else:
        pretrain_setup = make_setup(cfg, scenario_kinds=["stationary"],
                                    rounds=sweep["pretrain_rounds"])
        run = make_run(pretrain_setup, workers=workers)
        log = run.execute(progress=progress)
        pretrained = log[-1].global_weights
        scaler = pretrain_setup.scaler
        save_weights(pretrained, out_dir / "pretrained.wts")
        write_manifest(out_dir / "pretrained.json", {
            "round": log[-1].t,
            "seed": cfg["seed"],
            "stochastic": cfg["stochastic_noise"],
            "scaler": scaler.to_jsonable(),
        })

    results: dict = {}
    rows = []
    for kind in SWEEP_SCENARIOS:
        setup = make_setup(cfg, scenario_kinds=[kind],
                           rounds=sweep["scenario_rounds"])
        # the pre-trained weights are only meaningful against the scaling
        # statistics they were trained with
        setup.scaler = scaler
        hook = make_eval_hook(setup)
        if sweep["frozen_arm"] == "centralized":
            run0 = make_run(setup, workers=workers)
            frozen_weights = baselines.frozen_centralized(
                run0.datasets_at(0), setup.network, setup.scaler,
                init_weights=pretrained, epochs=sweep["central_epochs"],
                minibatch_size=setup.fed_cfg.minibatch_size,
                learning_rate=setup.fed_cfg.learning_rate, seed=cfg["seed"])
        else:
            frozen_weights = pretrained
        adaptive_run = make_run(setup, workers=workers)
        adaptive_log = adaptive_run.execute(init_weights=pretrained,
                                            progress=progress)
        adaptive = [entry.eval for entry in adaptive_log]
        frozen = []
        for entry in adaptive_log:
            env_t = advance(setup.base_env, setup.scenarios, entry.t)
            frozen.append(hook(entry.t, env_t, frozen_weights))
        results[kind] = {"adaptive": adaptive, "frozen": frozen}
        rows += [(kind, "adaptive", rep) for rep in adaptive]
        rows += [(kind, "frozen", rep) for rep in frozen]
    metrics.write_comparison_csv(out_dir / "comparison.csv", rows)
    return results
