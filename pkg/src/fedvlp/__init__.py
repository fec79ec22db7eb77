"""Desk-scale simulator of cooperative indoor visible-light positioning:
synthetic received-power fingerprints from an optical channel model, federated
training of small position regressors, and evaluation under nonstationary
environments."""

__version__ = "0.1.0"

from .aggregation import aggregate
from .environment import (
    RoomEnvironment,
    ScenarioKind,
    ScenarioSpec,
    advance,
    build_environment,
    default_environment,
)
from .federation import FederationConfig, FederationRound, local_train, run_federation, infer
from .metrics import EvalReport, empirical_cdf, positioning_errors
from .nn import (
    CvposnetConfig,
    ModelWeights,
    build_cvposnet,
    check_gradients,
    load_weights,
    mse_loss,
    save_weights,
    sgd_step,
)
from .optics import (
    LedAnchor,
    NoiseParams,
    Photodiode,
    WallPatch,
    concentrator_gain,
    lambertian_order,
    los_gain,
    make_wall_patches,
    nlos_gain,
    power_vector,
    received_power,
)
from .sensing import (
    FeatureScaler,
    LocalDataset,
    Sample,
    UeTrajectory,
    collect,
    refresh,
)

__all__ = [
    "CvposnetConfig",
    "EvalReport",
    "FeatureScaler",
    "FederationConfig",
    "FederationRound",
    "LedAnchor",
    "LocalDataset",
    "ModelWeights",
    "NoiseParams",
    "Photodiode",
    "RoomEnvironment",
    "Sample",
    "ScenarioKind",
    "ScenarioSpec",
    "UeTrajectory",
    "WallPatch",
    "advance",
    "aggregate",
    "build_cvposnet",
    "build_environment",
    "check_gradients",
    "collect",
    "concentrator_gain",
    "default_environment",
    "empirical_cdf",
    "infer",
    "lambertian_order",
    "load_weights",
    "local_train",
    "los_gain",
    "make_wall_patches",
    "mse_loss",
    "nlos_gain",
    "positioning_errors",
    "power_vector",
    "received_power",
    "refresh",
    "run_federation",
    "save_weights",
    "sgd_step",
]
