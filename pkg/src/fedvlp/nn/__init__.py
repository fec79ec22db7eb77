from .weights import ModelWeights, load_weights, save_weights, sgd_step
from .network import (
    CvposnetConfig,
    Network,
    build_cvposnet,
    forward_cvposnet,
    mse_loss,
)
from .gradcheck import GradientReport, check_gradients

__all__ = [
    "CvposnetConfig",
    "GradientReport",
    "ModelWeights",
    "Network",
    "build_cvposnet",
    "check_gradients",
    "forward_cvposnet",
    "load_weights",
    "mse_loss",
    "save_weights",
    "sgd_step",
]
