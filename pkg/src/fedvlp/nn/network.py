"""Model assembly: the conv-LSTM position regressor and generic dense stacks.

A ``Network`` is an ordered list of named layers sharing one flat weight
vector. The conv-LSTM regressor maps a received-power vector to a coordinate
estimate through

    conv (same padding) -> ReLU -> dropout -> layer norm ->
    LSTM over the per-anchor feature sequence -> tanh -> dropout ->
    layer norm -> dense head

The LSTM consumes the conv output as a sequence with one step per LED anchor
(in anchor index order) and only its final hidden state feeds the head.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layers import (
    AddChannelAxis,
    Conv1d,
    Dense,
    Dropout,
    LayerNorm,
    Lstm,
    Relu,
    Tanh,
)
from .weights import ModelWeights


class Network:
    """Ordered named layers over one flat float64 parameter vector."""

    def __init__(self, layers: list):
        self.layers = [(str(name), layer) for name, layer in layers]
        names = [name for name, _ in self.layers]
        if len(set(names)) != len(names):
            raise ValueError("layer names must be unique")
        layout = []
        for name, layer in self.layers:
            for pname, shape in layer.param_specs():
                layout.append((f"{name}/{pname}", tuple(shape)))
        self.layout = tuple(layout)
        self.n_params = sum(int(np.prod(s, dtype=np.int64)) for _, s in self.layout)

    def init_weights(self, rng) -> ModelWeights:
        chunks = []
        for name, layer in self.layers:
            params = layer.init_params(rng)
            for pname, _ in layer.param_specs():
                chunks.append(np.asarray(params[pname], dtype=np.float64).ravel())
        values = np.concatenate(chunks) if chunks else np.zeros(0)
        return ModelWeights(values, self.layout)

    def zero_weights(self) -> ModelWeights:
        return ModelWeights(np.zeros(self.n_params), self.layout)

    def check_layout(self, weights: ModelWeights) -> None:
        if weights.layout == self.layout:
            return
        for got, want in zip(weights.layout, self.layout):
            if got != want:
                raise ValueError(
                    f"weight layout mismatch at {want[0]!r}: "
                    f"expected shape {want[1]}, got {got[0]!r} {got[1]}")
        raise ValueError(
            f"weight layout mismatch: expected {len(self.layout)} records, "
            f"got {len(weights.layout)}")

    def _split(self, weights: ModelWeights) -> list:
        views = weights.views()
        out = []
        for name, layer in self.layers:
            out.append({pname: views[f"{name}/{pname}"]
                        for pname, _ in layer.param_specs()})
        return out

    def _forward(self, weights, x, train, rng, keep_caches):
        self.check_layout(weights)
        x = np.asarray(x, dtype=np.float64)
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite network input")
        per_layer = self._split(weights)
        caches = []
        for (name, layer), params in zip(self.layers, per_layer):
            x, cache = layer.forward(x, params, train, rng)
            if not np.all(np.isfinite(x)):
                raise FloatingPointError(f"non-finite activations after {name!r}")
            if keep_caches:
                caches.append(cache)
        return x, caches, per_layer

    def forward(self, weights: ModelWeights, x, train: bool = False,
                rng=None) -> np.ndarray:
        y, _, _ = self._forward(weights, x, train, rng, keep_caches=False)
        return y

    def loss_and_gradient(self, weights: ModelWeights, x, targets,
                          train: bool = True, rng=None,
                          return_input_grad: bool = False):
        """Mean-squared-error loss over the batch and its exact gradient with
        respect to every weight (flat, layout order)."""
        targets = np.asarray(targets, dtype=np.float64)
        pred, caches, per_layer = self._forward(weights, x, train, rng,
                                                keep_caches=True)
        if pred.shape != targets.shape:
            raise ValueError(f"prediction shape {pred.shape} does not match "
                             f"targets {targets.shape}")
        batch = pred.shape[0]
        residual = pred - targets
        loss = float(np.sum(residual * residual) / batch)
        dy = 2.0 * residual / batch
        gradient = ModelWeights(np.zeros(self.n_params), self.layout)
        views = gradient.views()
        for idx in range(len(self.layers) - 1, -1, -1):
            name, layer = self.layers[idx]
            dy, grads = layer.backward(dy, caches[idx], per_layer[idx])
            for pname, g in grads.items():
                views[f"{name}/{pname}"][...] = g
        if return_input_grad:
            return loss, gradient.values, dy
        return loss, gradient.values


def mse_loss(predictions, targets) -> float:
    """(1/D) * sum of squared Euclidean residuals over the batch."""
    predictions = np.asarray(predictions, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if predictions.shape != targets.shape or predictions.size == 0:
        raise ValueError("predictions and targets must have equal nonzero shapes")
    residual = predictions - targets
    return float(np.sum(residual * residual) / predictions.shape[0])


@dataclass
class CvposnetConfig:
    n_inputs: int = 16      # LED anchors, one sequence step each
    conv_filters: int = 16
    conv_kernel: int = 3
    dropout_p: float = 0.2
    lstm_units: int = 64
    output_dim: int = 3

    def __post_init__(self):
        if self.conv_kernel % 2 != 1:
            raise ValueError("conv_kernel must be odd")
        for name in ("n_inputs", "conv_filters", "conv_kernel", "lstm_units",
                     "output_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError("dropout_p must lie in [0, 1)")


def build_cvposnet(cfg: CvposnetConfig) -> Network:
    return Network([
        ("seq", AddChannelAxis()),
        ("conv", Conv1d(1, cfg.conv_filters, cfg.conv_kernel)),
        ("conv_relu", Relu()),
        ("conv_drop", Dropout(cfg.dropout_p)),
        ("conv_norm", LayerNorm(cfg.conv_filters)),
        ("lstm", Lstm(cfg.conv_filters, cfg.lstm_units)),
        ("lstm_tanh", Tanh()),
        ("lstm_drop", Dropout(cfg.dropout_p)),
        ("lstm_norm", LayerNorm(cfg.lstm_units)),
        ("head", Dense(cfg.lstm_units, cfg.output_dim)),
    ])


def build_dense_stack(n_inputs: int, hidden, output_dim: int) -> Network:
    """Plain ReLU multilayer perceptron in the same weight machinery."""
    layers = []
    n_prev = n_inputs
    for i, width in enumerate(hidden):
        layers.append((f"dense{i}", Dense(n_prev, int(width))))
        layers.append((f"relu{i}", Relu()))
        n_prev = int(width)
    layers.append(("head", Dense(n_prev, output_dim)))
    return Network(layers)


def forward_cvposnet(weights: ModelWeights, powers_scaled, cfg: CvposnetConfig,
                     mode: str = "infer", rng=None) -> np.ndarray:
    """Single-vector convenience wrapper around Network.forward."""
    if mode not in ("infer", "train"):
        raise ValueError("mode must be 'infer' or 'train'")
    net = build_cvposnet(cfg)
    x = np.asarray(powers_scaled, dtype=np.float64).reshape(1, -1)
    return net.forward(weights, x, train=(mode == "train"), rng=rng)[0]
