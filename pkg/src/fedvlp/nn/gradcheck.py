"""Finite-difference verification of every analytic gradient.

Central differences with eps = 1e-5 in float64. Relative error uses a small
absolute floor so near-zero gradient entries do not blow up the ratio:

    rel = |g_analytic - g_fd| / max(|g_analytic|, |g_fd|, floor)

The floor must sit well above central-difference roundoff, which is about
machine_eps * |loss| / eps ~ 1e-10 here: entries where both gradients are
exactly zero (e.g. the mean direction through a layer norm) otherwise report
pure FD noise as relative error. 1e-5 keeps every informative entry in the
strict relative regime while ignoring sub-1e-9 absolute noise.

Dropout masks are frozen across the two-sided evaluations by recreating the
rng from a fixed seed on every function call.

Central differences are only valid away from ReLU kinks: an instance whose
smallest |preactivation| is within the kink margin of zero could step across
the nondifferentiable point, so such instances are resampled.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layers import Conv1d, Dense, Dropout, LayerNorm, Lstm, Relu, Tanh
from .network import CvposnetConfig, Network, build_cvposnet, build_dense_stack
from .weights import ModelWeights

DEFAULT_EPS = 1e-5
DEFAULT_TOLERANCE = 1e-4
REL_FLOOR = 1e-5
KINK_MARGIN = 1e-3  # min |ReLU preactivation| for a valid FD instance


def finite_difference_gradient(f, w0: np.ndarray, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Central-difference gradient of a scalar function of a flat vector."""
    w0 = np.asarray(w0, dtype=np.float64)
    grad = np.empty_like(w0)
    w = w0.copy()
    for i in range(w0.size):
        w[i] = w0[i] + eps
        up = f(w)
        w[i] = w0[i] - eps
        down = f(w)
        w[i] = w0[i]
        grad[i] = (up - down) / (2.0 * eps)
    return grad


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray,
                       floor: float = REL_FLOOR) -> float:
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    if analytic.size == 0:
        return 0.0
    return float(np.max(np.abs(analytic - numeric) / denom))


@dataclass
class CheckEntry:
    name: str
    kind: str            # "weights" or "input"
    max_rel_err: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tolerance


@dataclass
class GradientReport:
    entries: list

    @property
    def all_passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def summary(self) -> str:
        lines = []
        for e in self.entries:
            status = "pass" if e.passed else "FAIL"
            lines.append(f"{status}  {e.name:32s} {e.kind:7s} "
                         f"max_rel_err={e.max_rel_err:.3e}  tol={e.tolerance:.0e}")
        return "\n".join(lines)


def _check_weights(name, net: Network, x, targets, rng_seed: int,
                   train: bool, tol: float, eps: float) -> CheckEntry:
    w0 = net.init_weights(np.random.default_rng(rng_seed))

    def loss_of(values):
        w = ModelWeights(values, net.layout)
        loss, _ = net.loss_and_gradient(
            w, x, targets, train=train, rng=np.random.default_rng(rng_seed + 1))
        return loss

    _, analytic = net.loss_and_gradient(
        w0, x, targets, train=train, rng=np.random.default_rng(rng_seed + 1))
    numeric = finite_difference_gradient(loss_of, w0.values, eps)
    return CheckEntry(name, "weights", max_relative_error(analytic, numeric), tol)


def _check_input(name, net: Network, x, targets, rng_seed: int,
                 train: bool, tol: float, eps: float) -> CheckEntry:
    w0 = net.init_weights(np.random.default_rng(rng_seed))
    shape = x.shape

    def loss_of_input(flat):
        loss, _ = net.loss_and_gradient(
            w0, flat.reshape(shape), targets, train=train,
            rng=np.random.default_rng(rng_seed + 1))
        return loss

    _, _, dx = net.loss_and_gradient(
        w0, x, targets, train=train, rng=np.random.default_rng(rng_seed + 1),
        return_input_grad=True)
    numeric = finite_difference_gradient(loss_of_input, x.ravel(), eps)
    return CheckEntry(name, "input", max_relative_error(dx.ravel(), numeric), tol)


def _relu_kink_margin(net: Network, weights, x, rng_seed: int, train: bool) -> float:
    """Smallest |preactivation| over every ReLU in the net (inf if none)."""
    _, caches, _ = net._forward(weights, x, train,
                                np.random.default_rng(rng_seed + 1),
                                keep_caches=True)
    margins = [float(np.min(np.abs(cache)))
               for (_, layer), cache in zip(net.layers, caches)
               if isinstance(layer, Relu)]
    return min(margins) if margins else float("inf")


def _draw_instance(net: Network, shape, rng, rng_seed: int, train: bool,
                   max_tries: int = 50):
    """Input batch whose ReLU preactivations are clear of the FD step."""
    for _ in range(max_tries):
        x = rng.normal(size=shape)
        w = net.init_weights(np.random.default_rng(rng_seed))
        if _relu_kink_margin(net, w, x, rng_seed, train) > KINK_MARGIN:
            return x
    raise RuntimeError("could not draw a kink-free finite-difference instance")


def _small_cases(rng):
    """Randomized small single-layer instances: (name, net, input shape, train)."""
    b = int(rng.integers(2, 5))
    t = int(rng.integers(3, 7))
    cin = int(rng.integers(2, 5))
    cout = int(rng.integers(2, 5))
    h = int(rng.integers(2, 6))
    return [
        ("dense", Network([("dense", Dense(cin, cout))]), (b, cin), False),
        ("conv1d", Network([("conv", Conv1d(cin, cout, 3))]), (b, t, cin), False),
        ("relu", Network([("relu", Relu())]), (b, cin), False),
        ("tanh", Network([("tanh", Tanh())]), (b, cin), False),
        ("dropout", Network([("drop", Dropout(0.3))]), (b, 6), True),
        ("layernorm", Network([("norm", LayerNorm(cin))]), (b, t, cin), False),
        ("lstm", Network([("lstm", Lstm(cin, h))]), (b, t, cin), False),
    ]


def check_gradients(tolerance: float = DEFAULT_TOLERANCE, seed: int = 1234,
                    instances: int = 3, eps: float = DEFAULT_EPS,
                    check_inputs: bool = True) -> GradientReport:
    """Check every layer type in isolation plus the full conv-LSTM regressor
    and the dense baseline, over several randomized small instances."""
    master = np.random.default_rng(seed)
    entries = []
    for k in range(instances):
        rng = np.random.default_rng(master.integers(0, 2 ** 31))
        rng_seed = int(rng.integers(0, 2 ** 31))
        for name, net, shape, train in _small_cases(rng):
            x = _draw_instance(net, shape, rng, rng_seed, train)
            y_shape = _probe_output_shape(net, x, rng_seed)
            targets = rng.normal(size=y_shape)
            label = f"{name}[{k}]"
            entries.append(_check_weights(label, net, x, targets, rng_seed,
                                          train, tolerance, eps))
            if check_inputs:
                entries.append(_check_input(label, net, x, targets, rng_seed,
                                            train, tolerance, eps))
        # full models, training mode with active dropout
        small = CvposnetConfig(n_inputs=6, conv_filters=3, conv_kernel=3,
                               dropout_p=0.2, lstm_units=4, output_dim=3)
        full = build_cvposnet(small)
        x = _draw_instance(full, (3, small.n_inputs), rng, rng_seed, True)
        targets = rng.normal(size=(3, small.output_dim))
        entries.append(_check_weights(f"cvposnet[{k}]", full, x, targets,
                                      rng_seed, True, tolerance, eps))
        mlp = build_dense_stack(5, (6, 6), 3)
        x = _draw_instance(mlp, (4, 5), rng, rng_seed, False)
        targets = rng.normal(size=(4, 3))
        entries.append(_check_weights(f"mlp[{k}]", mlp, x, targets,
                                      rng_seed, False, tolerance, eps))
    return GradientReport(entries)


def _probe_output_shape(net: Network, x, rng_seed: int):
    w = net.init_weights(np.random.default_rng(rng_seed))
    y = net.forward(w, x, train=False, rng=None)
    return y.shape
