"""Neural-network layers with hand-written forward/backward passes.

Layers are stateless: parameters arrive as a dict of named float64 arrays and
gradients leave the same way, so a whole model lives in one flat vector (see
``weights``). All math is 64-bit.

Weight matrices initialize from the uniform Glorot scheme
a = sqrt(6 / (fan_in + fan_out)); biases start at zero except the LSTM forget
gate, which starts at 1.
"""
from __future__ import annotations

import math

import numpy as np


def glorot_uniform(rng, shape, fan_in: int, fan_out: int) -> np.ndarray:
    a = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=shape)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _matmul2d(x, w):
    """(..., K) @ (K, N) as one 2-D GEMM; avoids numpy's batched-matmul path
    which runs one skinny GEMM per leading index."""
    if x.ndim == 2:
        return x @ w
    lead = x.shape[:-1]
    return (x.reshape(-1, x.shape[-1]) @ w).reshape(lead + (w.shape[1],))


class Layer:
    """Base layer: parameter specs plus pure forward/backward."""

    def param_specs(self) -> list:
        return []

    def init_params(self, rng) -> dict:
        return {}

    def forward(self, x, params, train: bool, rng):
        raise NotImplementedError

    def backward(self, dy, cache, params):
        raise NotImplementedError


class AddChannelAxis(Layer):
    """(B, T) -> (B, T, 1): a power vector becomes a 1-channel sequence."""

    def forward(self, x, params, train, rng):
        return x[:, :, None], None

    def backward(self, dy, cache, params):
        return dy[:, :, 0], {}


class Dense(Layer):
    def __init__(self, n_in: int, n_out: int):
        self.n_in, self.n_out = n_in, n_out

    def param_specs(self):
        return [("w", (self.n_in, self.n_out)), ("b", (self.n_out,))]

    def init_params(self, rng):
        return {
            "w": glorot_uniform(rng, (self.n_in, self.n_out), self.n_in, self.n_out),
            "b": np.zeros(self.n_out),
        }

    def forward(self, x, params, train, rng):
        return _matmul2d(x, params["w"]) + params["b"], x

    def backward(self, dy, cache, params):
        x = cache
        x2 = x.reshape(-1, self.n_in)
        dy2 = dy.reshape(-1, self.n_out)
        grads = {"w": x2.T @ dy2, "b": dy2.sum(axis=0)}
        return _matmul2d(dy, params["w"].T), grads


class Conv1d(Layer):
    """1-D convolution over the sequence axis with zero same-padding.

    Input (B, T, C_in) -> (B, T, C_out); odd kernel keeps padding symmetric.
    """

    def __init__(self, n_in: int, n_out: int, kernel: int):
        if kernel % 2 != 1:
            raise ValueError("conv kernel must be odd for symmetric same-padding")
        self.n_in, self.n_out, self.kernel = n_in, n_out, kernel

    def param_specs(self):
        return [("w", (self.kernel, self.n_in, self.n_out)), ("b", (self.n_out,))]

    def init_params(self, rng):
        fan_in = self.kernel * self.n_in
        fan_out = self.kernel * self.n_out
        return {
            "w": glorot_uniform(rng, (self.kernel, self.n_in, self.n_out),
                                fan_in, fan_out),
            "b": np.zeros(self.n_out),
        }

    def forward(self, x, params, train, rng):
        pad = (self.kernel - 1) // 2
        t = x.shape[1]
        xp = np.pad(x, ((0, 0), (pad, pad), (0, 0)))
        y = np.broadcast_to(params["b"], x.shape[:2] + (self.n_out,)).copy()
        for k in range(self.kernel):
            y += _matmul2d(np.ascontiguousarray(xp[:, k:k + t, :]),
                           params["w"][k])
        return y, xp

    def backward(self, dy, cache, params):
        xp = cache
        pad = (self.kernel - 1) // 2
        t = dy.shape[1]
        dw = np.empty_like(params["w"])
        dxp = np.zeros_like(xp)
        dy2 = dy.reshape(-1, self.n_out)
        for k in range(self.kernel):
            window = np.ascontiguousarray(xp[:, k:k + t, :])
            dw[k] = window.reshape(-1, self.n_in).T @ dy2
            dxp[:, k:k + t, :] += _matmul2d(dy, params["w"][k].T)
        grads = {"w": dw, "b": dy.sum(axis=(0, 1))}
        return dxp[:, pad:pad + t, :], grads


class Relu(Layer):
    def forward(self, x, params, train, rng):
        return np.maximum(x, 0.0), x

    def backward(self, dy, cache, params):
        return dy * (cache > 0.0), {}


class Tanh(Layer):
    def forward(self, x, params, train, rng):
        y = np.tanh(x)
        return y, y

    def backward(self, dy, cache, params):
        return dy * (1.0 - cache * cache), {}


class Dropout(Layer):
    """Inverted dropout: scales by 1/(1-p) in training, identity at inference."""

    def __init__(self, p: float):
        if not 0.0 <= p < 1.0:
            raise ValueError("dropout probability must lie in [0, 1)")
        self.p = p

    def forward(self, x, params, train, rng):
        if not train or self.p == 0.0:
            return x, None
        if rng is None:
            raise ValueError("dropout in training mode requires an rng")
        keep = rng.random(x.shape) >= self.p
        scale = 1.0 / (1.0 - self.p)
        return x * keep * scale, (keep, scale)

    def backward(self, dy, cache, params):
        if cache is None:
            return dy, {}
        keep, scale = cache
        return dy * keep * scale, {}


class LayerNorm(Layer):
    """Per-sample normalization to zero mean and unit std, learnable
    per-feature gain/bias.

    Statistics reduce over every non-batch axis, i.e. over the whole layer
    output for one sample. For sequence inputs this preserves the relative
    magnitude profile across steps (the across-anchor power pattern), which
    per-step normalization would destroy.
    """

    EPS = 1e-5

    def __init__(self, n_features: int):
        self.n_features = n_features

    def param_specs(self):
        return [("gain", (self.n_features,)), ("bias", (self.n_features,))]

    def init_params(self, rng):
        return {"gain": np.ones(self.n_features), "bias": np.zeros(self.n_features)}

    @staticmethod
    def normalize(x):
        axes = tuple(range(1, x.ndim))
        mu = x.mean(axis=axes, keepdims=True)
        xc = x - mu
        var = (xc * xc).mean(axis=axes, keepdims=True)
        inv = 1.0 / np.sqrt(var + LayerNorm.EPS)
        return xc * inv, inv

    def forward(self, x, params, train, rng):
        xhat, inv = self.normalize(x)
        return params["gain"] * xhat + params["bias"], (xhat, inv)

    def backward(self, dy, cache, params):
        xhat, inv = cache
        lead = tuple(range(dy.ndim - 1))
        grads = {"gain": (dy * xhat).sum(axis=lead), "bias": dy.sum(axis=lead)}
        dxhat = dy * params["gain"]
        axes = tuple(range(1, dy.ndim))
        n = 1
        for a in axes:
            n *= dy.shape[a]
        dx = inv / n * (
            n * dxhat
            - dxhat.sum(axis=axes, keepdims=True)
            - xhat * (dxhat * xhat).sum(axis=axes, keepdims=True)
        )
        return dx, grads


class Lstm(Layer):
    """Single LSTM layer consuming (B, T, C_in), returning the last hidden
    state (B, H).

    Gate order in the packed weight matrices is i, f, o, g: the three sigmoid
    gates form one contiguous block so each step needs a single exp. Only the
    recurrent matvec stays inside the step loop; input/recurrent weight
    gradients batch into one GEMM each over all steps.
    """

    def __init__(self, n_in: int, n_units: int, forget_bias: float = 1.0):
        self.n_in, self.n_units = n_in, n_units
        self.forget_bias = forget_bias

    def param_specs(self):
        h = self.n_units
        return [("wx", (self.n_in, 4 * h)), ("wh", (h, 4 * h)), ("b", (4 * h,))]

    def init_params(self, rng):
        h = self.n_units
        b = np.zeros(4 * h)
        b[h:2 * h] = self.forget_bias  # forget gate
        return {
            "wx": glorot_uniform(rng, (self.n_in, 4 * h), self.n_in, 4 * h),
            "wh": glorot_uniform(rng, (h, 4 * h), h, 4 * h),
            "b": b,
        }

    def forward(self, x, params, train, rng):
        batch, steps, _ = x.shape
        h_dim = self.n_units
        # time-major internals keep every per-step slice contiguous
        x_tm = np.ascontiguousarray(x.transpose(1, 0, 2))  # (T, B, C_in)
        pre = _matmul2d(x_tm, params["wx"])                # (T, B, 4H), one GEMM
        pre += params["b"]
        h = np.zeros((batch, h_dim))
        c = np.zeros((batch, h_dim))
        gates = np.empty((steps, batch, 4 * h_dim))  # i, f, o sigmoids | g tanh
        h_prev = np.empty((steps, batch, h_dim))
        c_prev = np.empty((steps, batch, h_dim))
        tanh_c = np.empty((steps, batch, h_dim))
        for t in range(steps):
            z = pre[t] + h @ params["wh"]
            g = gates[t]
            g[:, :3 * h_dim] = _sigmoid(z[:, :3 * h_dim])
            g[:, 3 * h_dim:] = np.tanh(z[:, 3 * h_dim:])
            h_prev[t] = h
            c_prev[t] = c
            c = g[:, h_dim:2 * h_dim] * c + g[:, :h_dim] * g[:, 3 * h_dim:]
            tc = np.tanh(c)
            tanh_c[t] = tc
            h = g[:, 2 * h_dim:3 * h_dim] * tc
        return h, (x_tm, gates, h_prev, c_prev, tanh_c)

    def backward(self, dy, cache, params):
        x_tm, gates, h_prev, c_prev, tanh_c = cache
        steps, batch, _ = x_tm.shape
        h_dim = self.n_units
        wh_t = params["wh"].T
        dz = np.empty_like(gates)
        dh = dy
        dc = np.zeros((batch, h_dim))
        for t in range(steps - 1, -1, -1):
            g = gates[t]
            gi = g[:, :h_dim]
            gf = g[:, h_dim:2 * h_dim]
            go = g[:, 2 * h_dim:3 * h_dim]
            gg = g[:, 3 * h_dim:]
            tc = tanh_c[t]
            d_go = dh * tc
            dc = dc + dh * go * (1.0 - tc * tc)
            z = dz[t]
            z[:, :h_dim] = dc * gg * gi * (1.0 - gi)
            z[:, h_dim:2 * h_dim] = dc * c_prev[t] * gf * (1.0 - gf)
            z[:, 2 * h_dim:3 * h_dim] = d_go * go * (1.0 - go)
            z[:, 3 * h_dim:] = dc * gi * (1.0 - gg * gg)
            dc = dc * gf  # flows to c_{t-1}
            dh = z @ wh_t
        flat_x = x_tm.reshape(steps * batch, -1)
        flat_h = h_prev.reshape(steps * batch, h_dim)
        flat_dz = dz.reshape(steps * batch, 4 * h_dim)
        grads = {
            "wx": flat_x.T @ flat_dz,
            "wh": flat_h.T @ flat_dz,
            "b": flat_dz.sum(axis=0),
        }
        dx_tm = _matmul2d(dz, params["wx"].T)  # (T, B, C_in)
        return np.ascontiguousarray(dx_tm.transpose(1, 0, 2)), grads
