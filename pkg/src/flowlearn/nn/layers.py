"""Differentiable layers with explicit forward/backward passes.

Tensors are plain numpy arrays, rank <= 3, laid out batch x length x
channels. Every layer caches what its backward pass needs on forward and
overwrites its parameter gradients on backward; an optimizer reads them via
params()/grads(). Convolution is cross-correlation (deep-learning
convention). Training runs in float32, gradient checking in float64.
"""

from __future__ import annotations

import numpy as np


class ShapeMismatch(ValueError):
    pass


class BatchTooSmall(ValueError):
    pass


def glorot_uniform(rng, shape, fan_in, fan_out, dtype):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Layer:
    def params(self) -> list:
        return []

    def grads(self) -> list:
        return []

    def forward(self, x, train=False):
        raise NotImplementedError

    def backward(self, dy):
        raise NotImplementedError


class Conv1d(Layer):
    """1-D cross-correlation with zero padding.

    weights: [kernel, in_channels, out_channels];
    out_length = (in_length + 2*pad - kernel) // stride + 1.
    """

    def __init__(self, in_channels, out_channels, kernel=3, stride=1, pad=0,
                 rng=None, dtype=np.float32):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.stride = stride
        self.pad = pad
        rng = rng or np.random.default_rng(0)
        fan_in = kernel * in_channels
        fan_out = kernel * out_channels
        self.W = glorot_uniform(rng, (kernel, in_channels, out_channels),
                                fan_in, fan_out, dtype)
        self.b = np.zeros(out_channels, dtype=dtype)
        self.dW = np.zeros_like(self.W)
        self.db = np.zeros_like(self.b)

    def out_length(self, in_length: int) -> int:
        return (in_length + 2 * self.pad - self.kernel) // self.stride + 1

    def params(self):
        return [self.W, self.b]

    def grads(self):
        return [self.dW, self.db]

    def forward(self, x, train=False):
        if x.ndim != 3 or x.shape[2] != self.in_channels:
            raise ShapeMismatch(
                f"conv1d expects [batch, length, {self.in_channels}], "
                f"got {x.shape}")
        batch, length, _ = x.shape
        out_len = self.out_length(length)
        if out_len < 1:
            raise ShapeMismatch(f"input length {length} too short for "
                                f"kernel {self.kernel}/stride {self.stride}")
        xp = np.pad(x, ((0, 0), (self.pad, self.pad), (0, 0)))
        idx = (np.arange(out_len)[:, None] * self.stride
               + np.arange(self.kernel)[None, :])
        cols = xp[:, idx, :].reshape(batch, out_len,
                                     self.kernel * self.in_channels)
        y = cols @ self.W.reshape(-1, self.out_channels) + self.b
        self._cache = (x.shape, cols, idx)
        return y

    def backward(self, dy):
        (batch, length, _), cols, idx = self._cache
        w_flat = self.W.reshape(-1, self.out_channels)
        self.dW = np.einsum("boi,boc->ic", cols, dy).reshape(self.W.shape)
        self.db = dy.sum(axis=(0, 1))
        dcols = (dy @ w_flat.T).reshape(batch, -1, self.kernel,
                                        self.in_channels)
        dxp = np.zeros((batch, length + 2 * self.pad, self.in_channels),
                       dtype=dy.dtype)
        for j in range(self.kernel):
            dxp[:, idx[:, j], :] += dcols[:, :, j, :]
        return dxp[:, self.pad:self.pad + length, :]


class BatchNorm1d(Layer):
    """Per-channel batch normalization over (batch, length).

    Train mode uses batch statistics (population variance) and folds them
    into running estimates; inference uses the running estimates.
    """

    def __init__(self, channels, momentum=0.99, eps=1e-5, dtype=np.float32):
        self.channels = channels
        self.momentum = momentum
        self.eps = eps
        self.gamma = np.ones(channels, dtype=dtype)
        self.beta = np.zeros(channels, dtype=dtype)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.dgamma = np.zeros_like(self.gamma)
        self.dbeta = np.zeros_like(self.beta)

    def params(self):
        return [self.gamma, self.beta]

    def grads(self):
        return [self.dgamma, self.dbeta]

    def forward(self, x, train=False):
        if x.ndim != 3 or x.shape[2] != self.channels:
            raise ShapeMismatch(
                f"batchnorm expects [batch, length, {self.channels}], "
                f"got {x.shape}")
        if train:
            if x.shape[0] < 2:
                raise BatchTooSmall("training batch must hold >= 2 rows")
            mean = x.mean(axis=(0, 1))
            var = x.var(axis=(0, 1))
            m = self.momentum
            self.running_mean = (m * self.running_mean
                                 + (1 - m) * mean).astype(x.dtype)
            self.running_var = (m * self.running_var
                                + (1 - m) * var).astype(x.dtype)
        else:
            mean = self.running_mean
            var = self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean) * inv_std
        self._cache = (xhat, inv_std, train)
        return self.gamma * xhat + self.beta

    def backward(self, dy):
        xhat, inv_std, train = self._cache
        self.dgamma = (dy * xhat).sum(axis=(0, 1))
        self.dbeta = dy.sum(axis=(0, 1))
        dxhat = dy * self.gamma
        if not train:
            return dxhat * inv_std
        mean_dxhat = dxhat.mean(axis=(0, 1))
        mean_dxhat_xhat = (dxhat * xhat).mean(axis=(0, 1))
        return inv_std * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat)


class ReLU(Layer):
    def forward(self, x, train=False):
        self._mask = x > 0
        return np.where(self._mask, x, 0)

    def backward(self, dy):
        return dy * self._mask


class Dense(Layer):
    def __init__(self, in_features, out_features, rng=None, dtype=np.float32):
        self.in_features = in_features
        self.out_features = out_features
        rng = rng or np.random.default_rng(0)
        self.W = glorot_uniform(rng, (in_features, out_features),
                                in_features, out_features, dtype)
        self.b = np.zeros(out_features, dtype=dtype)
        self.dW = np.zeros_like(self.W)
        self.db = np.zeros_like(self.b)

    def params(self):
        return [self.W, self.b]

    def grads(self):
        return [self.dW, self.db]

    def forward(self, x, train=False):
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeMismatch(
                f"dense expects [batch, {self.in_features}], got {x.shape}")
        self._x = x
        return x @ self.W + self.b

    def backward(self, dy):
        self.dW = self._x.T @ dy
        self.db = dy.sum(axis=0)
        return dy @ self.W.T


class Flatten(Layer):
    def forward(self, x, train=False):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy):
        return dy.reshape(self._shape)


class Sequential(Layer):
    def __init__(self, layers):
        self.layers = list(layers)

    def params(self):
        return [p for layer in self.layers for p in layer.params()]

    def grads(self):
        return [g for layer in self.layers for g in layer.grads()]

    def forward(self, x, train=False):
        for layer in self.layers:
            x = layer.forward(x, train=train)
        return x

    def backward(self, dy):
        for layer in reversed(self.layers):
            dy = layer.backward(dy)
        return dy


def softmax(logits):
    # float64 normalization so probability rows sum to 1 within 1e-9
    shifted = logits.astype(np.float64)
    shifted -= shifted.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def softmax_xent(logits, targets, class_weights=None):
    """Mean cross-entropy over the batch with max-subtraction stabilization.

    Returns (loss, dlogits) where dlogits = (softmax - onehot) / batch,
    scaled per row by class_weights[target] when weights are given.
    """
    if logits.ndim != 2:
        raise ShapeMismatch(f"logits must be [batch, classes], "
                            f"got {logits.shape}")
    targets = np.asarray(targets)
    batch, n_classes = logits.shape
    if targets.shape != (batch,):
        raise ShapeMismatch(f"targets shape {targets.shape} does not match "
                            f"batch {batch}")
    if targets.size and (targets.min() < 0 or targets.max() >= n_classes):
        raise IndexError(f"target outside [0, {n_classes})")
    shifted = logits.astype(np.float64)
    shifted -= shifted.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(shifted).sum(axis=1))
    per_row = logsumexp - shifted[np.arange(batch), targets]
    probs = softmax(logits)
    dlogits = probs
    dlogits[np.arange(batch), targets] -= 1.0
    if class_weights is not None:
        weights = np.asarray(class_weights)[targets]
        per_row = per_row * weights
        dlogits = dlogits * weights[:, None]
    loss = float(per_row.sum() / batch)
    dlogits = (dlogits / batch).astype(logits.dtype)
    return loss, dlogits
