"""Fully connected Q-value network with rectifier hidden layers, MSE loss and Adam.

Parameters are float64 numpy arrays; weights are stored ``(fan_in, fan_out)``
so a batch ``X @ W + b`` runs row-wise.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError

HIDDEN = (128, 128)
CHECKPOINT_VERSION = 1


class MLP:
    def __init__(self, layer_dims, weights, biases):
        self.layer_dims = [int(d) for d in layer_dims]
        self.weights = list(weights)
        self.biases = list(biases)
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.layer_dims[i], self.layer_dims[i + 1]) or b.shape != (self.layer_dims[i + 1],):
                raise ValidationError(f"layer {i} parameter shapes inconsistent with {self.layer_dims}")

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "MLP":
        return MLP(self.layer_dims, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def load_from(self, other: "MLP") -> None:
        for dst, src in zip(self.params(), other.params()):
            dst[...] = src


@dataclass
class AdamState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon_stability: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_network(cls, net: MLP, **hyper) -> "AdamState":
        st = cls(**hyper)
        st.m = [np.zeros_like(p) for p in net.params()]
        st.v = [np.zeros_like(p) for p in net.params()]
        return st

    def copy(self) -> "AdamState":
        return AdamState(self.learning_rate, self.beta1, self.beta2, self.epsilon_stability, self.t,
                         [a.copy() for a in self.m], [a.copy() for a in self.v])


def init_scale(fan_in: int) -> float:
    """Half-width of the He-style uniform initialization for a layer."""
    return float(np.sqrt(6.0 / fan_in))


def init_network(input_dim: int, seed: int = 0, hidden=HIDDEN) -> MLP:
    if int(input_dim) < 1:
        raise ValidationError(f"input_dim must be >= 1, got {input_dim!r}")
    dims = [int(input_dim), *[int(h) for h in hidden], 1]
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        lim = init_scale(fan_in)
        weights.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MLP(dims, weights, biases)


def _check_input(net: MLP, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != net.input_dim:
        raise ValidationError(f"expected input of width {net.input_dim}, got {X.shape[-1]}")
    return X


def _forward_from(net: MLP, h: np.ndarray, start: int) -> np.ndarray:
    """Continue a forward pass given pre-activations of layer ``start``."""
    last = len(net.weights) - 1
    for i in range(start, len(net.weights)):
        if i > start:
            h = h @ net.weights[i] + net.biases[i]
        if i < last:
            h = np.maximum(h, 0.0)
    return h[..., 0]


def forward_batch(net: MLP, X) -> np.ndarray:
    X = _check_input(net, np.atleast_2d(X))
    return _forward_from(net, X @ net.weights[0] + net.biases[0], 0)


def forward(net: MLP, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValidationError("forward expects a single 1-D input vector")
    return float(forward_batch(net, x)[0])


def forward_split(net: MLP, prefix: np.ndarray, suffixes: np.ndarray) -> np.ndarray:
    """Outputs for inputs ``concat(prefix, suffixes[k])`` for every row k.

    Shares the prefix's first-layer product across rows.
    """
    k = prefix.shape[-1]
    if k + suffixes.shape[-1] != net.input_dim:
        raise ValidationError("prefix + suffix width does not match network input")
    w0 = net.weights[0]
    pre = (prefix @ w0[:k] + net.biases[0]) + suffixes @ w0[k:]
    return _forward_from(net, pre, 0)


def loss_and_grads(net: MLP, X, y):
    """Mean squared error over the batch and its exact parameter gradients.

    Gradients are returned in ``net.params()`` order.
    """
    X = _check_input(net, np.atleast_2d(X))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    n = X.shape[0]
    acts = [X]
    pres = []
    h = X
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w + b
        pres.append(z)
        h = np.maximum(z, 0.0) if i < last else z
        acts.append(h)
    pred = h[:, 0]
    err = pred - y
    loss = float(np.mean(err ** 2))
    delta = (2.0 / n) * err[:, None]
    grads = [None] * (2 * len(net.weights))
    for i in range(last, -1, -1):
        grads[2 * i] = acts[i].T @ delta
        grads[2 * i + 1] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ net.weights[i].T) * (pres[i - 1] > 0)
    return loss, grads


def adam_step(net: MLP, adam: AdamState, grads) -> None:
    if not adam.m:
        adam.m = [np.zeros_like(p) for p in net.params()]
        adam.v = [np.zeros_like(p) for p in net.params()]
    adam.t += 1
    b1, b2 = adam.beta1, adam.beta2
    c1 = 1.0 - b1 ** adam.t
    c2 = 1.0 - b2 ** adam.t
    for p, g, m, v in zip(net.params(), grads, adam.m, adam.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= adam.learning_rate * (m / c1) / (np.sqrt(v / c2) + adam.epsilon_stability)


def train_batch(net: MLP, adam: AdamState, batch) -> float:
    """One Adam step on the batch MSE; returns the loss before the step.

    ``batch`` is either a list of ``(x, target)`` pairs or an ``(X, y)`` tuple
    of arrays.
    """
    if isinstance(batch, tuple) and len(batch) == 2 and np.ndim(batch[0]) == 2:
        X, y = batch
    else:
        if len(batch) == 0:
            raise ValidationError("train_batch needs a non-empty batch")
        X = np.stack([np.asarray(x, dtype=np.float64) for x, _ in batch])
        y = np.array([t for _, t in batch], dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(y) == 0:
        raise ValidationError("train_batch needs a non-empty batch")
    if not np.all(np.isfinite(y)):
        raise ValidationError("non-finite training target")
    loss, grads = loss_and_grads(net, X, y)
    adam_step(net, adam, grads)
    return loss


def save_checkpoint(path, net: MLP, adam: AdamState | None = None, **extra) -> None:
    """Write dims, parameters and optimizer state to an ``.npz`` archive.

    ``extra`` arrays (or scalars) are stored under an ``extra_`` prefix.
    """
    arrays = {
        "format_version": np.array(CHECKPOINT_VERSION),
        "layer_dims": np.array(net.layer_dims, dtype=np.int64),
    }
    for i, p in enumerate(net.params()):
        arrays[f"param_{i}"] = p
    if adam is not None:
        arrays["adam_hyper"] = np.array([adam.learning_rate, adam.beta1, adam.beta2, adam.epsilon_stability])
        arrays["adam_t"] = np.array(adam.t, dtype=np.int64)
        for i, (m, v) in enumerate(zip(adam.m, adam.v)):
            arrays[f"adam_m_{i}"] = m
            arrays[f"adam_v_{i}"] = v
    for k, v in extra.items():
        arrays[f"extra_{k}"] = np.asarray(v)
    with open(Path(path), "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path):
    """Inverse of :func:`save_checkpoint`; returns ``(net, adam_or_None, extra)``."""
    with np.load(Path(path)) as z:
        version = int(z["format_version"])
        if version != CHECKPOINT_VERSION:
            raise ValidationError(f"unsupported checkpoint version {version}")
        dims = [int(d) for d in z["layer_dims"]]
        n_layers = len(dims) - 1
        params = [z[f"param_{i}"].copy() for i in range(2 * n_layers)]
        net = MLP(dims, params[0::2], params[1::2])
        adam = None
        if "adam_hyper" in z:
            lr, b1, b2, eps = (float(x) for x in z["adam_hyper"])
            adam = AdamState(lr, b1, b2, eps, int(z["adam_t"]))
            if "adam_m_0" in z:
                adam.m = [z[f"adam_m_{i}"].copy() for i in range(2 * n_layers)]
                adam.v = [z[f"adam_v_{i}"].copy() for i in range(2 * n_layers)]
        extra = {k[len("extra_"):]: z[k].copy() for k in z.files if k.startswith("extra_")}
    return net, adam, extra
