"""Minimal dense-network toolkit: init, forward/backward, losses, RMSProp.

Just enough machinery for the Q-network and the multi-task user model:
fully-connected layers with tanh/linear/sigmoid/softmax activations, exact
backprop (finite-difference checked in the tests), RMSProp updates, and a
bit-exact binary checkpoint format. float64 everywhere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("linear", "tanh", "sigmoid", "softmax")


@dataclass
class DenseNet:
    dims: list[int]
    activations: list[str]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def copy(self) -> "DenseNet":
        return DenseNet(
            dims=list(self.dims),
            activations=list(self.activations),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )

    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def all_finite(self) -> bool:
        return all(np.isfinite(w).all() and np.isfinite(b).all()
                   for w, b in zip(self.weights, self.biases))


def init_params(dims: list[int], seed: int, activations: list[str] | None = None,
                weight_init: str = "paper") -> DenseNet:
    """Zero-mean normal init; biases zero; deterministic for a given seed.

    weight_init="paper" uses variance sqrt(6/(d_row+d_col)) (the formula taken
    literally as a variance); "glorot" uses the conventional 2/(d_row+d_col).
    """
    if len(dims) < 2:
        raise ValueError("need at least input and output dims")
    if any(d <= 0 for d in dims):
        raise ValueError("dims must be positive")
    if activations is None:
        activations = ["tanh"] * (len(dims) - 2) + ["linear"]
    if len(activations) != len(dims) - 1:
        raise ValueError("one activation per layer expected")
    for act in activations:
        if act not in ACTIVATIONS:
            raise ValueError(f"unknown activation {act!r}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        if weight_init == "paper":
            var = np.sqrt(6.0 / (d_out + d_in))
        elif weight_init == "glorot":
            var = 2.0 / (d_out + d_in)
        else:
            raise ValueError(f"unknown weight_init {weight_init!r}")
        weights.append(rng.normal(0.0, np.sqrt(var), size=(d_out, d_in)))
        biases.append(np.zeros(d_out))
    return DenseNet(dims=list(dims), activations=list(activations), weights=weights, biases=biases)


def _apply(act: str, z: np.ndarray) -> np.ndarray:
    if act == "linear":
        return z
    if act == "tanh":
        return np.tanh(z)
    if act == "sigmoid":
        return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))
    if act == "softmax":
        shifted = z - z.max(axis=-1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=-1, keepdims=True)
    raise ValueError(act)


def forward(net: DenseNet, x: np.ndarray) -> tuple[np.ndarray, list]:
    """Run the net; accepts (d,) or (batch, d); returns (output, cache)."""
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    h = x.reshape(1, -1) if squeeze else x
    if h.shape[1] != net.dims[0]:
        raise ValueError(f"input dim {h.shape[1]} != {net.dims[0]}")
    cache = []
    for w, b, act in zip(net.weights, net.biases, net.activations):
        z = h @ w.T + b
        out = _apply(act, z)
        cache.append((h, out, act))
        h = out
    return (h[0] if squeeze else h), cache


def backward(net: DenseNet, cache: list, grad_out: np.ndarray) -> tuple[list, np.ndarray]:
    """Backprop a loss gradient w.r.t. the output; returns (grads, grad_input).

    grads is a list of (dW, db) matching the layer parameters; gradients sum
    over the batch (loss functions already carry any 1/batch factor).
    """
    grad = np.asarray(grad_out, dtype=float)
    squeeze = grad.ndim == 1
    if squeeze:
        grad = grad.reshape(1, -1)
    grads: list = [None] * len(net.weights)
    for i in range(len(net.weights) - 1, -1, -1):
        h_in, out, act = cache[i]
        if act == "linear":
            dz = grad
        elif act == "tanh":
            dz = grad * (1.0 - out * out)
        elif act == "sigmoid":
            dz = grad * out * (1.0 - out)
        elif act == "softmax":
            dz = out * (grad - (grad * out).sum(axis=-1, keepdims=True))
        else:
            raise ValueError(act)
        grads[i] = (dz.T @ h_in, dz.sum(axis=0))
        grad = dz @ net.weights[i]
    return grads, (grad[0] if squeeze else grad)


@dataclass
class OptimizerState:
    """RMSProp accumulators, one squared-gradient buffer per parameter array."""

    learning_rate: float = 5e-4
    decay: float = 0.9
    epsilon: float = 1e-8
    acc: list = field(default_factory=list)

    @classmethod
    def for_net(cls, net: DenseNet, learning_rate: float = 5e-4,
                decay: float = 0.9, epsilon: float = 1e-8) -> "OptimizerState":
        acc = [(np.zeros_like(w), np.zeros_like(b)) for w, b in zip(net.weights, net.biases)]
        return cls(learning_rate=learning_rate, decay=decay, epsilon=epsilon, acc=acc)


def rmsprop_step(net: DenseNet, grads: list, opt: OptimizerState) -> None:
    """In-place update: acc <- rho*acc + (1-rho)*g^2; p <- p - lr*g/(sqrt(acc)+eps)."""
    lr, rho, eps = opt.learning_rate, opt.decay, opt.epsilon
    for i, (dw, db) in enumerate(grads):
        aw, ab = opt.acc[i]
        aw *= rho
        aw += (1.0 - rho) * dw * dw
        ab *= rho
        ab += (1.0 - rho) * db * db
        net.weights[i] -= lr * dw / (np.sqrt(aw) + eps)
        net.biases[i] -= lr * db / (np.sqrt(ab) + eps)


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    diff = pred - target
    loss = float(np.mean(diff * diff))
    return loss, 2.0 * diff / diff.size


def cross_entropy_loss(probs: np.ndarray, target_idx: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean NLL of target classes under already-normalized probabilities."""
    probs = np.atleast_2d(np.asarray(probs, dtype=float))
    target_idx = np.atleast_1d(target_idx)
    n = probs.shape[0]
    picked = probs[np.arange(n), target_idx]
    loss = float(-np.mean(np.log(np.maximum(picked, 1e-12))))
    grad = np.zeros_like(probs)
    grad[np.arange(n), target_idx] = -1.0 / (np.maximum(picked, 1e-12) * n)
    return loss, grad


def bce_loss(p: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    p = np.asarray(p, dtype=float)
    target = np.asarray(target, dtype=float)
    q = np.clip(p, 1e-12, 1.0 - 1e-12)
    loss = float(-np.mean(target * np.log(q) + (1.0 - target) * np.log(1.0 - q)))
    grad = (q - target) / (q * (1.0 - q)) / q.size
    return loss, grad


def save_net(path, net: DenseNet, extra: dict | None = None) -> None:
    """JSON header line + flat little-endian float64 parameter arrays."""
    header = {"dims": net.dims, "activations": net.activations}
    if extra:
        header["extra"] = extra
    blob = b"".join(
        arr.astype("<f8").tobytes()
        for w, b in zip(net.weights, net.biases)
        for arr in (w, b)
    )
    with open(path, "wb") as f:
        f.write(json.dumps(header, sort_keys=True).encode())
        f.write(b"\n")
        f.write(blob)


def load_net(path) -> tuple[DenseNet, dict]:
    with open(path, "rb") as f:
        header = json.loads(f.readline().decode())
        blob = f.read()
    dims = header["dims"]
    flat = np.frombuffer(blob, dtype="<f8")
    weights, biases = [], []
    pos = 0
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        weights.append(flat[pos:pos + d_out * d_in].reshape(d_out, d_in).copy())
        pos += d_out * d_in
        biases.append(flat[pos:pos + d_out].copy())
        pos += d_out
    if pos != flat.size:
        raise ValueError("checkpoint size mismatch")
    net = DenseNet(dims=list(dims), activations=list(header["activations"]),
                   weights=weights, biases=biases)
    return net, header.get("extra", {})
