"""Dense feedforward network: forward, backprop, Adam, softmax cross-entropy.

Hidden layers apply one shared activation chosen by an ActivationSpec; the
output layer is always softmax.  No gradient clipping anywhere: exploding
runs must be observable, and they surface as a TrainingDiverged error.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from zorro.activations import ActivationSpec, DomainError, derivative, evaluate, parse_spec
from zorro.data import Dataset

__all__ = [
    "DenseNet",
    "TrainConfig",
    "TrainHistory",
    "TrainingDiverged",
    "AdamState",
    "init_net",
    "forward",
    "softmax",
    "cross_entropy",
    "backward",
    "adam_init",
    "adam_step",
    "train",
    "evaluate_net",
    "save_checkpoint",
    "load_checkpoint",
]

_CHECKPOINT_MAGIC = b"ZNET"
_CHECKPOINT_VERSION = 1


class TrainingDiverged(RuntimeError):
    """Raised when a training step produces a non-finite loss (exploding run)."""


@dataclass
class DenseNet:
    layer_dims: list
    weights: list
    biases: list
    hidden_activation: ActivationSpec


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 15
    batch_size: int = 1024
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be >= 0")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise ValueError("adam betas must lie in (0, 1)")
        if not self.adam_eps > 0:
            raise ValueError("adam_eps must be > 0")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("bad epochs/batch_size")


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    train_acc: list = field(default_factory=list)
    val_acc: list = field(default_factory=list)


def init_net(layer_dims, activation: ActivationSpec, seed: int) -> DenseNet:
    """Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases."""
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2:
        raise ValueError("need at least input and output dims")
    if any(d < 1 for d in dims):
        raise ValueError("layer widths must be positive")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return DenseNet(dims, weights, biases, activation)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax, shifted by the row max so rows sum to 1 exactly-ish."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean categorical cross-entropy, fused with log-sum-exp."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    return float(np.mean(lse - shifted[np.arange(len(labels)), labels]))


def forward(net: DenseNet, batch: np.ndarray):
    """Return (logits, cache); cache holds what backward needs."""
    batch = np.asarray(batch, dtype=float)
    if batch.ndim != 2 or batch.shape[1] != net.layer_dims[0]:
        raise ValueError(f"batch must be (N, {net.layer_dims[0]})")
    activations = [batch]
    zs = []
    a = batch
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        z = a @ w + b
        zs.append(z)
        a = evaluate(net.hidden_activation, z)
        activations.append(a)
    logits = a @ net.weights[-1] + net.biases[-1]
    return logits, (zs, activations, logits)


def backward(net: DenseNet, cache, labels: np.ndarray):
    """Gradients of mean cross-entropy w.r.t. every weight and bias."""
    zs, activations, logits = cache
    labels = np.asarray(labels)
    n = len(labels)
    if labels.min() < 0 or labels.max() >= net.layer_dims[-1]:
        raise ValueError("label out of range for the output layer")
    delta = softmax(logits)
    delta[np.arange(n), labels] -= 1.0
    delta /= n
    grads_w = [None] * len(net.weights)
    grads_b = [None] * len(net.biases)
    for layer in range(len(net.weights) - 1, -1, -1):
        grads_w[layer] = activations[layer].T @ delta
        grads_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ net.weights[layer].T) * derivative(
                net.hidden_activation, zs[layer - 1])
    return grads_w, grads_b


@dataclass
class AdamState:
    m_w: list
    v_w: list
    m_b: list
    v_b: list
    step: int = 0


def adam_init(net: DenseNet) -> AdamState:
    return AdamState(
        [np.zeros_like(w) for w in net.weights],
        [np.zeros_like(w) for w in net.weights],
        [np.zeros_like(b) for b in net.biases],
        [np.zeros_like(b) for b in net.biases],
    )


def adam_step(net: DenseNet, state: AdamState, grads, config: TrainConfig) -> None:
    """Standard bias-corrected Adam update, in place."""
    grads_w, grads_b = grads
    state.step += 1
    t = state.step
    b1, b2 = config.adam_beta1, config.adam_beta2
    corr1 = 1.0 - b1 ** t
    corr2 = 1.0 - b2 ** t
    for params, gs, ms, vs in (
        (net.weights, grads_w, state.m_w, state.v_w),
        (net.biases, grads_b, state.m_b, state.v_b),
    ):
        for p, g, m, v in zip(params, gs, ms, vs):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= config.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + config.adam_eps)


def train(net: DenseNet, train_set: Dataset, val_set: Dataset,
          config: TrainConfig) -> tuple:
    """Seeded mini-batch training; records per-epoch loss and accuracies.

    The last partial batch is trained, not dropped.  A non-finite batch
    loss aborts with TrainingDiverged.
    """
    if len(train_set) == 0 or len(val_set) == 0:
        raise ValueError("datasets must be nonempty")
    if train_set.class_count != net.layer_dims[-1]:
        raise ValueError("class count must match the output width")
    rng = np.random.default_rng(config.seed)
    state = adam_init(net)
    history = TrainHistory()
    x, y = train_set.features, train_set.labels
    n = len(train_set)
    for epoch in range(config.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = perm[start:start + config.batch_size]
            try:
                logits, cache = forward(net, x[idx])
            except DomainError:
                raise TrainingDiverged(
                    f"non-finite pre-activations at epoch {epoch + 1}")
            loss = cross_entropy(logits, y[idx])
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss {loss} at epoch {epoch + 1}")
            grads = backward(net, cache, y[idx])
            adam_step(net, state, grads, config)
        train_acc, train_loss = evaluate_net(net, train_set)
        val_acc, _ = evaluate_net(net, val_set)
        if not np.isfinite(train_loss):
            raise TrainingDiverged(f"non-finite epoch loss at epoch {epoch + 1}")
        history.train_loss.append(train_loss)
        history.train_acc.append(train_acc)
        history.val_acc.append(val_acc)
    return net, history


def evaluate_net(net: DenseNet, ds: Dataset, chunk: int = 4096) -> tuple:
    """(accuracy, mean cross-entropy); argmax ties go to the lowest class."""
    if len(ds) == 0:
        raise ValueError("dataset must be nonempty")
    correct = 0
    loss_sum = 0.0
    for start in range(0, len(ds), chunk):
        xs = ds.features[start:start + chunk]
        ys = ds.labels[start:start + chunk]
        try:
            logits, _ = forward(net, xs)
        except DomainError:
            return 0.0, float("inf")
        correct += int((logits.argmax(axis=1) == ys).sum())
        loss_sum += cross_entropy(logits, ys) * len(ys)
    return correct / len(ds), loss_sum / len(ds)


def save_checkpoint(net: DenseNet, path) -> None:
    """Versioned binary container: JSON header + little-endian f64 arrays."""
    header = json.dumps({
        "layer_dims": net.layer_dims,
        "hidden_activation": str(net.hidden_activation),
    }).encode()
    with open(path, "wb") as f:
        f.write(_CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", _CHECKPOINT_VERSION))
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        for w in net.weights:
            f.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
        for b in net.biases:
            f.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_checkpoint(path) -> DenseNet:
    with open(path, "rb") as f:
        if f.read(4) != _CHECKPOINT_MAGIC:
            raise ValueError("not a network checkpoint")
        (version,) = struct.unpack("<I", f.read(4))
        if version != _CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        (hlen,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(hlen).decode())
        dims = [int(d) for d in header["layer_dims"]]
        spec = parse_spec(header["hidden_activation"])
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            raw = f.read(8 * fan_in * fan_out)
            weights.append(np.frombuffer(raw, dtype="<f8").reshape(fan_in, fan_out).copy())
        for fan_out in dims[1:]:
            biases.append(np.frombuffer(f.read(8 * fan_out), dtype="<f8").copy())
        if f.read(1):
            raise ValueError("trailing bytes in checkpoint")
    return DenseNet(dims, weights, biases, spec)
