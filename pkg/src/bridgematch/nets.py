"""A small numpy MLP endpoint predictor with hand-written backprop and Adam."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from bridgematch.core import RngStream, draw_uniform

ACTIVATIONS = ("tanh", "relu", "silu")
COND_MODES = ("none", "initial_point", "alpha_point")
CHECKPOINT_FORMAT = "bridgematch-checkpoint/1"


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return np.tanh(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "silu":
        return z * _sigmoid(z)
    raise ValueError(f"unknown activation {name!r}")


def _act_grad(name: str, z: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return 1.0 - np.tanh(z) ** 2
    if name == "relu":
        return (z > 0).astype(np.float64)
    if name == "silu":
        sig = _sigmoid(z)
        return sig * (1.0 + z * (1.0 - sig))
    raise ValueError(f"unknown activation {name!r}")


def cond_dim(cond_mode: str, dim: int) -> int:
    if cond_mode not in COND_MODES:
        raise ValueError(f"cond_mode must be one of {COND_MODES}, got {cond_mode!r}")
    return 0 if cond_mode == "none" else dim


def input_dim(dim: int, cond_mode: str, time_features: int) -> int:
    return dim + cond_dim(cond_mode, dim) + 1 + 2 * time_features


def cond_mode_for(cond_alpha: float) -> str:
    """Conditioning layout implied by a conditioning level in [0, 1]."""
    if cond_alpha == 1.0:
        return "none"
    if cond_alpha == 0.0:
        return "initial_point"
    return "alpha_point"


@dataclass
class MlpModel:
    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "silu"
    cond_mode: str = "none"
    time_features: int = 4
    cond_alpha: float = 1.0

    def __post_init__(self):
        self.layer_dims = [int(n) for n in self.layer_dims]
        validate_dims(self.layer_dims, self.cond_mode, self.time_features)
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")
        if len(self.weights) != len(self.layer_dims) - 1 or len(self.biases) != len(self.weights):
            raise ValueError("one weight matrix and one bias vector per layer")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            expected = (self.layer_dims[i + 1], self.layer_dims[i])
            if w.shape != expected or b.shape != (expected[0],):
                raise ValueError(f"layer {i}: got W{w.shape} b{b.shape}, expected W{expected}")

    @property
    def dim(self) -> int:
        return self.layer_dims[-1]

    @property
    def num_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def with_params(self, params: list[np.ndarray]) -> "MlpModel":
        return replace(self, weights=list(params[0::2]), biases=list(params[1::2]))

    def predict_batch(self, x_t: np.ndarray, cond: np.ndarray | None, t) -> np.ndarray:
        return _forward(self, build_inputs(self, x_t, cond, t))[0]


def validate_dims(layer_dims, cond_mode: str, time_features: int):
    if len(layer_dims) < 2 or any(n < 1 for n in layer_dims):
        raise ValueError(f"layer_dims needs >= 2 positive entries, got {layer_dims}")
    if time_features < 0:
        raise ValueError("time_features must be >= 0")
    d = layer_dims[-1]
    expected = input_dim(d, cond_mode, time_features)
    if layer_dims[0] != expected:
        raise ValueError(
            f"input width {layer_dims[0]} inconsistent with dim={d}, cond_mode={cond_mode!r}, "
            f"time_features={time_features} (expected {expected})"
        )


def time_embedding(t: np.ndarray, num_features: int) -> np.ndarray:
    """Rows ``[t, sin(2 pi k t), cos(2 pi k t)]`` for ``k = 1..num_features``."""
    t = np.asarray(t, dtype=np.float64).reshape(-1, 1)
    if num_features == 0:
        return t
    k = np.arange(1, num_features + 1, dtype=np.float64)
    angle = 2.0 * np.pi * t * k
    return np.concatenate([t, np.sin(angle), np.cos(angle)], axis=1)


def build_inputs(model: MlpModel, x_t, cond, t) -> np.ndarray:
    x_t = np.atleast_2d(np.asarray(x_t, dtype=np.float64))
    n, d = x_t.shape
    if d != model.dim:
        raise ValueError(f"state has dim {d}, model expects {model.dim}")
    t = np.broadcast_to(np.asarray(t, dtype=np.float64), (n,))
    parts = [x_t]
    if model.cond_mode == "none":
        if cond is not None:
            raise ValueError("model takes no conditioning vector but one was given")
    else:
        if cond is None:
            raise ValueError(f"model with cond_mode={model.cond_mode!r} needs a conditioning vector")
        cond = np.atleast_2d(np.asarray(cond, dtype=np.float64))
        if cond.shape != x_t.shape:
            raise ValueError(f"conditioning shape {cond.shape} does not match state {x_t.shape}")
        parts.append(cond)
    parts.append(time_embedding(t, model.time_features))
    return np.concatenate(parts, axis=1)


def _forward(model: MlpModel, inputs: np.ndarray):
    """Output plus the per-layer activation derivatives and layer inputs."""
    derivs, post = [], [inputs]
    h = inputs
    last = len(model.weights) - 1
    name = model.activation
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ w.T + b
        if i == last:
            h = z
        elif name == "silu":
            sig = _sigmoid(z)
            h = z * sig
            derivs.append(sig * (1.0 + z * (1.0 - sig)))
        elif name == "tanh":
            h = np.tanh(z)
            derivs.append(1.0 - h * h)
        else:
            h = _act(name, z)
            derivs.append(_act_grad(name, z))
        post.append(h)
    return h, derivs, post


def mlp_init(layer_dims, activation: str, cond_mode: str, time_features: int,
             stream: RngStream, cond_alpha: float | None = None) -> MlpModel:
    """Uniform fan-in init, ``W ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in))``, zero biases."""
    layer_dims = [int(n) for n in layer_dims]
    validate_dims(layer_dims, cond_mode, time_features)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        u = draw_uniform(stream, (fan_out, fan_in))
        weights.append((2.0 * u - 1.0) * bound)
        biases.append(np.zeros(fan_out))
    if cond_alpha is None:
        cond_alpha = {"none": 1.0, "initial_point": 0.0}.get(cond_mode)
        if cond_alpha is None:
            raise ValueError("alpha_point models need an explicit cond_alpha")
    return MlpModel(layer_dims, weights, biases, activation, cond_mode, time_features, float(cond_alpha))


def mlp_predict(model: MlpModel, x_t, cond, t) -> np.ndarray:
    """Endpoint prediction for a single state (1-D in, 1-D out) or a batch."""
    single = np.asarray(x_t).ndim == 1
    out = model.predict_batch(x_t, cond, t)
    return out[0] if single else out


def mlp_loss_grad(model: MlpModel, x_t, cond, t, target, weight=None):
    """Mean of ``weight * ||x1_hat - target||^2`` over the batch, and its gradient.

    Gradients come back as a list shaped like ``model.params()``.
    """
    inputs = build_inputs(model, x_t, cond, t)
    target = np.atleast_2d(np.asarray(target, dtype=np.float64))
    n = inputs.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    if target.shape != (n, model.dim):
        raise ValueError(f"target shape {target.shape}, expected {(n, model.dim)}")
    lam = np.ones(n) if weight is None else np.broadcast_to(np.asarray(weight, dtype=np.float64), (n,))

    out, derivs, post = _forward(model, inputs)
    resid = out - target
    per_item = lam * np.sum(resid**2, axis=1)
    loss = float(np.sum(per_item) / n)

    delta = (2.0 / n) * lam[:, None] * resid
    grads = [None] * (2 * len(model.weights))
    for i in range(len(model.weights) - 1, -1, -1):
        grads[2 * i] = delta.T @ post[i]
        grads[2 * i + 1] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i]) * derivs[i - 1]
    return loss, grads


@dataclass
class AdamState:
    first_moment: list[np.ndarray]
    second_moment: list[np.ndarray]
    step_count: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(model: MlpModel, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8) -> AdamState:
    zeros = [np.zeros_like(p) for p in model.params()]
    return AdamState(zeros, [z.copy() for z in zeros], 0, lr, beta1, beta2, eps)


def adam_step(model: MlpModel, state: AdamState, grads):
    params = model.params()
    if len(grads) != len(params) or len(state.first_moment) != len(params):
        raise ValueError("gradient / moment structure does not match the model")
    step = state.step_count + 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1**step
    corr2 = 1.0 - b2**step
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        m_hat = m / corr1
        v_hat = v / corr2
        new_params.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
        new_m.append(m)
        new_v.append(v)
    new_state = replace(state, first_moment=new_m, second_moment=new_v, step_count=step)
    return model.with_params(new_params), new_state


# -- checkpoints ------------------------------------------------------------


@dataclass
class Checkpoint:
    model: MlpModel
    sigma: float
    seed: int
    extra: dict = field(default_factory=dict)


def checkpoint_text(ckpt: Checkpoint) -> str:
    m = ckpt.model
    doc = {
        "format": CHECKPOINT_FORMAT,
        "layer_dims": m.layer_dims,
        "activation": m.activation,
        "cond_mode": m.cond_mode,
        "time_features": m.time_features,
        "sigma": float(ckpt.sigma),
        "cond_alpha": float(m.cond_alpha),
        "seed": int(ckpt.seed),
        # row-major flattening; json writes floats with repr, which round-trips exactly
        "layers": [
            {"weight": [float(x) for x in w.ravel(order="C")], "bias": [float(x) for x in b]}
            for w, b in zip(m.weights, m.biases)
        ],
        "extra": ckpt.extra,
    }
    return json.dumps(doc, indent=1) + "\n"


def save_checkpoint(path, ckpt: Checkpoint):
    Path(path).write_text(checkpoint_text(ckpt))


def load_checkpoint(path) -> Checkpoint:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: unsupported checkpoint format {doc.get('format')!r}")
    dims = [int(n) for n in doc["layer_dims"]]
    weights, biases = [], []
    for i, layer in enumerate(doc["layers"]):
        weights.append(np.asarray(layer["weight"], dtype=np.float64).reshape(dims[i + 1], dims[i]))
        biases.append(np.asarray(layer["bias"], dtype=np.float64))
    model = MlpModel(dims, weights, biases, doc["activation"], doc["cond_mode"],
                     int(doc["time_features"]), float(doc["cond_alpha"]))
    return Checkpoint(model, float(doc["sigma"]), int(doc["seed"]), doc.get("extra", {}))
