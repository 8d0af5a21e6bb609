"""Fully connected deep interval neural network."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import List

import numpy as np

from . import _rounding as R
from .exceptions import BadCheckpoint, ShapeMismatch, TraceMismatch
from .interval import Interval
from .tensor import IntervalTensor, from_real, matmul

ACTIVATIONS = ("relu", "identity")
REG_KINDS = ("none", "l1", "l2")


@dataclass(frozen=True)
class DinnLayer:
    weights: IntervalTensor  # [fan_in, fan_out]
    bias: IntervalTensor  # [fan_out]
    activation: str = "relu"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[1],):
            raise ShapeMismatch(
                f"weights {self.weights.shape} and bias {self.bias.shape} do not match")

    @property
    def fan_in(self):
        return self.weights.shape[0]

    @property
    def fan_out(self):
        return self.weights.shape[1]


@dataclass(frozen=True)
class DinnModel:
    layers: tuple
    reg_kind: str = "none"
    reg_strength: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ValueError("a model needs at least one layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.fan_out != nxt.fan_in:
                raise ShapeMismatch(f"layer widths do not chain: {prev.fan_out} -> {nxt.fan_in}")
        if self.layers[-1].activation != "identity":
            raise ValueError("the output layer must be affine (identity activation)")
        if self.reg_kind not in REG_KINDS:
            raise ValueError(f"unknown regularizer {self.reg_kind!r}")
        if not (np.isfinite(self.reg_strength) and self.reg_strength >= 0):
            raise ValueError("regularization strength must be finite and >= 0")

    @property
    def sizes(self) -> list:
        return [self.layers[0].fan_in] + [l.fan_out for l in self.layers]

    def with_params(self, params) -> "DinnModel":
        """New model with ``params = [(W, b), ...]`` and the same configuration."""
        layers = [DinnLayer(w, b, l.activation) for (w, b), l in zip(params, self.layers)]
        return DinnModel(layers, self.reg_kind, self.reg_strength)

    def params(self) -> list:
        return [(l.weights, l.bias) for l in self.layers]

    def is_degenerate(self) -> bool:
        return all(l.weights.is_degenerate() and l.bias.is_degenerate() for l in self.layers)

    def to_dict(self) -> dict:
        return {
            "layers": [{"weights": l.weights.to_dict(), "bias": l.bias.to_dict(),
                        "activation": l.activation} for l in self.layers],
            "config": {"reg_kind": self.reg_kind, "reg_strength": self.reg_strength},
        }

    @classmethod
    def from_dict(cls, d) -> "DinnModel":
        try:
            layers = [DinnLayer(IntervalTensor.from_dict(l["weights"]),
                                IntervalTensor.from_dict(l["bias"]),
                                l.get("activation", "relu")) for l in d["layers"]]
            cfg = d.get("config", {})
            return cls(layers, cfg.get("reg_kind", "none"), float(cfg.get("reg_strength", 0.0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise BadCheckpoint(f"malformed model checkpoint: {exc}") from exc


def save_model(model: DinnModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(model.to_dict(), fh)


def load_model(path) -> DinnModel:
    try:
        with open(path) as fh:
            d = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise BadCheckpoint(f"cannot read checkpoint {path}: {exc}") from exc
    return DinnModel.from_dict(d)


@dataclass
class ForwardTrace:
    inputs: IntervalTensor
    pre: List[IntervalTensor] = field(default_factory=list)
    post: List[IntervalTensor] = field(default_factory=list)

    @property
    def prediction(self) -> IntervalTensor:
        return self.post[-1]


def _activate(z: IntervalTensor, activation: str) -> IntervalTensor:
    return z.relu() if activation == "relu" else z


def forward(model: DinnModel, x: IntervalTensor) -> ForwardTrace:
    """Propagate a batch ``x`` of shape ``[B, d]`` through the network."""
    if not isinstance(x, IntervalTensor):
        x = from_real(x)
    if x.ndim != 2 or x.shape[1] != model.layers[0].fan_in:
        raise ShapeMismatch(f"input shape {x.shape} does not fit fan_in {model.layers[0].fan_in}")
    trace = ForwardTrace(inputs=x)
    a = x
    for layer in model.layers:
        z = matmul(a, layer.weights) + layer.bias
        a = _activate(z, layer.activation)
        trace.pre.append(z)
        trace.post.append(a)
    return trace


def predict(model: DinnModel, x, batch_size=1024) -> IntervalTensor:
    """Prediction only, evaluated in chunks; returns shape ``[n]`` for scalar outputs."""
    if not isinstance(x, IntervalTensor):
        x = from_real(x)
    los, his = [], []
    for s in range(0, x.shape[0], batch_size):
        out = forward(model, x[s:s + batch_size]).prediction
        los.append(out.lo)
        his.append(out.hi)
    out = IntervalTensor(np.concatenate(los), np.concatenate(his), check=False)
    if out.shape[1] == 1:
        out = out.reshape(-1)
    return out


def _flat_pred(prediction: IntervalTensor, targets: IntervalTensor) -> IntervalTensor:
    if prediction.ndim == 2 and prediction.shape[1] == 1 and targets.ndim == 1:
        prediction = prediction.reshape(-1)
    if prediction.shape != targets.shape:
        raise ShapeMismatch(f"prediction {prediction.shape} vs targets {targets.shape}")
    return prediction


def data_loss(prediction: IntervalTensor, targets: IntervalTensor) -> Interval:
    """Interval ``(1/2B) * sum(sqr(pred - y))``; each term is scaled before summing."""
    pred = _flat_pred(prediction, targets)
    b = pred.shape[0]
    terms = (pred - targets).sqr() / float(2 * b)
    return terms.sum()[()]


def regularizer(model: DinnModel, kind=None) -> Interval:
    """L1 or L2 penalty of all weight matrices (biases excluded)."""
    kind = model.reg_kind if kind is None else kind
    total = IntervalTensor(0.0)
    if kind == "none":
        return total[()]
    for layer in model.layers:
        w = layer.weights
        part = w.abs().sum() if kind == "l1" else w.sqr().sum()
        total = total + part
    return total[()]


def loss(prediction: IntervalTensor, targets: IntervalTensor, model: DinnModel) -> Interval:
    """Data loss plus ``reg_strength * regularizer`` when configured."""
    value = data_loss(prediction, targets)
    if model.reg_kind != "none" and model.reg_strength > 0:
        value = value + regularizer(model) * model.reg_strength
    return value


def relu_deriv(z):
    """Interval subderivative of ReLU (derivative at 0 taken as 0)."""
    if isinstance(z, Interval):
        if z.lo > 0:
            return Interval(1.0, 1.0)
        if z.hi <= 0:
            return Interval(0.0, 0.0)
        return Interval(0.0, 1.0)
    lo = (z.lo > 0).astype(np.float64)
    hi = (z.hi > 0).astype(np.float64)
    return IntervalTensor(lo, hi, check=False)


def _sign_interval(w: IntervalTensor) -> IntervalTensor:
    lo = np.where(w.lo > 0, 1.0, -1.0)
    hi = np.where(w.hi < 0, -1.0, 1.0)
    return IntervalTensor(lo, hi, check=False)


def reg_gradient(w: IntervalTensor, kind: str, strength: float):
    if kind == "none" or strength == 0:
        return None
    if kind == "l2":
        return w * (2.0 * strength)
    return _sign_interval(w) * float(strength)


def backward(model: DinnModel, trace: ForwardTrace, targets: IntervalTensor) -> list:
    """Interval gradients ``[(gradW, gradB), ...]`` of :func:`loss`, one per layer."""
    if len(trace.pre) != len(model.layers) or len(trace.post) != len(model.layers):
        raise TraceMismatch("trace does not belong to this model")
    for layer, z in zip(model.layers, trace.pre):
        if z.ndim != 2 or z.shape[1] != layer.fan_out:
            raise TraceMismatch("trace shapes do not match the model")
    if trace.inputs.shape[1] != model.layers[0].fan_in:
        raise TraceMismatch("trace input does not match the model")
    pred = _flat_pred(trace.prediction, targets)
    b = pred.shape[0]
    delta = ((pred - targets) / float(b)).reshape(b, 1)
    if model.layers[-1].activation == "relu":
        delta = delta * relu_deriv(trace.pre[-1])

    grads = [None] * len(model.layers)
    for idx in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[idx]
        a_prev = trace.inputs if idx == 0 else trace.post[idx - 1]
        grad_w = matmul(a_prev.T, delta)
        rg = reg_gradient(layer.weights, model.reg_kind, model.reg_strength)
        if rg is not None:
            grad_w = grad_w + rg
        grad_b = delta.sum(axis=0)
        grads[idx] = (grad_w, grad_b)
        if idx > 0:
            delta = matmul(delta, layer.weights.T)
            if model.layers[idx - 1].activation == "relu":
                delta = delta * relu_deriv(trace.pre[idx - 1])
    return grads


def lipschitz_bound(model: DinnModel) -> float:
    """Width-propagation constant of the network.

    For each layer the induced infinity norm of the magnitude matrix is
    ``max_j sum_i mag(W[i, j])`` (outputs indexed by columns), accumulated
    with upward rounding; ReLU contributes a factor of one.  For degenerate
    weights, ``max w(output) <= L * max w(input)``.  Interval weights add a
    width term proportional to ``|input|`` that no constant can bound.
    """
    bound = 1.0
    for layer in model.layers:
        mags = layer.weights.mag()
        col = max(R.k_sum_up(np.ascontiguousarray(mags[:, j])) for j in range(mags.shape[1]))
        bound = R.mul_ru(bound, col)
    return float(bound)
