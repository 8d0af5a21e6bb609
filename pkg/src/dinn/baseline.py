"""Real-valued MLP: reference for the interval network, warm starts and the
Monte Carlo dropout baseline."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import BadCheckpoint, ShapeMismatch
from .tensor import IntervalTensor


@dataclass
class RealModel:
    weights: list  # [fan_in, fan_out] arrays
    biases: list
    activations: list
    dropout_p: float = 0.0

    def __post_init__(self):
        if not 0 <= self.dropout_p < 1:
            raise ValueError("dropout probability must lie in [0, 1)")
        for w, nxt in zip(self.weights, self.weights[1:]):
            if w.shape[1] != nxt.shape[0]:
                raise ShapeMismatch("layer widths do not chain")

    @classmethod
    def init(cls, sizes, rng, dropout_p=0.0, scale=1.0):
        ws, bs, acts = [], [], []
        for i, (a, b) in enumerate(zip(sizes, sizes[1:])):
            ws.append(rng.normal(0.0, math.sqrt(2.0 / a), size=(a, b)) * scale)
            bs.append(np.zeros(b))
            acts.append("identity" if i == len(sizes) - 2 else "relu")
        return cls(ws, bs, acts, dropout_p)

    def copy(self):
        return RealModel([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                         list(self.activations), self.dropout_p)

    def forward(self, x, rng=None, cache=False):
        """Forward pass; dropout is active only when ``rng`` is given."""
        x = np.asarray(x, dtype=np.float64)
        acts, pres, masks = [x], [], []
        a = x
        n = len(self.weights)
        for i, (w, b, act) in enumerate(zip(self.weights, self.biases, self.activations)):
            z = a @ w + b
            a = np.maximum(z, 0.0) if act == "relu" else z
            mask = None
            if rng is not None and self.dropout_p > 0 and i < n - 1:
                keep = 1.0 - self.dropout_p
                mask = (rng.random(a.shape) < keep) / keep
                a = a * mask
            pres.append(z)
            acts.append(a)
            masks.append(mask)
        if cache:
            return a, (acts, pres, masks)
        return a

    def predict(self, x):
        out = self.forward(x)
        return out[:, 0] if out.shape[1] == 1 else out

    def to_dict(self) -> dict:
        """Same layout as a DINN checkpoint, with degenerate intervals."""
        def t(arr):
            return IntervalTensor(arr, arr).to_dict()
        return {"layers": [{"weights": t(w), "bias": t(b), "activation": a}
                           for w, b, a in zip(self.weights, self.biases, self.activations)],
                "config": {"reg_kind": "none", "reg_strength": 0.0,
                           "dropout_p": self.dropout_p}}

    @classmethod
    def from_dict(cls, d) -> "RealModel":
        """Load a checkpoint; interval entries are replaced by their midpoints."""
        try:
            ws, bs, acts = [], [], []
            for l in d["layers"]:
                ws.append(IntervalTensor.from_dict(l["weights"]).midpoints())
                bs.append(IntervalTensor.from_dict(l["bias"]).midpoints())
                acts.append(l.get("activation", "relu"))
            return cls(ws, bs, acts, float(d.get("config", {}).get("dropout_p", 0.0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise BadCheckpoint(f"malformed checkpoint: {exc}") from exc

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                return cls.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise BadCheckpoint(str(exc)) from exc


def loss_and_grads(model: RealModel, x, y, reg_kind="none", reg_strength=0.0, rng=None):
    """Loss ``(1/2B) sum r^2 + lambda * Omega(W)`` and its gradients.

    ReLU'(0) is taken as 0 and sign(0) as 0 for the L1 term.
    """
    y = np.asarray(y, dtype=np.float64).reshape(-1, 1)
    out, (acts, pres, masks) = model.forward(x, rng=rng, cache=True)
    b = out.shape[0]
    r = out - y
    value = float(np.sum(r * r) / (2 * b))
    if reg_kind == "l2":
        value += reg_strength * sum(float(np.sum(w * w)) for w in model.weights)
    elif reg_kind == "l1":
        value += reg_strength * sum(float(np.sum(np.abs(w))) for w in model.weights)
    delta = r / b
    grads = [None] * len(model.weights)
    for i in range(len(model.weights) - 1, -1, -1):
        if masks[i] is not None:
            delta = delta * masks[i]
        if model.activations[i] == "relu":
            delta = delta * (pres[i] > 0)
        gw = acts[i].T @ delta
        if reg_kind == "l2":
            gw = gw + 2.0 * reg_strength * model.weights[i]
        elif reg_kind == "l1":
            gw = gw + reg_strength * np.sign(model.weights[i])
        grads[i] = (gw, delta.sum(axis=0))
        delta = delta @ model.weights[i].T
    return value, grads


@dataclass
class TrainConfig:
    hidden: tuple = (64, 64, 64)
    epochs: int = 100
    batch_size: int = 64
    lr: float = 1e-3
    optimizer: str = "adam"  # adam | sgd
    dropout_p: float = 0.0
    jitter_sigma: float = 0.0
    seed: int = 0
    init_scale: float = 1.0
    reg_kind: str = "none"  # none | l1 | l2
    reg_strength: float = 0.0


def train_real(x, y, config: TrainConfig = None) -> RealModel:
    """Mini-batch training on real inputs (midpoints of an interval dataset).

    With ``jitter_sigma > 0`` fresh Gaussian noise is added to the inputs of
    every batch; dropout is active during training when ``dropout_p > 0``.
    """
    cfg = config or TrainConfig()
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    rng = np.random.default_rng(cfg.seed)
    sizes = [x.shape[1], *cfg.hidden, 1]
    model = RealModel.init(sizes, rng, cfg.dropout_p, cfg.init_scale)
    params = [p for pair in zip(model.weights, model.biases) for p in pair]
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    b1, b2, eps = 0.9, 0.999, 1e-8
    k = 0
    n = x.shape[0]
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for s in range(0, n, cfg.batch_size):
            idx = order[s:s + cfg.batch_size]
            xb = x[idx]
            if cfg.jitter_sigma > 0:
                xb = xb + rng.normal(0.0, cfg.jitter_sigma, size=xb.shape)
            drop_rng = rng if cfg.dropout_p > 0 else None
            _, grads = loss_and_grads(model, xb, y[idx], cfg.reg_kind, cfg.reg_strength,
                                      rng=drop_rng)
            flat = [g for pair in grads for g in pair]
            k += 1
            for i, (p, g) in enumerate(zip(params, flat)):
                if cfg.optimizer == "sgd":
                    p -= cfg.lr * g
                    continue
                m[i] = b1 * m[i] + (1 - b1) * g
                v[i] = b2 * v[i] + (1 - b2) * g * g
                mh = m[i] / (1 - b1 ** k)
                vh = v[i] / (1 - b2 ** k)
                p -= cfg.lr * mh / (np.sqrt(vh) + eps)
    return model


def mc_dropout_predict(model: RealModel, x, samples=100, jitter_sigma=0.05, seed=0):
    """Per-row predictive mean and standard deviation over stochastic passes.

    Each pass keeps dropout active and adds fresh ``N(0, jitter_sigma**2)``
    noise to the (normalized) inputs; ``jitter_sigma=0`` disables the noise.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if jitter_sigma < 0:
        raise ValueError("jitter_sigma must be >= 0")
    x = np.asarray(x, dtype=np.float64)
    # separate streams: the same seed gives the same dropout masks at any jitter level
    jitter_ss, drop_ss = np.random.SeedSequence(seed).spawn(2)
    jitter_rng, drop_rng = np.random.default_rng(jitter_ss), np.random.default_rng(drop_ss)
    if model.dropout_p == 0:
        drop_rng = None
    # Welford accumulation keeps the variance stable
    mean = np.zeros(x.shape[0])
    m2 = np.zeros(x.shape[0])
    for s in range(1, samples + 1):
        xs = x + jitter_rng.normal(0.0, jitter_sigma, size=x.shape) if jitter_sigma > 0 else x
        out = model.forward(xs, rng=drop_rng)[:, 0]
        d = out - mean
        mean = mean + d / s
        m2 = m2 + d * (out - mean)
    std = np.sqrt(np.maximum(m2 / samples, 0.0))
    return mean, std
