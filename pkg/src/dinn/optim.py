"""First-order optimizers for interval parameters.

SGD and momentum apply the usual update rules with interval arithmetic.
I-Adam keeps the first moment as an interval but builds the second moment
from squared gradient midpoints, so the step divisor is a positive real.
``AdamUnmodified`` squares the interval gradient instead and is kept to
reproduce its blow-up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import BadCheckpoint, ShapeMismatch
from .tensor import IntervalTensor, clip_by_mag, from_real

KINDS = ("sgd", "momentum", "iadam", "adam")


@dataclass(frozen=True)
class Schedule:
    kind: str = "constant"  # constant | step | anneal
    factor: float = 0.5
    every: int = 10

    def __post_init__(self):
        if self.kind not in ("constant", "step", "anneal"):
            raise ValueError(f"unknown schedule {self.kind!r}")
        if self.kind == "step" and not (self.factor > 0 and self.every >= 1):
            raise ValueError("step decay needs factor > 0 and every >= 1")


def schedule_alpha(schedule: Schedule, epoch: int, alpha0: float) -> float:
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    if schedule.kind == "constant":
        return alpha0
    if schedule.kind == "step":
        return alpha0 * schedule.factor ** (epoch // schedule.every)
    return alpha0 / (1 + epoch)


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "sgd"
    alpha: float = 1e-3
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    clip: Optional[float] = 1.0
    schedule: Schedule = field(default_factory=Schedule)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown optimizer {self.kind!r}")
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")
        for name in ("momentum", "beta1", "beta2"):
            v = getattr(self, name)
            if not 0 <= v < 1:
                raise ValueError(f"{name} must lie in [0, 1)")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if self.clip is not None and not self.clip > 0:
            raise ValueError("clip must be > 0 or None")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "alpha": self.alpha, "momentum": self.momentum,
                "beta1": self.beta1, "beta2": self.beta2, "epsilon": self.epsilon,
                "clip": self.clip,
                "schedule": {"kind": self.schedule.kind, "factor": self.schedule.factor,
                             "every": self.schedule.every}}

    @classmethod
    def from_dict(cls, d) -> "OptimizerConfig":
        d = dict(d)
        sched = d.pop("schedule", None) or {}
        return cls(schedule=Schedule(**sched), **d)


@dataclass
class OptimizerState:
    """Per-parameter state; lists are indexed like the flattened parameter list."""

    step: int = 0
    m: list = field(default_factory=list)  # IntervalTensor, first moment
    v: list = field(default_factory=list)  # real ndarray (I-Adam) or IntervalTensor (Adam)
    velocity: list = field(default_factory=list)  # IntervalTensor

    def to_dict(self) -> dict:
        def enc(x):
            if x is None:
                return None
            if isinstance(x, IntervalTensor):
                return {"interval": x.to_dict()}
            return {"real": {"shape": list(x.shape), "data": x.ravel().tolist()}}
        return {"step": self.step, "m": [enc(x) for x in self.m],
                "v": [enc(x) for x in self.v], "velocity": [enc(x) for x in self.velocity]}

    @classmethod
    def from_dict(cls, d) -> "OptimizerState":
        def dec(x):
            if x is None:
                return None
            if "interval" in x:
                return IntervalTensor.from_dict(x["interval"])
            r = x["real"]
            return np.array(r["data"], dtype=np.float64).reshape(r["shape"])
        try:
            return cls(int(d["step"]), [dec(x) for x in d["m"]], [dec(x) for x in d["v"]],
                       [dec(x) for x in d["velocity"]])
        except (KeyError, TypeError) as exc:
            raise BadCheckpoint(f"malformed optimizer state: {exc}") from exc


def _check(w, g):
    if w.shape != g.shape:
        raise ShapeMismatch(f"parameter {w.shape} vs gradient {g.shape}")


def sgd_step(w: IntervalTensor, g: IntervalTensor, alpha: float) -> IntervalTensor:
    _check(w, g)
    return w - g * float(alpha)


def momentum_step(velocity: Optional[IntervalTensor], w: IntervalTensor, g: IntervalTensor,
                  alpha: float, mu: float):
    """Returns ``(w', velocity')`` with ``velocity' = mu * velocity + g``."""
    _check(w, g)
    if velocity is None:
        velocity = IntervalTensor.zeros(w.shape)
    v = g if mu == 0 else velocity * float(mu) + g
    return w - v * float(alpha), v


def iadam_step(m: Optional[IntervalTensor], v: Optional[np.ndarray], k: int,
               w: IntervalTensor, g: IntervalTensor, cfg: OptimizerConfig, alpha=None):
    """One I-Adam update at step ``k`` (already incremented, k >= 1).

    Returns ``(w', m', v', step)`` where ``step`` is the interval that was
    subtracted from ``w``.
    """
    _check(w, g)
    alpha = cfg.alpha if alpha is None else alpha
    b1, b2 = cfg.beta1, cfg.beta2
    if m is None:
        m = IntervalTensor.zeros(w.shape)
    if v is None:
        v = np.zeros(w.shape)
    m_new = m * b1 + g * (1.0 - b1)
    gm = g.midpoints()
    v_new = b2 * v + (1.0 - b2) * gm * gm
    m_hat = m_new / (1.0 - b1 ** k)
    v_hat = v_new / (1.0 - b2 ** k)
    denom = np.sqrt(v_hat) + cfg.epsilon  # real and >= epsilon
    step = m_hat / from_real(denom) * float(alpha)
    return w - step, m_new, v_new, step


def adam_unmodified_step(m: Optional[IntervalTensor], v: Optional[IntervalTensor], k: int,
                         w: IntervalTensor, g: IntervalTensor, cfg: OptimizerConfig,
                         alpha=None):
    """Adam with an interval second moment ``sqr(G)``; unstable when 0 is in G."""
    _check(w, g)
    alpha = cfg.alpha if alpha is None else alpha
    b1, b2 = cfg.beta1, cfg.beta2
    if m is None:
        m = IntervalTensor.zeros(w.shape)
    if v is None:
        v = IntervalTensor.zeros(w.shape)
    m_new = m * b1 + g * (1.0 - b1)
    v_new = v * b2 + g.sqr() * (1.0 - b2)
    m_hat = m_new / (1.0 - b1 ** k)
    v_hat = v_new / (1.0 - b2 ** k)
    denom = v_hat.sqrt() + cfg.epsilon
    step = m_hat / denom * float(alpha)
    return w - step, m_new, v_new, step


def clip_gradients(grads, clip: Optional[float]):
    if clip is None:
        return grads
    return [(clip_by_mag(gw, clip), clip_by_mag(gb, clip)) for gw, gb in grads]


def apply_update(model, grads, state: OptimizerState, cfg: OptimizerConfig, epoch: int = 0):
    """Clip ``grads``, take one optimizer step and return ``(model', state)``.

    ``state`` is updated in place.
    """
    grads = clip_gradients(grads, cfg.clip)
    alpha = schedule_alpha(cfg.schedule, epoch, cfg.alpha)
    params = [p for pair in model.params() for p in pair]
    flat_g = [g for pair in grads for g in pair]
    n = len(params)
    if not state.m:
        state.m = [None] * n
        state.v = [None] * n
        state.velocity = [None] * n
    state.step += 1
    new = []
    for i, (w, g) in enumerate(zip(params, flat_g)):
        if cfg.kind == "sgd":
            new.append(sgd_step(w, g, alpha))
        elif cfg.kind == "momentum":
            w2, state.velocity[i] = momentum_step(state.velocity[i], w, g, alpha, cfg.momentum)
            new.append(w2)
        elif cfg.kind == "iadam":
            w2, state.m[i], state.v[i], _ = iadam_step(state.m[i], state.v[i], state.step,
                                                        w, g, cfg, alpha)
            new.append(w2)
        else:
            w2, state.m[i], state.v[i], _ = adam_unmodified_step(
                state.m[i], state.v[i], state.step, w, g, cfg, alpha)
            new.append(w2)
    pairs = [(new[i], new[i + 1]) for i in range(0, n, 2)]
    return model.with_params(pairs), state


def he_normal(shape, rng, scale=0.1) -> np.ndarray:
    fan_in = shape[0]
    return rng.normal(0.0, math.sqrt(2.0 / fan_in), size=shape) * scale


def init_weights(shape, strategy="small-random", scale=0.1, rng=None, checkpoint=None):
    """Degenerate initial weights.

    ``small-random`` draws He-normal values shrunk by ``scale``;
    ``warm-start`` copies a real weight array from ``checkpoint``.
    """
    if strategy == "small-random":
        if not scale > 0:
            raise ValueError("scale must be > 0")
        rng = np.random.default_rng() if rng is None else rng
        return from_real(he_normal(shape, rng, scale))
    if strategy == "warm-start":
        if checkpoint is None:
            raise BadCheckpoint("warm start needs a checkpoint array")
        arr = np.asarray(checkpoint, dtype=np.float64)
        if arr.shape != tuple(shape) or not np.isfinite(arr).all():
            raise BadCheckpoint(f"checkpoint weights {arr.shape} do not fit {tuple(shape)}")
        return from_real(arr)
    raise ValueError(f"unknown init strategy {strategy!r}")


def init_model(sizes, scale=0.1, rng=None, reg_kind="none", reg_strength=0.0):
    """Small-random degenerate DINN with ReLU hidden layers and an affine output."""
    from .net import DinnLayer, DinnModel

    rng = np.random.default_rng() if rng is None else rng
    layers = []
    for i, (a, b) in enumerate(zip(sizes, sizes[1:])):
        act = "identity" if i == len(sizes) - 2 else "relu"
        layers.append(DinnLayer(init_weights((a, b), "small-random", scale, rng),
                                IntervalTensor.zeros((b,)), act))
    return DinnModel(layers, reg_kind, reg_strength)


def warm_start(real_model, reg_kind="none", reg_strength=0.0):
    """DINN whose weights are degenerate copies of a real-valued model."""
    from .net import DinnLayer, DinnModel

    try:
        layers = [DinnLayer(init_weights(w.shape, "warm-start", checkpoint=w),
                            from_real(np.asarray(b, dtype=np.float64)), act)
                  for w, b, act in zip(real_model.weights, real_model.biases,
                                       real_model.activations)]
    except AttributeError as exc:
        raise BadCheckpoint(f"not a real-valued model: {exc}") from exc
    return DinnModel(layers, reg_kind, reg_strength)
