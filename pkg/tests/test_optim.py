import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dinn import (IntervalTensor, OptimizerConfig, OptimizerState, RealModel, Schedule,
                  adam_unmodified_step, apply_update, backward, forward, from_real,
                  iadam_step, init_model, init_weights, momentum_step, schedule_alpha,
                  sgd_step, warm_start)
from dinn.exceptions import BadCheckpoint, ShapeMismatch
from dinn.net import DinnLayer, DinnModel

import mc
from oracles import iadam_hand_trace


def T(lo, hi=None):
    return IntervalTensor(np.asarray(lo, float), None if hi is None else np.asarray(hi, float))


def linear_model(w, b=(0.0, 0.0)):
    return DinnModel([DinnLayer(T([[w[0]]], [[w[1]]]), T([b[0]], [b[1]]), "identity")])


# -- configuration -----------------------------------------------------------------------

def test_config_validation():
    for bad in ({"alpha": 0}, {"beta1": 1.0}, {"beta2": -0.1}, {"momentum": 1.0},
                {"epsilon": 0}, {"clip": 0}, {"kind": "rmsprop"}):
        with pytest.raises(ValueError):
            OptimizerConfig(**bad)
    cfg = OptimizerConfig()
    assert (cfg.alpha, cfg.beta1, cfg.beta2, cfg.epsilon, cfg.clip, cfg.momentum) == \
        (1e-3, 0.9, 0.999, 1e-8, 1.0, 0.9)
    assert OptimizerConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


def test_schedules():
    assert schedule_alpha(Schedule("constant"), 17, 0.1) == 0.1
    assert schedule_alpha(Schedule("step", 0.5, 10), 20, 1.0) == 0.25
    assert schedule_alpha(Schedule("step", 0.5, 10), 19, 1.0) == 0.5
    assert schedule_alpha(Schedule("anneal"), 3, 1.0) == 0.25
    with pytest.raises(ValueError):
        schedule_alpha(Schedule(), -1, 1.0)
    with pytest.raises(ValueError):
        Schedule("cosine")


# -- SGD and momentum --------------------------------------------------------------------

def test_sgd_examples():
    r = sgd_step(T([1.0]), T([0.5]), 0.1)[0]
    assert 0.95 in r and r.width <= 2 * np.spacing(0.95)
    assert sgd_step(T([1.0]), T([0.0], [1.0]), 1.0) == T([0.0], [1.0])
    with pytest.raises(ShapeMismatch):
        sgd_step(T([1.0, 2.0]), T([1.0]), 0.1)


def test_sgd_hand_trace_quadratic():
    # loss (2w + b - 3)^2 / 2: gradients 2r and r with r = 2w + b - 3
    model = linear_model((1.0, 1.0))
    cfg = OptimizerConfig("sgd", alpha=0.05, clip=None)
    state, w, b = OptimizerState(), 1.0, 0.0
    for _ in range(3):
        grads = backward(model, forward(model, from_real([[2.0]])), from_real([3.0]))
        model, state = apply_update(model, grads, state, cfg)
        r = 2 * w + b - 3
        w, b = w - 0.05 * 2 * r, b - 0.05 * r
        gw, gb = model.layers[0].weights[0, 0], model.layers[0].bias[0]
        assert abs(gw.mid - w) <= 1e-15 and abs(gb.mid - b) <= 1e-15
        assert gw.width <= 1e-15 and gb.width <= 1e-15
    assert state.step == 3


def test_momentum_examples():
    w, g = T([1.0]), T([0.25])
    assert momentum_step(None, w, g, 0.1, 0.0)[0] == sgd_step(w, g, 0.1)
    w1, v1 = momentum_step(None, T([0.0]), T([1.0]), 0.5, 0.9)
    w2, v2 = momentum_step(v1, w1, T([1.0]), 0.5, 0.9)
    assert v1 == T([1.0]) and w1 == T([-0.5])
    assert 1.9 in v2[0] and v2.widths()[0] <= 2 * np.spacing(1.9)
    assert -1.45 in w2[0]
    _, v = momentum_step(None, T([0.0]), T([0.0], [1.0]), 1.0, 0.5)
    _, v = momentum_step(v, T([0.0]), T([0.0], [1.0]), 1.0, 0.5)
    assert v == T([0.0], [1.5])


@settings(max_examples=200, deadline=None)
@given(st.integers(-2 ** 20, 2 ** 20), st.integers(0, 2 ** 10), st.integers(-2 ** 10, 2 ** 10),
       st.integers(0, 2 ** 10), st.integers(-6, 0))
def test_sgd_width_law_exact(wm, wr, gm, gr, e):
    # dyadic values on a common grid: every operation is exact
    w = T([(wm - wr) / 64], [(wm + wr) / 64])
    g = T([(gm - gr) / 64], [(gm + gr) / 64])
    alpha = 2.0 ** e
    new = sgd_step(w, g, alpha)
    assert new.widths()[0] == w.widths()[0] + alpha * g.widths()[0]


def test_sgd_width_law_random():
    rng = np.random.default_rng(0)
    for _ in range(200):
        w, g = mc.random_box(rng, (5,)), mc.random_box(rng, (5,))
        alpha = 10 ** rng.uniform(-4, 0)
        grow = sgd_step(w, g, alpha).widths() - w.widths()
        exact = alpha * g.widths()
        # widths are themselves rounded differences of endpoints
        tol = 8 * np.spacing(np.abs(w.lo) + np.abs(w.hi) + alpha * g.mag())
        assert (grow >= exact - tol).all() and (grow <= exact + tol).all()


# -- I-Adam ------------------------------------------------------------------------------

def test_iadam_first_step():
    cfg = OptimizerConfig("iadam", alpha=0.01, clip=None)
    for c in (0.3, -2.0):
        w, m, v, step = iadam_step(None, None, 1, T([1.0]), T([c]), cfg)
        expect = 0.01 * c / (abs(c) + 1e-8)
        assert step.lo[0] <= expect <= step.hi[0]
        assert abs(step.midpoints()[0] - 0.01 * np.sign(c)) < 1e-9
        assert v[0] > 0 and isinstance(v, np.ndarray)


def test_iadam_zero_midpoint_step_divides_by_epsilon():
    cfg = OptimizerConfig("iadam", alpha=1e-3, clip=None)
    _, _, v, step = iadam_step(None, None, 1, T([0.0]), T([-1.0], [1.0]), cfg)
    assert v[0] == 0.0
    assert step.lo[0] <= -1e5 and step.hi[0] >= 1e5


@pytest.mark.parametrize("case", [
    ((2.9, 3.1), (5.0, 5.0), (2.0, 2.0), (0.0, 0.0)),
    ((1.0, 1.0), (-1.0, -0.5), (0.5, 0.5), (0.1, 0.1)),
    ((0.5, 2.0), (1.0, 1.5), (-1.0, -0.8), (0.2, 0.3)),
])
def test_iadam_three_step_hand_trace(case):
    x, y, w, b = case
    cfg = OptimizerConfig("iadam", alpha=1e-2, clip=None)
    model = linear_model(w, b)
    state = OptimizerState()
    expected = iadam_hand_trace(x, y, w, b, steps=3, alpha=1e-2)
    for k in range(3):
        grads = backward(model, forward(model, T([[x[0]]], [[x[1]]])), T([y[0]], [y[1]]))
        model, state = apply_update(model, grads, state, cfg)
        (ew, eb) = expected[k]
        got = [model.layers[0].weights[0, 0], model.layers[0].bias[0]]
        for g, e in zip(got, (ew, eb)):
            for end, ref in ((g.lo, e[0]), (g.hi, e[1])):
                assert abs(end - float(ref)) <= 1e-12 * max(1.0, abs(float(ref)))


def test_iadam_state_typing_and_divisor():
    rng = np.random.default_rng(1)
    model = mc.random_model(rng, [3, 4, 1])
    cfg = OptimizerConfig("iadam", alpha=1e-3)
    state = OptimizerState()
    x, y = mc.random_box(rng, (5, 3)), mc.random_box(rng, (5,), rad=0.05)
    for _ in range(5):
        model, state = apply_update(model, backward(model, forward(model, x), y), state, cfg)
        for m, v, (w) in zip(state.m, state.v, [p for pair in model.params() for p in pair]):
            assert isinstance(m, IntervalTensor) and isinstance(v, np.ndarray)
            assert (v >= 0).all() and v.shape == w.shape == m.shape
            vhat = v / (1 - cfg.beta2 ** state.step)
            assert (np.sqrt(vhat) + cfg.epsilon >= cfg.epsilon).all()


def test_unmodified_adam_blows_up_within_two_steps():
    # w = 1, x = [-1, 1], y = 0: the gradient straddles zero from the first step
    cfg = OptimizerConfig("adam", alpha=1e-3, clip=None)
    model = linear_model((1.0, 1.0))
    state = OptimizerState()
    x, y = T([[-1.0]], [[1.0]]), from_real([0.0])
    biggest = 0.0
    for _ in range(2):
        before = model.layers[0].weights
        model, state = apply_update(model, backward(model, forward(model, x), y), state, cfg)
        after = model.layers[0].weights
        biggest = max(biggest, float(np.abs(after.hi - before.hi).max()),
                      float(np.abs(after.lo - before.lo).max()))
    assert biggest > 1e6


def test_adam_step_divisor_is_interval():
    cfg = OptimizerConfig("adam", alpha=1e-3, clip=None)
    _, _, v, step = adam_unmodified_step(None, None, 1, T([0.0]), T([-1.0], [1.0]), cfg)
    assert isinstance(v, IntervalTensor) and v.lo[0] == 0.0
    assert step.mag()[0] >= 1e5


# -- clipping inside the update ------------------------------------------------------------

def test_update_clips_gradients():
    model = linear_model((0.0, 0.0))
    grads = [(T([[-50.0]], [[10.0]]), T([3.0]))]
    new, _ = apply_update(model, grads, OptimizerState(), OptimizerConfig("sgd", 1.0, clip=1.0))
    assert new.layers[0].weights == T([[-0.2]], [[1.0]])
    bias = new.layers[0].bias[0]
    assert -1.0 in bias and bias.width <= 2 * np.spacing(1.0)


@pytest.mark.parametrize("kind", ["sgd", "momentum", "iadam"])
def test_step_enclosure(kind):
    rng = np.random.default_rng({"sgd": 2, "momentum": 3, "iadam": 4}[kind])
    for clip in (None, 0.5):
        cfg = OptimizerConfig(kind, alpha=0.05, clip=clip)
        for _ in range(2):
            model = mc.random_model(rng, [3, 5, 1], reg_kind="l2", lam=0.01)
            x, y = mc.random_box(rng, (4, 3)), mc.random_box(rng, (4,), rad=0.1)
            state = mc.random_state(rng, model, cfg)
            assert mc.step_violations(model, x, y, cfg, rng, k=300, state=state) == 0


# -- initialization -------------------------------------------------------------------------

def test_small_random_init():
    rng = np.random.default_rng(5)
    w = init_weights((500, 200), "small-random", 0.1, rng)
    assert w.is_degenerate()
    assert abs(w.lo.std() - 0.1 * np.sqrt(2 / 500)) < 0.05 * 0.1 * np.sqrt(2 / 500)
    with pytest.raises(ValueError):
        init_weights((3, 3), "small-random", 0.0, rng)
    model = init_model([3, 4, 1], 0.1, rng)
    assert model.is_degenerate() and model.layers[-1].activation == "identity"


def test_warm_start_matches_real_predictions():
    rng = np.random.default_rng(6)
    real = RealModel.init([4, 7, 5, 1], rng)
    for b in real.biases:
        b += rng.normal(0, 0.1, b.shape)
    model = warm_start(real)
    x = rng.normal(size=(9, 4))
    pred = forward(model, from_real(x)).prediction.reshape(-1)
    ref = real.predict(x)
    assert pred.contains(ref).all()
    assert np.allclose(pred.midpoints(), ref, rtol=0, atol=1e-13)


def test_warm_start_errors():
    with pytest.raises(BadCheckpoint):
        init_weights((2, 2), "warm-start")
    with pytest.raises(BadCheckpoint):
        init_weights((2, 2), "warm-start", checkpoint=np.ones((3, 2)))
    with pytest.raises(BadCheckpoint):
        init_weights((1, 1), "warm-start", checkpoint=[[np.nan]])
    with pytest.raises(BadCheckpoint):
        warm_start(object())


# -- state serialization --------------------------------------------------------------------

@pytest.mark.parametrize("kind", ["momentum", "iadam", "adam"])
def test_state_round_trip_resumes_identically(kind):
    rng = np.random.default_rng(7)
    model = mc.random_model(rng, [3, 4, 1])
    x, y = mc.random_box(rng, (5, 3)), mc.random_box(rng, (5,), rad=0.05)
    cfg = OptimizerConfig(kind, alpha=1e-3)
    state = OptimizerState()
    model, state = apply_update(model, backward(model, forward(model, x), y), state, cfg)
    copy = OptimizerState.from_dict(json.loads(json.dumps(state.to_dict())))
    a, _ = apply_update(model, backward(model, forward(model, x), y), state, cfg)
    b, _ = apply_update(model, backward(model, forward(model, x), y), copy, cfg)
    for (w1, b1), (w2, b2) in zip(a.params(), b.params()):
        assert w1 == w2 and b1 == b2
    with pytest.raises(BadCheckpoint):
        OptimizerState.from_dict({"m": []})
