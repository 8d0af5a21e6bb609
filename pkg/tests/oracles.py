"""Independent reference implementations used only by the tests.

Nothing here imports the kernels under test.  Interval results are checked
against exact rational arithmetic; network results against a plain float64
MLP written from scratch.
"""

import math
from fractions import Fraction

import numpy as np


# -- exact interval arithmetic ----------------------------------------------------

def exact_hull(op, a, b):
    """Exact (lo, hi) of {x op y} as Fractions; ``a``, ``b`` are float pairs."""
    fa = [Fraction(a[0]), Fraction(a[1])]
    fb = [Fraction(b[0]), Fraction(b[1])]
    if op == "add":
        return fa[0] + fb[0], fa[1] + fb[1]
    if op == "sub":
        return fa[0] - fb[1], fa[1] - fb[0]
    if op == "mul":
        vals = [x * y for x in fa for y in fb]
    elif op == "div":
        vals = [x / y for x in fa for y in fb]
    else:
        raise ValueError(op)
    return min(vals), max(vals)


def exact_sqr(a):
    lo, hi = Fraction(a[0]), Fraction(a[1])
    if lo <= 0 <= hi:
        return Fraction(0), max(lo * lo, hi * hi)
    return min(lo * lo, hi * hi), max(lo * lo, hi * hi)


def float_below(x: Fraction) -> float:
    """Largest double <= x."""
    f = float(x)
    if Fraction(f) > x:
        f = math.nextafter(f, -math.inf)
    return f


def float_above(x: Fraction) -> float:
    """Smallest double >= x."""
    f = float(x)
    if Fraction(f) < x:
        f = math.nextafter(f, math.inf)
    return f


def random_endpoints(rng, n, scale_exp=(-8, 8)):
    """``n`` random (lo, hi) float pairs with mixed signs, magnitudes and
    occasional degenerate or zero-touching intervals."""
    out = []
    for _ in range(n):
        kind = rng.integers(6)
        e = rng.uniform(*scale_exp)
        u, v = rng.uniform(-1, 1, 2) * 10.0 ** e
        if kind == 0:
            v = u
        elif kind == 1:
            u = 0.0
        elif kind == 2:
            u, v = abs(u), abs(v)
        elif kind == 3:
            u, v = -abs(u), -abs(v)
        out.append((min(u, v), max(u, v)))
    return out


# -- reference MLP -----------------------------------------------------------------
# Arrays may carry leading sample axes: weights [..., fan_in, fan_out],
# biases [..., fan_out], x [..., B, d], y [..., B].

def mlp_forward(weights, biases, x):
    """Real forward pass with ReLU hidden layers and an affine output."""
    a = np.asarray(x, dtype=np.float64)
    pre, post = [], []
    for i, (w, b) in enumerate(zip(weights, biases)):
        z = a @ w + np.expand_dims(b, -2)
        a = z if i == len(weights) - 1 else np.where(z > 0, z, 0.0)
        pre.append(z)
        post.append(a)
    return pre, post


def mlp_loss(weights, biases, x, y, reg_kind="none", lam=0.0):
    _, post = mlp_forward(weights, biases, x)
    y = np.asarray(y, dtype=np.float64)
    r = post[-1][..., 0] - y
    value = np.sum(r * r, axis=-1) / (2 * y.shape[-1])
    for w in weights:
        if reg_kind == "l2":
            value = value + lam * np.sum(w * w, axis=(-2, -1))
        elif reg_kind == "l1":
            value = value + lam * np.sum(np.abs(w), axis=(-2, -1))
    return value


def mlp_grads(weights, biases, x, y, reg_kind="none", lam=0.0):
    """Backpropagation written out layer by layer (ReLU'(0) = 0)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    pre, post = mlp_forward(weights, biases, x)
    n = y.shape[-1]
    delta = (post[-1] - y[..., None]) / n
    grads = []
    for i in reversed(range(len(weights))):
        inp = x if i == 0 else post[i - 1]
        gw = np.swapaxes(inp, -1, -2) @ delta
        if reg_kind == "l2":
            gw = gw + 2 * lam * weights[i]
        elif reg_kind == "l1":
            gw = gw + lam * np.sign(weights[i])
        grads.append((gw, delta.sum(axis=-2)))
        if i:
            delta = (delta @ np.swapaxes(weights[i], -1, -2)) * (pre[i - 1] > 0)
    return grads[::-1]


def sample_box(rng, lo, hi, k):
    """``k`` members of the box [lo, hi] stacked on a new leading axis.

    The first two are the lower and upper corners; every seventh is a
    random corner; the rest are uniform.
    """
    lo, hi = np.asarray(lo, dtype=np.float64), np.asarray(hi, dtype=np.float64)
    u = rng.random((k,) + lo.shape)
    corner = rng.random((k,) + lo.shape) < 0.5
    is_corner = (np.arange(k) % 7 == 0).reshape((k,) + (1,) * lo.ndim)
    u = np.where(is_corner, corner.astype(float), u)
    u[0], u[1 % k] = 0.0, 1.0
    out = lo + (hi - lo) * u
    return np.minimum(np.maximum(out, lo), hi)


def sample_members(rng, lo, hi, k):
    """``k`` member arrays of the box [lo, hi], corners included now and then."""
    lo, hi = np.asarray(lo), np.asarray(hi)
    out = []
    for s in range(k):
        if s == 0:
            out.append(lo.copy())
        elif s == 1:
            out.append(hi.copy())
        elif s % 7 == 0:
            out.append(np.where(rng.random(lo.shape) < 0.5, lo, hi))
        else:
            out.append(lo + (hi - lo) * rng.random(lo.shape))
    return out


# -- scripted I-Adam trace ------------------------------------------------------------------
# Interval endpoints are Fractions; only the square root is taken in floating point.

def _imul(a, b):
    vals = [x * y for x in a for y in b]
    return min(vals), max(vals)


def _iscale(a, s):
    return (a[0] * s, a[1] * s) if s >= 0 else (a[1] * s, a[0] * s)


def iadam_hand_trace(x, y, w, b, steps=3, alpha=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """I-Adam on ``pred = w * x + b`` with one sample and no clipping.

    ``x``, ``y``, ``w``, ``b`` are (lo, hi) pairs.  Returns the list of
    ``(w, b)`` after each step.
    """
    F = Fraction
    x = (F(x[0]), F(x[1]))
    y = (F(y[0]), F(y[1]))
    params = [(F(w[0]), F(w[1])), (F(b[0]), F(b[1]))]
    m = [(F(0), F(0))] * 2
    v = [F(0)] * 2
    b1, b2 = F(beta1), F(beta2)
    out = []
    for k in range(1, steps + 1):
        wx = _imul(params[0], x)
        pred = (wx[0] + params[1][0], wx[1] + params[1][1])
        r = (pred[0] - y[1], pred[1] - y[0])
        grads = [_imul(x, r), r]
        for i, g in enumerate(grads):
            m[i] = tuple(b1 * mi + (1 - b1) * gi for mi, gi in zip(m[i], g))
            gmid = (g[0] + g[1]) / 2
            v[i] = b2 * v[i] + (1 - b2) * gmid * gmid
            mhat = _iscale(m[i], 1 / (1 - b1 ** k))
            vhat = v[i] / (1 - b2 ** k)
            den = F(math.sqrt(vhat)) + F(eps)
            step = _iscale(mhat, F(alpha) / den)
            params[i] = (params[i][0] - step[1], params[i][1] - step[0])
        out.append(tuple(params))
    return out
