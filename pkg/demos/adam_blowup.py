"""
Why Adam needs a real second moment
===================================

One weight, one sample whose input straddles zero.  The interval gradient
then contains zero, so squaring it gives a second moment whose lower end is
zero and the Adam divisor sqrt(v) + eps can be as small as eps.  I-Adam
builds the second moment from gradient midpoints instead.
"""

import numpy as np

from dinn import IntervalTensor, OptimizerConfig, OptimizerState, apply_update, backward, forward
from dinn import from_real
from dinn.net import DinnLayer, DinnModel


def one_weight(w):
    return DinnModel([DinnLayer(from_real([[w]]), from_real([0.0]), "identity")])


x = IntervalTensor(np.array([[-0.5]]), np.array([[1.5]]))
y = from_real([0.0])

for kind in ("adam", "iadam"):
    model, state = one_weight(1.0), OptimizerState()
    cfg = OptimizerConfig(kind, alpha=1e-3, clip=None)
    print(kind)
    for step in range(1, 4):
        grads = backward(model, forward(model, x), y)
        model, state = apply_update(model, grads, state, cfg)
        w = model.layers[0].weights
        print(f"  step {step}: w = [{w.lo[0, 0]:.6g}, {w.hi[0, 0]:.6g}]")

# Adam's weight explodes within two steps.  I-Adam divides by the size of
# the gradient midpoint, so each step stays a small multiple of alpha.  It
# fails the same way as Adam only when a midpoint is itself close to zero.
