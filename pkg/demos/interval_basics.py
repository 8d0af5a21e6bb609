"""
Interval arithmetic with outward rounding
=========================================

Intervals stand in for uncertain reals.  Every operation returns an
interval that contains all possible exact results.
"""

from fractions import Fraction

import numpy as np

from dinn import IntervalTensor, from_uncertainty, make, matmul, sqr

# endpoints are rounded outward, so 0.1 + 0.2 keeps the exact sum inside
a = make(0.1, 0.1) + make(0.2, 0.2)
print("0.1 + 0.2 ->", a, "width", a.width)
print("exact sum inside:", Fraction(a.lo) <= Fraction(0.1) + Fraction(0.2) <= Fraction(a.hi))

# the same variable used twice is treated as two independent values
x = make(-1, 2)
print("x * x   ->", x * x)
print("sqr(x)  ->", sqr(x))
print("x - x   ->", x - x)

# a reading of 40 with 10% uncertainty
print("40 at beta=0.1 ->", from_uncertainty(40.0, 0.1))

# tensors: an interval matrix times an interval vector
W = IntervalTensor(np.array([[1.0, -2.0], [0.5, 1.0]]), np.array([[1.1, -1.9], [0.5, 1.0]]))
v = IntervalTensor(np.array([[1.0, 1.0]]), np.array([[2.0, 1.0]]))
y = matmul(v, W)
print("v @ W lo", y.lo, "hi", y.hi)
