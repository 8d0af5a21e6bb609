"""Dense interval arrays stored as a pair of float64 endpoint arrays."""

from __future__ import annotations

import json
from typing import Iterable

import numpy as np

from . import _rounding as R
from .exceptions import (
    DivisionByZeroInterval,
    IntervalOverflow,
    InvalidEndpoints,
    NonPositiveClip,
    ShapeMismatch,
)
from .interval import Interval

__all__ = ["IntervalTensor", "from_real", "matmul", "clip_by_mag"]


def _finite_or_raise(lo, hi):
    if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
        raise IntervalOverflow("interval tensor endpoint left the finite range")


class IntervalTensor:
    """N-dimensional array of intervals.

    ``lo`` and ``hi`` are read-only float64 arrays of identical shape; all
    operations return new tensors.
    """

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi=None, *, check=True):
        lo = np.array(lo, dtype=np.float64)
        hi = lo.copy() if hi is None else np.array(hi, dtype=np.float64)
        if lo.shape != hi.shape:
            raise ShapeMismatch(f"endpoint shapes differ: {lo.shape} vs {hi.shape}")
        if check:
            if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
                raise InvalidEndpoints("non-finite endpoint in tensor")
            if (lo > hi).any():
                raise InvalidEndpoints("lo > hi in tensor")
        lo.flags.writeable = False
        hi.flags.writeable = False
        self.lo = lo
        self.hi = hi

    @classmethod
    def _raw(cls, lo, hi):
        _finite_or_raise(lo, hi)
        return cls(lo, hi, check=False)

    @classmethod
    def from_intervals(cls, items, shape=None) -> "IntervalTensor":
        items = list(items)
        lo = np.array([iv.lo for iv in items], dtype=np.float64)
        hi = np.array([iv.hi for iv in items], dtype=np.float64)
        if shape is not None:
            lo, hi = lo.reshape(shape), hi.reshape(shape)
        return cls(lo, hi)

    @classmethod
    def zeros(cls, shape) -> "IntervalTensor":
        z = np.zeros(shape)
        return cls(z, z)

    # -- shape and access -------------------------------------------------

    @property
    def shape(self):
        return self.lo.shape

    @property
    def ndim(self):
        return self.lo.ndim

    @property
    def size(self):
        return self.lo.size

    @property
    def data(self) -> list:
        """Row-major flat list of :class:`Interval`."""
        return [Interval(a, b) for a, b in zip(self.lo.ravel(), self.hi.ravel())]

    def __len__(self):
        return self.shape[0]

    def __getitem__(self, idx):
        lo, hi = self.lo[idx], self.hi[idx]
        if np.ndim(lo) == 0:
            return Interval(float(lo), float(hi))
        return IntervalTensor(lo, hi, check=False)

    def reshape(self, *shape) -> "IntervalTensor":
        return IntervalTensor(self.lo.reshape(*shape), self.hi.reshape(*shape), check=False)

    def ravel(self) -> "IntervalTensor":
        return self.reshape(-1)

    @property
    def T(self) -> "IntervalTensor":
        return self.transpose()

    def transpose(self) -> "IntervalTensor":
        return IntervalTensor(self.lo.T, self.hi.T, check=False)

    def __repr__(self):
        return f"IntervalTensor(shape={self.shape}, lo={self.lo!r}, hi={self.hi!r})"

    def __eq__(self, other):
        if not isinstance(other, IntervalTensor):
            return NotImplemented
        return (self.shape == other.shape and np.array_equal(self.lo, other.lo)
                and np.array_equal(self.hi, other.hi))

    __hash__ = None

    # -- descriptors --------------------------------------------------------

    def midpoints(self) -> np.ndarray:
        return 0.5 * self.lo + 0.5 * self.hi

    def radii(self) -> np.ndarray:
        """Radii rounded up so ``[mid - rad, mid + rad]`` covers each entry."""
        mid = self.midpoints()
        shape = self.shape
        a = R.k_sub(self.hi.ravel(), self.hi.ravel(), mid.ravel(), mid.ravel())[1]
        b = R.k_sub(mid.ravel(), mid.ravel(), self.lo.ravel(), self.lo.ravel())[1]
        return np.maximum(a, b).reshape(shape)

    def widths(self) -> np.ndarray:
        return 2.0 * self.radii()

    def mag(self) -> np.ndarray:
        return np.maximum(np.abs(self.lo), np.abs(self.hi))

    def is_degenerate(self) -> bool:
        return bool(np.array_equal(self.lo, self.hi))

    def contains(self, x) -> np.ndarray:
        """Elementwise membership test for a real array."""
        x = np.asarray(x, dtype=np.float64)
        return (self.lo <= x) & (x <= self.hi)

    def subset(self, other: "IntervalTensor") -> bool:
        """True when every entry of ``self`` lies in the matching entry of ``other``."""
        return bool(((other.lo <= self.lo) & (self.hi <= other.hi)).all())

    # -- arithmetic ---------------------------------------------------------

    def _binary(self, other, kernel):
        other = _as_tensor(other)
        a_lo, a_hi, b_lo, b_hi = _broadcast(self, other)
        shape = a_lo.shape
        lo, hi = kernel(a_lo.ravel(), a_hi.ravel(), b_lo.ravel(), b_hi.ravel())
        return IntervalTensor._raw(lo.reshape(shape), hi.reshape(shape))

    def __add__(self, other):
        return self._binary(other, R.k_add)

    def __radd__(self, other):
        return _as_tensor(other)._binary(self, R.k_add)

    def __sub__(self, other):
        return self._binary(other, R.k_sub)

    def __rsub__(self, other):
        return _as_tensor(other)._binary(self, R.k_sub)

    def __mul__(self, other):
        return self._binary(other, R.k_mul)

    def __rmul__(self, other):
        return _as_tensor(other)._binary(self, R.k_mul)

    def __truediv__(self, other):
        other = _as_tensor(other)
        if ((other.lo <= 0.0) & (other.hi >= 0.0)).any():
            raise DivisionByZeroInterval("divisor contains zero")
        return self._binary(other, R.k_div)

    def __neg__(self):
        return IntervalTensor(-self.hi, -self.lo, check=False)

    def __matmul__(self, other):
        return matmul(self, other)

    def sqr(self) -> "IntervalTensor":
        lo, hi = R.k_sqr(self.lo.ravel(), self.hi.ravel())
        return IntervalTensor._raw(lo.reshape(self.shape), hi.reshape(self.shape))

    def sqrt(self) -> "IntervalTensor":
        if (self.lo < 0).any():
            raise InvalidEndpoints("sqrt of an interval reaching below zero")
        lo, hi = R.k_sqrt(self.lo.ravel(), self.hi.ravel())
        return IntervalTensor._raw(lo.reshape(self.shape), hi.reshape(self.shape))

    def abs(self) -> "IntervalTensor":
        lo = np.where(self.lo >= 0, self.lo, np.where(self.hi <= 0, -self.hi, 0.0))
        return IntervalTensor(lo, self.mag(), check=False)

    def relu(self) -> "IntervalTensor":
        return IntervalTensor(np.maximum(self.lo, 0.0), np.maximum(self.hi, 0.0), check=False)

    def sum(self, axis=None) -> "IntervalTensor":
        """Left-to-right outward-rounded sum (over all entries if ``axis`` is None)."""
        if axis is None:
            lo, hi = R.k_sum_rows(self.lo.reshape(-1, 1), self.hi.reshape(-1, 1))
            return IntervalTensor._raw(lo.reshape(()), hi.reshape(()))
        axis = axis % self.ndim
        lo = np.moveaxis(self.lo, axis, 0)
        hi = np.moveaxis(self.hi, axis, 0)
        rest = lo.shape[1:]
        n = lo.shape[0]
        slo, shi = R.k_sum_rows(np.ascontiguousarray(lo.reshape(n, -1)),
                                np.ascontiguousarray(hi.reshape(n, -1)))
        return IntervalTensor._raw(slo.reshape(rest), shi.reshape(rest))

    def mean(self, axis=None) -> "IntervalTensor":
        n = self.size if axis is None else self.shape[axis]
        return self.sum(axis) / float(n)

    def outward(self, steps=1) -> "IntervalTensor":
        lo, hi = R.k_outward(self.lo.ravel(), self.hi.ravel(), steps)
        return IntervalTensor._raw(lo.reshape(self.shape), hi.reshape(self.shape))

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return {"shape": list(self.shape),
                "lo_data": self.lo.ravel().tolist(),
                "hi_data": self.hi.ravel().tolist()}

    @classmethod
    def from_dict(cls, d) -> "IntervalTensor":
        shape = tuple(d["shape"])
        return cls(np.array(d["lo_data"], dtype=np.float64).reshape(shape),
                   np.array(d["hi_data"], dtype=np.float64).reshape(shape))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "IntervalTensor":
        return cls.from_dict(json.loads(s))


def _as_tensor(x) -> IntervalTensor:
    if isinstance(x, IntervalTensor):
        return x
    if isinstance(x, Interval):
        return IntervalTensor(np.float64(x.lo), np.float64(x.hi), check=False)
    return IntervalTensor(x)


def _broadcast(a: IntervalTensor, b: IntervalTensor):
    # same shape, scalar, or trailing-dims (bias-row / leading-batch) broadcast
    if a.shape != b.shape and a.ndim and b.ndim:
        big, small = (a, b) if a.ndim >= b.ndim else (b, a)
        if big.shape[big.ndim - small.ndim:] != small.shape:
            raise ShapeMismatch(f"cannot broadcast {a.shape} with {b.shape}")
    try:
        alo, ahi, blo, bhi = np.broadcast_arrays(a.lo, a.hi, b.lo, b.hi)
    except ValueError as exc:
        raise ShapeMismatch(str(exc)) from None
    # ascontiguousarray promotes 0-d to 1-d
    return tuple(np.ascontiguousarray(x).reshape(alo.shape) for x in (alo, ahi, blo, bhi))


def from_real(t) -> IntervalTensor:
    """Degenerate interval tensor from a real array."""
    t = np.asarray(t, dtype=np.float64)
    return IntervalTensor(t, t)


def matmul(a: IntervalTensor, b: IntervalTensor) -> IntervalTensor:
    """Entrywise-sharp interval matrix product of 2-D tensors."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul shapes {a.shape} x {b.shape}")
    lo, hi = R.k_matmul(np.ascontiguousarray(a.lo), np.ascontiguousarray(a.hi),
                        np.ascontiguousarray(b.lo), np.ascontiguousarray(b.hi))
    return IntervalTensor._raw(lo, hi)


def clip_by_mag(a: IntervalTensor, c: float) -> IntervalTensor:
    """Scale each entry by ``min(1, c / mag)`` so that every magnitude is <= c.

    The scaled endpoints are rounded outward and then clamped to ``[-c, c]``.
    """
    if not c > 0:
        raise NonPositiveClip(f"clip threshold must be > 0, got {c}")
    m = a.mag()
    over = m > c
    if not over.any():
        return a
    s = np.where(over, c / np.where(over, m, 1.0), 1.0)
    lo, _ = R.k_mul(a.lo.ravel(), a.lo.ravel(), s.ravel(), s.ravel())
    _, hi = R.k_mul(a.hi.ravel(), a.hi.ravel(), s.ravel(), s.ravel())
    lo = np.where(over, np.clip(lo.reshape(a.shape), -c, c), a.lo)
    hi = np.where(over, np.clip(hi.reshape(a.shape), -c, c), a.hi)
    return IntervalTensor(lo, hi, check=False)


def concat_rows(parts: Iterable[IntervalTensor]) -> IntervalTensor:
    parts = list(parts)
    return IntervalTensor(np.concatenate([p.lo for p in parts]),
                          np.concatenate([p.hi for p in parts]), check=False)
