"""Interval domain: scalar intervals, boxes, and the abstract transformers
used to push boxes through LSTM-style networks.

All arithmetic is plain float64 without outward rounding.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)):
            raise ValueError(f"interval bounds must be finite: [{self.lo}, {self.hi}]")
        if self.lo > self.hi:
            raise ValueError(f"empty interval: [{self.lo}, {self.hi}]")

    def __contains__(self, v: float) -> bool:
        return self.lo <= v <= self.hi


class Box:
    """A hyperrectangle stored as two float64 vectors ``lo <= hi``."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi=None):
        lo = np.array(lo, dtype=np.float64).reshape(-1)
        hi = lo.copy() if hi is None else np.array(hi, dtype=np.float64).reshape(-1)
        if lo.shape != hi.shape:
            raise ValueError(f"bound shapes differ: {lo.shape} vs {hi.shape}")
        if not np.all(lo <= hi):
            raise ValueError("box has lo > hi (or NaN) in some dimension")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("box bounds must be finite")
        self.lo = lo
        self.hi = hi

    @classmethod
    def point(cls, v) -> "Box":
        return cls(v)

    @classmethod
    def from_intervals(cls, dims: Iterable[Interval]) -> "Box":
        dims = list(dims)
        return cls([d.lo for d in dims], [d.hi for d in dims])

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    def __len__(self):
        return self.dim

    def __getitem__(self, idx) -> "Box":
        if isinstance(idx, (int, np.integer)):
            return Box(self.lo[idx : idx + 1], self.hi[idx : idx + 1])
        return Box(self.lo[idx], self.hi[idx])

    def interval(self, k: int) -> Interval:
        return Interval(float(self.lo[k]), float(self.hi[k]))

    def intervals(self) -> list[Interval]:
        return [self.interval(k) for k in range(self.dim)]

    @property
    def width(self) -> np.ndarray:
        return self.hi - self.lo

    def is_degenerate(self) -> bool:
        return bool(np.array_equal(self.lo, self.hi))

    def __eq__(self, other):
        if not isinstance(other, Box):
            return NotImplemented
        return np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

    __hash__ = None

    def __repr__(self):
        return f"Box(lo={self.lo.tolist()}, hi={self.hi.tolist()})"


def concat(*boxes: Box) -> Box:
    return Box(np.concatenate([b.lo for b in boxes]), np.concatenate([b.hi for b in boxes]))


def alpha(vectors) -> Box:
    """Tightest box containing a finite, non-empty set of vectors."""
    arr = np.asarray(list(vectors) if not isinstance(vectors, np.ndarray) else vectors, dtype=np.float64)
    if arr.size == 0 or arr.shape[0] == 0:
        raise ValueError("alpha of an empty set is undefined")
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError("alpha expects a set of equal-length vectors")
    return Box(arr.min(axis=0), arr.max(axis=0))


def _check_same_dim(a: Box, b: Box):
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")


def join(a, b):
    """Least Interval/Box containing both arguments."""
    ba, bb = _as_box(a), _as_box(b)
    _check_same_dim(ba, bb)
    return _wrap(a, Box(np.minimum(ba.lo, bb.lo), np.maximum(ba.hi, bb.hi)))


def join_all(boxes: Sequence[Box]) -> Box | None:
    """Left fold of :func:`join`; ``None`` for an empty sequence."""
    out = None
    for b in boxes:
        out = b if out is None else join(out, b)
    return out


def _as_box(a) -> Box:
    if isinstance(a, Interval):
        return Box([a.lo], [a.hi])
    return a


def _wrap(template, box: Box):
    if isinstance(template, Interval):
        return Interval(float(box.lo[0]), float(box.hi[0]))
    return box


def add(a, b):
    ba, bb = _as_box(a), _as_box(b)
    _check_same_dim(ba, bb)
    return _wrap(a, Box(ba.lo + bb.lo, ba.hi + bb.hi))


def mul(a, b):
    ba, bb = _as_box(a), _as_box(b)
    _check_same_dim(ba, bb)
    p = np.stack([ba.lo * bb.lo, ba.lo * bb.hi, ba.hi * bb.lo, ba.hi * bb.hi])
    return _wrap(a, Box(p.min(axis=0), p.max(axis=0)))


def arith(op: str, a, b):
    """Interval ``add`` or ``mul`` on Intervals or (elementwise) Boxes."""
    if op == "add":
        return add(a, b)
    if op == "mul":
        return mul(a, b)
    raise ValueError(f"unknown interval op {op!r}")


def sigmoid(v):
    return 1.0 / (1.0 + np.exp(-v))


def relu(v):
    return np.maximum(v, 0.0)


MONOTONE = {"sigmoid": sigmoid, "tanh": np.tanh, "relu": relu}


def monotone(fn: str, a):
    """Image of a box under a monotonically increasing scalar function."""
    try:
        g = MONOTONE[fn]
    except KeyError:
        raise ValueError(f"unknown monotone function {fn!r}") from None
    b = _as_box(a)
    return _wrap(a, Box(g(b.lo), g(b.hi)))


def split_signs(W: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return np.maximum(W, 0.0), np.minimum(W, 0.0)


def matvec(W, b, v: Box, signs: tuple[np.ndarray, np.ndarray] | None = None) -> Box:
    """Tightest box of ``W x + b`` over ``x`` in ``v``.

    ``signs`` may carry a precomputed ``(max(W,0), min(W,0))`` pair.
    """
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or W.shape[1] != v.dim:
        raise ValueError(f"matrix shape {W.shape} incompatible with box of dim {v.dim}")
    b = np.zeros(W.shape[0]) if b is None else np.asarray(b, dtype=np.float64)
    if b.shape != (W.shape[0],):
        raise ValueError(f"bias shape {b.shape} does not match {W.shape[0]} rows")
    pos, neg = signs if signs is not None else split_signs(W)
    lo = pos @ v.lo + neg @ v.hi + b
    hi = pos @ v.hi + neg @ v.lo + b
    return Box(lo, hi)


def contains(box: Box, v, tol: float = 0.0) -> bool:
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.shape[0] != box.dim:
        raise ValueError(f"dimension mismatch: box {box.dim} vs vector {v.shape[0]}")
    if tol < 0:
        raise ValueError("tol must be non-negative")
    lo_ok = box.lo - tol * (1.0 + np.abs(box.lo)) <= v
    hi_ok = v <= box.hi + tol * (1.0 + np.abs(box.hi))
    return bool(np.all(lo_ok & hi_ok))


def contains_box(outer: Box, inner: Box, tol: float = 0.0) -> bool:
    return contains(outer, inner.lo, tol) and contains(outer, inner.hi, tol)
