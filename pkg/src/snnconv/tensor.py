"""Deterministic dense-array arithmetic and seeded randomness.

Arrays are plain ``numpy.ndarray`` values.  The helpers here pin down the
pieces numpy leaves unspecified: summation order in matrix products and the
random generator used for every seeded draw.
"""
from __future__ import annotations

import numpy as np

TRAIN_DTYPE = np.float32
ANALYSIS_DTYPE = np.float64


class DimensionError(ValueError):
    """Raised when array shapes do not conform."""


def matmul(a, b):
    """Matrix product ``a @ b`` with a fixed left-to-right summation order.

    ``out[i, j] = ((a[i,0]*b[0,j] + a[i,1]*b[1,j]) + ...)``, which makes the
    result bit-identical to a naive triple loop regardless of BLAS.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply shapes {a.shape} and {b.shape}")
    dtype = np.result_type(a, b)
    out = np.zeros((a.shape[0], b.shape[1]), dtype=dtype)
    for k in range(a.shape[1]):
        out += a[:, k : k + 1] * b[k : k + 1, :]
    return out


def _check_pair(x, y):
    x = np.asarray(x)
    y = np.asarray(y)
    if x.ndim and y.ndim and x.shape != y.shape:
        raise DimensionError(f"incompatible shapes {x.shape} and {y.shape}")
    return x, y


def ewise(op, *args):
    """Elementwise operation by name.

    Supported: ``add``, ``sub``, ``mul``, ``max`` (two operands),
    ``clamp`` (x, lo, hi), ``floor`` (x) and ``scale`` (x, c).  Only
    scalar-with-array or equal-shape operands are accepted.
    """
    if op in ("add", "sub", "mul", "max"):
        if len(args) != 2:
            raise TypeError(f"{op} takes 2 operands, got {len(args)}")
        x, y = _check_pair(*args)
        fn = {"add": np.add, "sub": np.subtract, "mul": np.multiply, "max": np.maximum}[op]
        return fn(x, y)
    if op == "clamp":
        x, lo, hi = args
        if np.ndim(lo) or np.ndim(hi):
            _check_pair(x, lo)
            _check_pair(x, hi)
        return np.minimum(np.maximum(np.asarray(x), lo), hi)
    if op == "floor":
        (x,) = args
        return np.floor(np.asarray(x))
    if op == "scale":
        x, c = args
        if np.ndim(c):
            raise DimensionError("scale factor must be a scalar")
        return np.asarray(x) * c
    raise ValueError(f"unknown elementwise op {op!r}")


def level_value(scale, k, n):
    """``scale * k / n`` for integer levels ``k`` in [0, n], exactly ``scale`` at ``k == n``."""
    k = np.asarray(k)
    return np.where(k >= n, scale, scale * k / n)


def check_finite(x, what="array"):
    if not np.all(np.isfinite(x)):
        raise FloatingPointError(f"{what} contains non-finite values")
    return x


class Rng:
    """Seeded counter-based generator (Philox), identical across platforms."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.Philox(self.seed))

    def uniform(self, shape, lo=0.0, hi=1.0):
        return rand_uniform(self, shape, lo, hi)

    def normal(self, shape, loc=0.0, scale=1.0):
        return self._gen.normal(loc, scale, size=tuple(np.atleast_1d(shape)))

    def permutation(self, n: int):
        return self._gen.permutation(n)

    def integers(self, lo, hi, shape=None):
        return self._gen.integers(lo, hi, size=shape)

    def spawn(self, key: int) -> "Rng":
        """Independent child stream, derived from this seed and ``key`` only."""
        return Rng(np.random.SeedSequence([self.seed, int(key)]).generate_state(1, np.uint64)[0])


def rand_uniform(rng: Rng, shape, lo, hi):
    """I.i.d. uniform samples on ``[lo, hi)``; advances ``rng``."""
    if not lo < hi:
        raise ValueError(f"need lo < hi, got lo={lo}, hi={hi}")
    shape = tuple(int(s) for s in np.atleast_1d(shape))
    return lo + (hi - lo) * rng._gen.random(size=shape)
