"""Dense symmetric tensor operations on R^3.

A rank-``alpha`` tensor is a float64 ndarray of shape ``(3,) * alpha`` stored
row-major; tuples of such tensors (one per embedding component) are plain
Python tuples.  Rotation acts mode by mode, so the 3^alpha x 3^alpha Kronecker
matrix is never materialized and the cost stays at ``alpha * 3**(alpha+1)``
multiply-adds per tensor.

The rotation-invariant tensors returned by :func:`invariant_tensor` are the
full symmetrizations of ``I^{x alpha/2}``.  Their entries depend only on how
often each index value occurs and vanish unless every count is even; the
closed form used here is the pairing-count formula
``(alpha/2)! (2i)! (2j)! (2k)! / (alpha! i! j! k!)`` for an index with value
counts ``(2i, 2j, 2k)``, evaluated in exact rational arithmetic.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

import numpy as np

__all__ = [
    "binom_identity_check",
    "index_class_ids",
    "inner",
    "invariant_tensor",
    "mode1_multiply",
    "outer_power",
    "rotate",
    "rotate_tuple",
    "sym_coordinates",
    "symmetrize",
    "tensor_from_class_values",
    "tuple_norm",
]

MAX_RANK = 12  # dense storage: 3**12 entries is the supported ceiling


def _check_rank(alpha: int) -> int:
    if not isinstance(alpha, (int, np.integer)) or alpha < 1:
        raise ValueError(f"tensor rank must be a positive integer, got {alpha!r}")
    if alpha > MAX_RANK:
        raise ValueError(f"tensor rank {alpha} exceeds the dense-storage limit {MAX_RANK}")
    return int(alpha)


def outer_power(v, alpha: int) -> np.ndarray:
    """``alpha``-fold outer power of a 3-vector, shape ``(3,) * alpha``."""
    alpha = _check_rank(alpha)
    v = np.asarray(v, dtype=float).reshape(3)
    out = v
    for _ in range(alpha - 1):
        out = np.multiply.outer(out, v)
    return out


@lru_cache(maxsize=None)
def _classes(alpha: int):
    """Index-count classes of rank-``alpha`` tensors.

    Returns ``(ids, counts, mult)`` where ``ids`` maps each flat index to its
    class, ``counts`` lists the value-count triple (n0, n1, n2) of every class
    and ``mult`` the number of indices in it.
    """
    digits = np.unravel_index(np.arange(3**alpha), (3,) * alpha)
    occ = np.zeros((3**alpha, 3), dtype=np.int64)
    for d in digits:
        for v in range(3):
            occ[:, v] += d == v
    counts = [(a, b, alpha - a - b) for a in range(alpha + 1) for b in range(alpha + 1 - a)]
    lookup = {c: i for i, c in enumerate(counts)}
    ids = np.array([lookup[tuple(row)] for row in occ], dtype=np.int64)
    mult = np.array([math.factorial(alpha) // (math.factorial(a) * math.factorial(b) * math.factorial(c))
                     for a, b, c in counts], dtype=np.int64)
    ids.setflags(write=False)
    mult.setflags(write=False)
    return ids, tuple(counts), mult


def index_class_ids(alpha: int) -> np.ndarray:
    """Flat-index -> symmetry-class map for rank ``alpha`` (read-only)."""
    return _classes(_check_rank(alpha))[0]


@lru_cache(maxsize=None)
def invariant_tensor(alpha: int) -> np.ndarray:
    """The symmetrized identity power: rank-``alpha`` isotropic symmetric tensor.

    For even ``alpha`` this is ``symm(I^{x alpha/2})`` with
    ``<v^{x alpha}, M> = 1`` for every unit ``v`` and ``|M|^2 = alpha + 1``;
    odd ranks have no nonzero isotropic symmetric tensor and return zeros.
    The returned array is cached and read-only.
    """
    alpha = _check_rank(alpha)
    if alpha % 2 == 1:
        out = np.zeros((3,) * alpha)
        out.setflags(write=False)
        return out
    ids, counts, _ = _classes(alpha)
    half = alpha // 2
    vals = np.zeros(len(counts))
    for ci, (a, b, c) in enumerate(counts):
        if a % 2 or b % 2 or c % 2:
            continue
        num = math.factorial(half) * math.factorial(a) * math.factorial(b) * math.factorial(c)
        den = (math.factorial(alpha) * math.factorial(a // 2)
               * math.factorial(b // 2) * math.factorial(c // 2))
        vals[ci] = float(Fraction(num, den))
    out = vals[ids].reshape((3,) * alpha)
    out.setflags(write=False)
    return out


def inner(a, b) -> float:
    """Euclidean inner product of two tensor tuples with matching signatures."""
    if len(a) != len(b):
        raise ValueError(f"tuple lengths differ: {len(a)} vs {len(b)}")
    total = 0.0
    for i, (x, y) in enumerate(zip(a, b)):
        if x.shape != y.shape:
            raise ValueError(f"component {i} rank mismatch: {x.shape} vs {y.shape}")
        total += float(np.dot(x.ravel(), y.ravel()))
    return total


def tuple_norm(a) -> float:
    return math.sqrt(max(0.0, inner(a, a)))


def rotate(r, t: np.ndarray) -> np.ndarray:
    """Apply ``R`` to every mode of ``t``: the action of ``R^{x rank}``.

    ``r`` may be a 3x3 array or anything with a ``matrix`` attribute.  Norm
    preserving (orthogonality of ``R`` carries over to the Kronecker power).
    """
    m = np.asarray(getattr(r, "matrix", r), dtype=float)
    if m.shape != (3, 3):
        raise ValueError(f"expected a 3x3 rotation matrix, got shape {m.shape}")
    t = np.asarray(t, dtype=float)
    # Contract the leading mode and cycle it to the back; after `rank` rounds
    # every mode has been hit once and the axis order is restored.
    for _ in range(t.ndim):
        t = np.moveaxis(np.tensordot(m, t, axes=(1, 0)), 0, -1)
    return t


def rotate_tuple(r, tensors) -> tuple[np.ndarray, ...]:
    """Apply :func:`rotate` to every component of a tensor tuple."""
    return tuple(rotate(r, t) for t in tensors)


def mode1_multiply(m: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Contract a 3x3 matrix into the first mode only, leaving the rest alone."""
    m = np.asarray(m, dtype=float)
    if m.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {m.shape}")
    return np.tensordot(m, np.asarray(t, dtype=float), axes=(1, 0))


def symmetrize(t: np.ndarray) -> np.ndarray:
    """Full symmetrization over all index permutations.

    Entries within one index-count class are replaced by their class mean,
    which equals the average over all rank! permutations at 3^rank cost.
    """
    t = np.asarray(t, dtype=float)
    ids, _, mult = _classes(t.ndim)
    sums = np.bincount(ids, weights=t.ravel(), minlength=len(mult))
    return (sums / mult)[ids].reshape(t.shape)


def sym_coordinates(t: np.ndarray) -> np.ndarray:
    """Coordinates of a symmetric tensor in an orthonormal basis of its class space.

    The basis vector of a class is the normalized sum of the unit tensors of
    its indices, so this map is a linear isometry on symmetric tensors and
    shrinks rank-``alpha`` data from 3^alpha to (alpha+2)(alpha+1)/2 numbers.
    """
    t = np.asarray(t, dtype=float)
    ids, _, mult = _classes(t.ndim)
    sums = np.bincount(ids, weights=t.ravel(), minlength=len(mult))
    return sums / np.sqrt(mult)


def tensor_from_class_values(vals: np.ndarray, alpha: int) -> np.ndarray:
    """Dense symmetric tensor whose entry at each index is its class value."""
    ids, counts, _ = _classes(_check_rank(alpha))
    vals = np.asarray(vals, dtype=float)
    if vals.shape != (len(counts),):
        raise ValueError(f"expected {len(counts)} class values, got shape {vals.shape}")
    return vals[ids].reshape((3,) * alpha)


def class_counts(alpha: int) -> tuple[tuple[int, int, int], ...]:
    """Value-count triples of all index classes of rank ``alpha``, fixed order."""
    return _classes(_check_rank(alpha))[1]


def binom_identity_check(alpha: int) -> tuple[int, int]:
    """Exact integer check of the pairing-count identity behind the invariant tensors.

    For even rank the aggregate pairing count satisfies
    ``(alpha+1) C(alpha, alpha/2) = sum C(2i, i) C(2j, j) C(2k, k)`` over all
    ``i + j + k = alpha/2``.  Returns both sides as exact Python integers.
    """
    if not isinstance(alpha, (int, np.integer)) or alpha < 2 or alpha % 2:
        raise ValueError(f"the identity concerns even ranks >= 2, got {alpha!r}")
    alpha = int(alpha)
    half = alpha // 2
    lhs = (alpha + 1) * math.comb(alpha, half)
    rhs = 0
    for i in range(half + 1):
        for j in range(half + 1 - i):
            k = half - i - j
            rhs += math.comb(2 * i, i) * math.comb(2 * j, j) * math.comb(2 * k, k)
    return lhs, rhs
