"""Dense primitives and seeded randomness.

Matrices and vectors are plain C-ordered ``float64`` numpy arrays. Row-major
storage means :func:`concat_rows` is a reshape, not a copy.

Randomness comes from numpy's ``PCG64`` bit generator (O'Neill's permuted
congruential generator, 128-bit state, 64-bit output). Gaussian draws are
produced here with the Box-Muller transform on top of ``Generator.random`` so
that the sampled values depend only on the uniform stream.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, EmptyInputError, InvalidPermutationError

Rng = np.random.Generator


def make_rng(seed: int | np.random.SeedSequence, *stream: int) -> Rng:
    """PCG64 generator; ``stream`` selects an independent substream of ``seed``."""
    if stream:
        seed = np.random.SeedSequence(seed, spawn_key=stream)
    return np.random.Generator(np.random.PCG64(seed))


def derive_seeds(seed: int, n: int) -> list[int]:
    """Independent 64-bit child seeds, stable for a given parent seed."""
    children = np.random.SeedSequence(seed).spawn(n)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


def standard_normal(rng: Rng, shape) -> np.ndarray:
    """Standard normal draws via Box-Muller on two uniform streams."""
    size = int(np.prod(shape, dtype=np.int64))
    half = (size + 1) // 2
    u1 = 1.0 - rng.random(half)  # (0, 1], keeps log finite
    u2 = rng.random(half)
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.concatenate([r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)])
    return z[:size].reshape(shape)


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    m = np.ascontiguousarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {m.shape}")
    return m


def as_vector(a, name: str = "vector") -> np.ndarray:
    v = np.ascontiguousarray(a, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {v.shape}")
    return v


def softmax_columns(w) -> np.ndarray:
    """Softmax over axis 0: every column of the result sums to one.

    The per-column maximum is subtracted first so large inputs cannot
    overflow.
    """
    w = as_matrix(w, "w")
    e = np.exp(w - w.max(axis=0, keepdims=True))
    return e / e.sum(axis=0, keepdims=True)


def khatri_rao(a, b) -> np.ndarray:
    """Column-wise Kronecker product.

    ``out[i * d + j, k] == a[i, k] * b[j, k]`` for ``a`` of shape (N, K) and
    ``b`` of shape (d, K).
    """
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[1]:
        raise DimensionError(f"column mismatch: {a.shape[1]} vs {b.shape[1]}")
    n, k = a.shape
    d = b.shape[0]
    return (a[:, None, :] * b[None, :, :]).reshape(n * d, k)


def concat_rows(x) -> np.ndarray:
    """Flatten an (N, d) matrix into one row vector of length N*d."""
    x = as_matrix(x, "x")
    if x.size == 0:
        raise EmptyInputError("cannot concatenate an empty matrix")
    return x.reshape(-1)


def dot(a, b) -> float:
    a = as_vector(a, "a")
    b = as_vector(b, "b")
    if a.shape != b.shape:
        raise DimensionError(f"dot of dim {a.shape[0]} with dim {b.shape[0]}")
    return float(a @ b)


def matvec(m, v) -> np.ndarray:
    m = as_matrix(m, "m")
    v = as_vector(v, "v")
    if m.shape[1] != v.shape[0]:
        raise DimensionError(f"matvec {m.shape} @ ({v.shape[0]},)")
    return m @ v


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul {a.shape} @ {b.shape}")
    return a @ b


def check_permutation(pi, n: int | None = None) -> np.ndarray:
    p = np.asarray(pi)
    if p.ndim != 1 or not np.issubdtype(p.dtype, np.integer):
        raise InvalidPermutationError("permutation must be a 1-D integer array")
    if n is not None and p.shape[0] != n:
        raise InvalidPermutationError(f"permutation of length {p.shape[0]}, expected {n}")
    if not np.array_equal(np.sort(p), np.arange(p.shape[0])):
        raise InvalidPermutationError("not a bijection on 0..n-1")
    return p


def invert_permutation(pi) -> np.ndarray:
    p = check_permutation(pi)
    inv = np.empty_like(p)
    inv[p] = np.arange(p.shape[0])
    return inv


def apply_permutation(pi, x) -> np.ndarray:
    """Reorder rows: row ``i`` of the result is row ``pi[i]`` of ``x``."""
    x = as_matrix(x, "x")
    p = check_permutation(pi, x.shape[0])
    return x[p]


def permutation_matrix(pi) -> np.ndarray:
    """The N x N matrix P with ``P @ x == apply_permutation(pi, x)``."""
    p = check_permutation(pi)
    m = np.zeros((p.shape[0], p.shape[0]))
    m[np.arange(p.shape[0]), p] = 1.0
    return m
