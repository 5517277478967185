"""The set-convolution layer.

For a set ``X`` of ``N`` samples (rows) and a fixed anchor ``y`` the layer
computes

    h = (1/N) * sum_i  x_i @ K_i,     K_i[:, k] = g1(y - x_i)[k] * g2[:, k]

where ``g1`` is a small MLP applied row-wise to the offsets from the anchor and
``g2 = softmax_columns(W)`` is a feature-level attention matrix. Stacking the
per-sample kernels gives the Khatri-Rao product ``g1(y - X) ⊛ g2`` of shape
(N*d, d_o), and ``h`` is the flattened set times that matrix, divided by N.

Because ``K_i`` is rank-one in its output column, the fused evaluation used by
:func:`setconv_forward` never materialises the kernels:

    h = mean_i( g1(y - x_i) * (x_i @ g2) )

:func:`setconv_forward_naive` builds the full (N, d, d_o) kernel tensor and
serves as the reference for the fused path.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionError, EmptyInputError
from .linalg import Rng, as_matrix, as_vector, softmax_columns

PARAM_NAMES = ("w", "w1", "b1", "w2", "b2")


@dataclass
class SetConvParams:
    """Learnable state of one layer.

    w  : (d, d_o)  pre-softmax attention weights
    w1 : (d, H), b1 : (H,)      hidden layer of g1 (ReLU)
    w2 : (H, d_o), b2 : (d_o,)  linear output layer of g1
    """

    w: np.ndarray
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        for name in PARAM_NAMES:
            setattr(self, name, np.ascontiguousarray(getattr(self, name), dtype=np.float64))
        d, d_o = self.w.shape
        h = self.w1.shape[1]
        expected = {"w": (d, d_o), "w1": (d, h), "b1": (h,), "w2": (h, d_o), "b2": (d_o,)}
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise DimensionError(
                    f"{name} has shape {getattr(self, name).shape}, expected {shape}"
                )

    @property
    def d(self) -> int:
        return self.w.shape[0]

    @property
    def d_out(self) -> int:
        return self.w.shape[1]

    @property
    def hidden(self) -> int:
        return self.w1.shape[1]

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self) -> "SetConvParams":
        return SetConvParams(**{k: v.copy() for k, v in self.arrays().items()})

    def zeros_like(self) -> "SetConvParams":
        return SetConvParams(**{k: np.zeros_like(v) for k, v in self.arrays().items()})

    def __add__(self, other: "SetConvParams") -> "SetConvParams":
        a, b = self.arrays(), other.arrays()
        return SetConvParams(**{k: a[k] + b[k] for k in PARAM_NAMES})

    def equals(self, other: "SetConvParams") -> bool:
        """Exact (bitwise value) equality of every array."""
        a, b = self.arrays(), other.arrays()
        return all(np.array_equal(a[k], b[k]) for k in PARAM_NAMES)


# Gradients have exactly the parameter layout.
SetConvGrads = SetConvParams


def init_params(d: int, d_out: int, hidden: int, rng: Rng) -> SetConvParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    if min(d, d_out, hidden) < 1:
        raise DimensionError(f"dimensions must be >= 1, got d={d}, d_out={d_out}, hidden={hidden}")
    sd = 1.0 / np.sqrt(d)
    sh = 1.0 / np.sqrt(hidden)
    w = rng.uniform(-sd, sd, size=(d, d_out))
    w1 = rng.uniform(-sd, sd, size=(d, hidden))
    w2 = rng.uniform(-sh, sh, size=(hidden, d_out))
    return SetConvParams(w=w, w1=w1, b1=np.zeros(hidden), w2=w2, b2=np.zeros(d_out))


def compute_anchor(minority, cap: int | None = None, rng: Rng | None = None) -> np.ndarray:
    """Feature-wise mean of the minority-class samples.

    If ``cap`` is given and there are more rows than that, a random subset of
    ``cap`` rows (drawn with ``rng``) is averaged instead.
    """
    x = as_matrix(minority, "minority")
    if x.shape[0] == 0:
        raise EmptyInputError("anchor needs at least one minority sample")
    if cap is not None and x.shape[0] > cap:
        if rng is None:
            raise ValueError("an rng is required when subsampling the anchor")
        x = x[rng.choice(x.shape[0], size=cap, replace=False)]
    return x.mean(axis=0)


def mlp(z: np.ndarray, params: SetConvParams) -> np.ndarray:
    """g1 applied row-wise."""
    return np.maximum(z @ params.w1 + params.b1, 0.0) @ params.w2 + params.b2


def _check(x, params: SetConvParams, anchor) -> tuple[np.ndarray, np.ndarray]:
    x = as_matrix(x, "x")
    y = as_vector(anchor, "anchor")
    if x.shape[0] == 0:
        raise EmptyInputError("set convolution over an empty set")
    if x.shape[1] != params.d:
        raise DimensionError(f"set has {x.shape[1]} features, layer expects {params.d}")
    if y.shape[0] != params.d:
        raise DimensionError(f"anchor has dim {y.shape[0]}, layer expects {params.d}")
    return x, y


@dataclass
class _Cache:
    x: np.ndarray
    z: np.ndarray
    pre: np.ndarray
    act: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    proj: np.ndarray
    bounds: np.ndarray
    params: SetConvParams


def forward_sets(sets: Sequence, params: SetConvParams, anchor) -> tuple[np.ndarray, _Cache]:
    """Embed several sets in one pass.

    Returns an array of shape (len(sets), d_o), one embedding per set, plus
    the intermediate values needed by :func:`backward_sets`.
    """
    if len(sets) == 0:
        raise EmptyInputError("no sets given")
    checked = [_check(s, params, anchor)[0] for s in sets]
    y = as_vector(anchor, "anchor")
    x = np.concatenate(checked, axis=0) if len(checked) > 1 else checked[0]
    sizes = np.array([s.shape[0] for s in checked])
    bounds = np.concatenate([[0], np.cumsum(sizes)])

    z = y - x
    pre = z @ params.w1 + params.b1
    act = np.maximum(pre, 0.0)
    g1 = act @ params.w2 + params.b2
    g2 = softmax_columns(params.w)
    proj = x @ g2
    rows = g1 * proj
    out = np.add.reduceat(rows, bounds[:-1], axis=0) / sizes[:, None]
    return out, _Cache(x, z, pre, act, g1, g2, proj, bounds, params)


def backward_sets(cache: _Cache, upstream) -> SetConvGrads:
    """Gradient of ``sum(upstream * out)`` w.r.t. every parameter."""
    up = np.asarray(upstream, dtype=np.float64)
    k = cache.bounds.shape[0] - 1
    if up.shape != (k, cache.params.d_out):
        raise DimensionError(f"upstream has shape {up.shape}, expected {(k, cache.params.d_out)}")
    sizes = np.diff(cache.bounds)
    d_rows = np.repeat(up / sizes[:, None], sizes, axis=0)

    d_g1 = d_rows * cache.proj
    d_proj = d_rows * cache.g1
    d_g2 = cache.x.T @ d_proj
    g2 = cache.g2
    d_w = g2 * (d_g2 - (d_g2 * g2).sum(axis=0, keepdims=True))

    p = cache.params
    d_b2 = d_g1.sum(axis=0)
    d_w2 = cache.act.T @ d_g1
    d_pre = (d_g1 @ p.w2.T) * (cache.pre > 0.0)
    d_w1 = cache.z.T @ d_pre
    d_b1 = d_pre.sum(axis=0)
    return SetConvGrads(w=d_w, w1=d_w1, b1=d_b1, w2=d_w2, b2=d_b2)


def setconv_forward(x, params: SetConvParams, anchor) -> np.ndarray:
    """Embedding of the set ``x`` (N, d) as a vector of length d_o."""
    out, _ = forward_sets([x], params, anchor)
    return out[0]


def setconv_backward(x, params: SetConvParams, anchor, upstream_grad) -> SetConvGrads:
    u = as_vector(upstream_grad, "upstream_grad")
    _, cache = forward_sets([x], params, anchor)
    return backward_sets(cache, u[None, :])


def kernel_tensor(x, params: SetConvParams, anchor) -> np.ndarray:
    """Per-sample kernels, shape (N, d, d_o)."""
    x, y = _check(x, params, anchor)
    g1 = mlp(y - x, params)
    g2 = softmax_columns(params.w)
    return g1[:, None, :] * g2[None, :, :]


def setconv_forward_naive(x, params: SetConvParams, anchor) -> np.ndarray:
    """Reference evaluation: tensor dot of the set with its explicit kernels."""
    x, _ = _check(x, params, anchor)
    g = kernel_tensor(x, params, anchor)
    return np.tensordot(x, g, axes=([0, 1], [0, 1])) / x.shape[0]


def embed_singletons(x, params: SetConvParams, anchor) -> np.ndarray:
    """Embed every row of ``x`` as its own one-element set; shape (n, d_o)."""
    x, y = _check(x, params, anchor)
    return mlp(y - x, params) * (x @ softmax_columns(params.w))
