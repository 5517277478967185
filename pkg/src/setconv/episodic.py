"""Episodic training: imbalance-preserving episodes, the episode loss and Adam."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, InsufficientDataError
from .layer import (
    PARAM_NAMES,
    SetConvGrads,
    SetConvParams,
    backward_sets,
    compute_anchor,
    forward_sets,
    init_params,
)
from .linalg import Rng, as_matrix, make_rng

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    support_size: int = 64
    iterations: int = 2000
    learning_rate: float = 0.01
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    hidden: int = 128
    d_out: int = 128
    seed: int = 0
    anchor_cap: int | None = None

    def __post_init__(self):
        if self.support_size < 2:
            raise ConfigError(f"support_size must be >= 2, got {self.support_size}")
        if self.iterations < 0:
            raise ConfigError(f"iterations must be >= 0, got {self.iterations}")
        for name in ("learning_rate", "adam_beta1", "adam_beta2"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ConfigError(f"{name} must lie in (0, 1), got {v}")
        if self.adam_epsilon <= 0:
            raise ConfigError("adam_epsilon must be positive")
        if self.hidden < 1 or self.d_out < 1:
            raise ConfigError("hidden and d_out must be >= 1")


@dataclass
class Episode:
    support_maj: np.ndarray
    support_min: np.ndarray
    query_maj: np.ndarray
    query_min: np.ndarray
    # row indices into the majority / minority pools, kept for inspection
    maj_index: np.ndarray = field(repr=False, default=None)
    min_index: np.ndarray = field(repr=False, default=None)


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_support(support_size: int, n_maj: int, n_min: int) -> tuple[int, int]:
    """Majority/minority counts of a support set that keeps the class ratio.

    The minority share is rounded half-up and clamped so both classes appear.
    """
    if support_size < 2:
        raise ConfigError(f"support_size must be >= 2, got {support_size}")
    if n_maj < 1 or n_min < 1:
        raise InsufficientDataError("both classes need at least one sample")
    n2 = round_half_up(support_size * n_min / (n_min + n_maj))
    n2 = min(max(n2, 1), support_size - 1)
    return support_size - n2, n2


def sample_episode(x_maj, x_min, support_size: int, rng: Rng) -> Episode:
    """Draw one episode from the two class pools.

    Support rows are sampled without replacement within each class, and each
    query is a further row of its class that is not in the support. When a
    class is too small for its quota the support takes every row but the query.
    """
    x_maj = as_matrix(x_maj, "x_maj")
    x_min = as_matrix(x_min, "x_min")
    n_maj, n_min = x_maj.shape[0], x_min.shape[0]
    if n_maj < 2 or n_min < 2:
        raise InsufficientDataError(
            f"each class needs >= 2 samples for an episode (got {n_maj} and {n_min})"
        )
    n1, n2 = split_support(support_size, n_maj, n_min)
    n1 = min(n1, n_maj - 1)
    n2 = min(n2, n_min - 1)
    maj_idx = rng.choice(n_maj, size=n1 + 1, replace=False)
    min_idx = rng.choice(n_min, size=n2 + 1, replace=False)
    return Episode(
        support_maj=x_maj[maj_idx[:-1]],
        support_min=x_min[min_idx[:-1]],
        query_maj=x_maj[maj_idx[-1]],
        query_min=x_min[min_idx[-1]],
        maj_index=maj_idx,
        min_index=min_idx,
    )


def _log_softmax2(a: float, b: float) -> tuple[float, float]:
    m = max(a, b)
    lse = m + math.log(math.exp(a - m) + math.exp(b - m))
    return a - lse, b - lse


def episode_loss(v_maj_s, v_min_s, v_maj_q, v_min_q) -> float:
    """Mean cross-entropy of the two queries against the two representatives."""
    return episode_loss_and_grads(v_maj_s, v_min_s, v_maj_q, v_min_q)[0]


def episode_loss_and_grads(v_maj_s, v_min_s, v_maj_q, v_min_q):
    """Loss plus its gradients w.r.t. the four embeddings (same order)."""
    vs = [np.asarray(v, dtype=np.float64) for v in (v_maj_s, v_min_s, v_maj_q, v_min_q)]
    if len({v.shape for v in vs}) != 1 or vs[0].ndim != 1:
        raise DimensionError("all four embeddings must be vectors of equal length")
    s_maj, s_min, q_maj, q_min = vs
    grads = [np.zeros_like(v) for v in vs]
    loss = 0.0
    for qi, (q, target) in enumerate(((q_maj, 0), (q_min, 1))):
        logp = _log_softmax2(float(q @ s_maj), float(q @ s_min))
        loss -= logp[target]
        p = [math.exp(lp) for lp in logp]
        # d(-log p_target)/d logit_c = p_c - [c == target], halved for the mean
        dl = [0.5 * (p[0] - (target == 0)), 0.5 * (p[1] - (target == 1))]
        grads[0] += dl[0] * q
        grads[1] += dl[1] * q
        grads[2 + qi] += dl[0] * s_maj + dl[1] * s_min
    return 0.5 * loss, grads


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def zeros(cls, params: SetConvParams) -> "AdamState":
        return cls(
            m={k: np.zeros_like(a) for k, a in params.arrays().items()},
            v={k: np.zeros_like(a) for k, a in params.arrays().items()},
        )


def adam_step(
    params: SetConvParams, grads: SetConvGrads, state: AdamState, config: TrainConfig
) -> tuple[SetConvParams, AdamState]:
    """One bias-corrected Adam update. Inputs are not modified."""
    b1, b2, lr, eps = config.adam_beta1, config.adam_beta2, config.learning_rate, config.adam_epsilon
    t = state.step + 1
    bc1 = 1.0 - b1**t
    bc2 = 1.0 - b2**t
    new, m_new, v_new = {}, {}, {}
    p_arr, g_arr = params.arrays(), grads.arrays()
    for k in PARAM_NAMES:
        p, g = p_arr[k], g_arr[k]
        if g.shape != p.shape or state.m[k].shape != p.shape:
            raise DimensionError(f"shape mismatch for {k}: param {p.shape}, grad {g.shape}")
        m = b1 * state.m[k] + (1.0 - b1) * g
        v = b2 * state.v[k] + (1.0 - b2) * (g * g)
        new[k] = p - lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
        m_new[k], v_new[k] = m, v
    return SetConvParams(**new), AdamState(m=m_new, v=v_new, step=t)


@dataclass
class TrainResult:
    params: SetConvParams
    anchor: np.ndarray
    losses: list[float]


def episode_step(params: SetConvParams, anchor, ep: Episode) -> tuple[float, SetConvGrads]:
    """Loss of one episode and the gradient of that loss."""
    sets = [ep.support_maj, ep.support_min, ep.query_maj[None, :], ep.query_min[None, :]]
    emb, cache = forward_sets(sets, params, anchor)
    loss, d_emb = episode_loss_and_grads(*emb)
    return loss, backward_sets(cache, np.stack(d_emb))


def train(x_maj, x_min, config: TrainConfig, on_iteration=None) -> TrainResult:
    """Train a layer on a binary problem given its majority and minority rows.

    The anchor is computed once from ``x_min`` and stays fixed. ``on_iteration``
    (if given) is called as ``on_iteration(iteration, loss)`` after every step.
    """
    x_maj = as_matrix(x_maj, "x_maj")
    x_min = as_matrix(x_min, "x_min")
    if x_maj.shape[1] != x_min.shape[1]:
        raise DimensionError("class pools differ in feature dimension")
    if x_maj.shape[0] < 2 or x_min.shape[0] < 2:
        raise InsufficientDataError("each class needs >= 2 samples")
    rng = make_rng(config.seed)
    params = init_params(x_maj.shape[1], config.d_out, config.hidden, rng)
    anchor = compute_anchor(x_min, cap=config.anchor_cap, rng=rng)
    state = AdamState.zeros(params)
    losses: list[float] = []
    for it in range(config.iterations):
        ep = sample_episode(x_maj, x_min, config.support_size, rng)
        loss, grads = episode_step(params, anchor, ep)
        params, state = adam_step(params, grads, state, config)
        losses.append(loss)
        if on_iteration is not None:
            on_iteration(it, loss)
        if it % 500 == 0:
            log.debug("iteration %d loss %.6f", it, loss)
    return TrainResult(params=params, anchor=anchor, losses=losses)
