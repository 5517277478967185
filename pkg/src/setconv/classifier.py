"""Post-training, inference and the one-vs-all reduction.

A binary problem is always handled as majority vs minority: the minority
label is the less frequent one in the training data (on equal counts, the
smaller label value). After episodic training, a one-off post-training pass
embeds a sample of the training rows of each class as a single set to get the
class representatives. A query is embedded as a one-element set and scored
against both representatives by dot product, followed by a two-way softmax.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset
from .episodic import TrainConfig, round_half_up, train
from .errors import DimensionError, EmptyInputError, InsufficientDataError
from .layer import SetConvParams, embed_singletons, forward_sets, setconv_forward
from .linalg import Rng, as_matrix, as_vector, derive_seeds, make_rng

POST_TRAIN_STREAM = 1


@dataclass
class TrainedModel:
    params: SetConvParams
    anchor: np.ndarray
    majority_label: int
    minority_label: int
    seed: int = 0

    @property
    def d(self) -> int:
        return self.params.d

    @property
    def d_out(self) -> int:
        return self.params.d_out

    @property
    def labels(self) -> tuple[int, int]:
        return (self.majority_label, self.minority_label)


@dataclass
class ClassRepresentatives:
    majority: np.ndarray
    minority: np.ndarray

    def stacked(self) -> np.ndarray:
        return np.stack([self.majority, self.minority])


@dataclass
class BinaryClassifier:
    model: TrainedModel
    reps: ClassRepresentatives
    metadata: dict = field(default_factory=dict)


@dataclass
class OneVsAllModel:
    """One binary head per class; head ``c`` separates label ``c`` (coded 1)
    from all other labels (coded 0)."""

    labels: tuple[int, ...]
    heads: list[BinaryClassifier]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.labels) < 2 or len(set(self.labels)) != len(self.labels):
            raise ValueError("need at least two distinct class labels")
        if len(self.heads) != len(self.labels):
            raise ValueError("one head per class label")

    @property
    def d(self) -> int:
        return self.heads[0].model.d


def minority_majority(labels) -> tuple[int, int]:
    values, counts = np.unique(np.asarray(labels), return_counts=True)
    if values.size != 2:
        raise InsufficientDataError(f"binary training needs exactly 2 labels, got {values.size}")
    order = np.lexsort((values, counts))  # by count, ties -> smaller label first
    return int(values[order[1]]), int(values[order[0]])


def train_binary(features, labels, config: TrainConfig, on_iteration=None):
    """Episodic training on a two-label problem; returns ``(TrainedModel, losses)``."""
    x = as_matrix(features, "features")
    y = np.asarray(labels)
    maj, mino = minority_majority(y)
    res = train(x[y == maj], x[y == mino], config, on_iteration=on_iteration)
    model = TrainedModel(res.params, res.anchor, maj, mino, seed=config.seed)
    return model, res.losses


def post_train_quotas(counts: dict[int, int], s_post_size: int) -> dict[int, int]:
    """Rows per class for post-training: proportional, at least one, capped at the class size."""
    n = sum(counts.values())
    m = min(s_post_size, n)
    return {c: min(n_c, max(1, round_half_up(m * n_c / n))) for c, n_c in counts.items()}


def post_train(
    model: TrainedModel, features, labels, s_post_size: int = 1000, rng: Rng | None = None
) -> ClassRepresentatives:
    """Class representatives from a random subset of the training data.

    Parameters are only read, never updated.
    """
    x = as_matrix(features, "features")
    y = np.asarray(labels)
    if rng is None:
        rng = make_rng(model.seed, POST_TRAIN_STREAM)
    counts = {c: int(np.sum(y == c)) for c in model.labels}
    if any(n == 0 for n in counts.values()):
        raise EmptyInputError(f"post-training needs rows of both classes, got counts {counts}")
    quotas = post_train_quotas(counts, s_post_size)
    sets = []
    for c in model.labels:
        rows = np.flatnonzero(y == c)
        take = rows[rng.choice(rows.size, size=quotas[c], replace=False)]
        sets.append(x[np.sort(take)])
    emb, _ = forward_sets(sets, model.params, model.anchor)
    return ClassRepresentatives(majority=emb[0], minority=emb[1])


def _two_way_softmax(s_maj, s_min):
    m = np.maximum(s_maj, s_min)
    e_maj = np.exp(s_maj - m)
    e_min = np.exp(s_min - m)
    z = e_maj + e_min
    return e_maj / z, e_min / z


def predict_proba_binary(x, model: TrainedModel, reps: ClassRepresentatives) -> tuple[float, float]:
    """``(p_majority, p_minority)`` for one sample."""
    v = as_vector(x, "x")
    if v.shape[0] != model.d:
        raise DimensionError(f"sample has dim {v.shape[0]}, model expects {model.d}")
    h = setconv_forward(v[None, :], model.params, model.anchor)
    p_maj, p_min = _two_way_softmax(float(h @ reps.majority), float(h @ reps.minority))
    return float(p_maj), float(p_min)


def binary_proba(features, model: TrainedModel, reps: ClassRepresentatives) -> np.ndarray:
    """Vectorised :func:`predict_proba_binary`; columns are (majority, minority)."""
    x = as_matrix(features, "features")
    if x.shape[1] != model.d:
        raise DimensionError(f"data has {x.shape[1]} features, model expects {model.d}")
    h = embed_singletons(x, model.params, model.anchor)
    p_maj, p_min = _two_way_softmax(h @ reps.majority, h @ reps.minority)
    return np.column_stack([p_maj, p_min])


def predict_binary(x, model: TrainedModel, reps: ClassRepresentatives) -> int:
    """Most probable label; an exact tie goes to the minority class."""
    p_maj, p_min = predict_proba_binary(x, model, reps)
    return model.minority_label if p_min >= p_maj else model.majority_label


def predict_binary_batch(features, model: TrainedModel, reps: ClassRepresentatives) -> np.ndarray:
    p = binary_proba(features, model, reps)
    return np.where(p[:, 1] >= p[:, 0], model.minority_label, model.majority_label)


def fit_binary(ds: Dataset, config: TrainConfig, s_post_size: int = 1000, on_iteration=None):
    """Train and post-train on ``ds``; returns ``(BinaryClassifier, losses)``."""
    model, losses = train_binary(ds.features, ds.labels, config, on_iteration)
    reps = post_train(model, ds.features, ds.labels, s_post_size)
    return BinaryClassifier(model, reps), losses


def binary_logit(features, model: TrainedModel, reps: ClassRepresentatives) -> np.ndarray:
    """Minority-vs-majority log-odds ``h(x) . v_min - h(x) . v_maj`` per row."""
    x = as_matrix(features, "features")
    if x.shape[1] != model.d:
        raise DimensionError(f"data has {x.shape[1]} features, model expects {model.d}")
    h = embed_singletons(x, model.params, model.anchor)
    return h @ reps.minority - h @ reps.majority


def positive_logit(head: BinaryClassifier, features) -> np.ndarray:
    """Log-odds of the label coded 1 for a one-vs-all head."""
    z = binary_logit(features, head.model, head.reps)
    return z if head.model.minority_label == 1 else -z


def positive_score(head: BinaryClassifier, features) -> np.ndarray:
    """P(label coded 1 | x) for a one-vs-all head."""
    p = binary_proba(features, head.model, head.reps)
    return p[:, 1] if head.model.minority_label == 1 else p[:, 0]


def train_one_vs_all(ds: Dataset, config: TrainConfig, s_post_size: int = 1000, on_iteration=None):
    """One independent binary head per class, each with its own derived seed.

    Head ``c`` relabels the data as 1 (label ``c``) vs 0 (any other label), so
    its anchor comes from whichever of the two sides is smaller. Returns
    ``(OneVsAllModel, losses)`` with ``losses[i]`` the log of head ``i``.
    ``on_iteration`` is called as ``on_iteration(label, iteration, loss)``.
    """
    labels = tuple(int(c) for c in ds.classes)
    if len(labels) < 2:
        raise InsufficientDataError("one-vs-all needs at least two classes")
    for c, n_c in ds.class_counts().items():
        if n_c < 2:
            raise InsufficientDataError(f"class {c} has {n_c} sample(s), need >= 2")
    seeds = derive_seeds(config.seed, len(labels))
    heads, logs = [], []
    for c, seed in zip(labels, seeds):
        coded = (ds.labels == c).astype(np.int64)
        cb = None if on_iteration is None else (lambda it, loss, c=c: on_iteration(c, it, loss))
        head, losses = fit_binary(Dataset(ds.features, coded), replace(config, seed=seed), s_post_size, cb)
        heads.append(head)
        logs.append(losses)
    return OneVsAllModel(labels, heads), logs


def multiclass_scores(features, ova: OneVsAllModel) -> np.ndarray:
    """Per-head scores P(y=c|x), shape (n, C); rows are not normalised."""
    x = as_matrix(features, "features")
    return np.column_stack([positive_score(h, x) for h in ova.heads])


def multiclass_logits(features, ova: OneVsAllModel) -> np.ndarray:
    """Per-head log-odds; same ordering as :func:`multiclass_scores` but without
    the saturation of probabilities at 0 and 1."""
    x = as_matrix(features, "features")
    return np.column_stack([positive_logit(h, x) for h in ova.heads])


def predict_multiclass_batch(features, ova: OneVsAllModel) -> tuple[np.ndarray, np.ndarray]:
    """Labels and per-head scores for every row.

    The argmax is taken over the heads' log-odds, which orders classes exactly
    as the probabilities do (the logistic map is increasing) but keeps apart
    heads whose probabilities both round to 1.0. Exact ties go to the lowest
    class index.
    """
    x = as_matrix(features, "features")
    if x.shape[1] != ova.d:
        raise DimensionError(f"data has {x.shape[1]} features, model expects {ova.d}")
    logits = multiclass_logits(x, ova)
    scores = multiclass_scores(x, ova)
    return np.asarray(ova.labels)[np.argmax(logits, axis=1)], scores


def predict_multiclass(x, ova: OneVsAllModel) -> tuple[int, np.ndarray]:
    """Label with the highest head score and all head scores for one sample."""
    v = as_vector(x, "x")
    labels, scores = predict_multiclass_batch(v[None, :], ova)
    return int(labels[0]), scores[0]
