"""Set-convolution classifiers for imbalanced data.

A permutation-invariant set-convolution layer is trained on episodes that keep
the class imbalance ratio, then compresses each class into one representative
vector. Queries are classified by comparing their embedding with every
representative.
"""

__version__ = "0.1.0"

from .classifier import (
    BinaryClassifier,
    ClassRepresentatives,
    OneVsAllModel,
    TrainedModel,
    fit_binary,
    post_train,
    predict_binary,
    predict_multiclass,
    predict_proba_binary,
    train_one_vs_all,
)
from .data import Dataset, SynthSpec, generate_synthetic, load_csv, save_csv, split
from .episodic import TrainConfig, train
from .io import load_model, save_model
from .layer import SetConvParams, compute_anchor, init_params, setconv_forward

__all__ = [
    "BinaryClassifier",
    "ClassRepresentatives",
    "Dataset",
    "OneVsAllModel",
    "SetConvParams",
    "SynthSpec",
    "TrainConfig",
    "TrainedModel",
    "compute_anchor",
    "fit_binary",
    "generate_synthetic",
    "init_params",
    "load_csv",
    "load_model",
    "post_train",
    "predict_binary",
    "predict_multiclass",
    "predict_proba_binary",
    "save_csv",
    "save_model",
    "setconv_forward",
    "split",
    "train",
    "train_one_vs_all",
]
