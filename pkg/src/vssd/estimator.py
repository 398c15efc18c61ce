"""Scikit-learn style classifier wrapping the backbone and training loop."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.multiclass import unique_labels

from .tensor import Tensor
from .tensor.rng import Rng
from .model import ModelConfig, StageSpec, VssdModel
from .train import TrainConfig, train_loop
from .train.data import Dataset


class VssdClassifier(BaseEstimator, ClassifierMixin):
    """Image classifier with the non-causal SSD backbone.

    X is (n, C, H, W), or (n, C*H*W) together with ``image_shape``.  H and W
    must be divisible by 4 per backbone stage count.  This is a thin estimator
    facade over the training loop; for long runs use the CLI, which also
    writes metrics and checkpoints.
    """

    def __init__(self, stages=((1, 16, 2), (1, 32, 4)), state_dim=8,
                 image_shape=None, epochs=5, batch_size=32, learning_rate=1e-3,
                 weight_decay=0.01, label_smoothing=0.0, seed=0):
        self.stages = stages
        self.state_dim = state_dim
        self.image_shape = image_shape
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.label_smoothing = label_smoothing
        self.seed = seed

    def _as_images(self, X):
        X = np.asarray(X, dtype=np.float32)
        if X.ndim == 2:
            if self.image_shape is None:
                raise ValueError("2-D X requires image_shape=(C, H, W)")
            X = X.reshape(X.shape[0], *self.image_shape)
        if X.ndim != 4:
            raise ValueError(f"X must be (n, C, H, W), got shape {X.shape}")
        return X

    def fit(self, X, y):
        X = self._as_images(X)
        y = np.asarray(y)
        if y.shape[0] != X.shape[0]:
            raise ValueError(f"X has {X.shape[0]} samples but y has {y.shape[0]}")
        self.classes_ = unique_labels(y)
        idx = np.searchsorted(self.classes_, y)
        cfg = ModelConfig(
            stages=[StageSpec(b, c, h, state_dim=self.state_dim)
                    for b, c, h in self.stages],
            num_classes=len(self.classes_),
            in_channels=X.shape[1],
        )
        self.model_ = VssdModel(cfg, Rng(self.seed), dtype=np.float32)
        data = Dataset(X, idx.astype(np.int64), len(self.classes_))
        tc = TrainConfig(
            epochs=self.epochs, warmup_epochs=0, batch_size=min(self.batch_size, len(data)),
            peak_lr=self.learning_rate, weight_decay=self.weight_decay,
            label_smoothing=self.label_smoothing, seed=self.seed,
            augment_flip=False, drop_path_rate=0.0,
        )
        self.history_ = train_loop(self.model_, tc, data, data, log=lambda *a: None)
        self.n_features_in_ = int(np.prod(X.shape[1:]))
        return self

    def decision_function(self, X):
        if not hasattr(self, "model_"):
            raise NotFittedError("fit must be called before predict")
        X = self._as_images(X)
        out = []
        for start in range(0, X.shape[0], 256):
            out.append(self.model_(Tensor(X[start : start + 256])).data)
        return np.concatenate(out)

    def predict(self, X):
        z = self.decision_function(X)
        return self.classes_[np.argmax(z, axis=-1)]

    def predict_proba(self, X):
        z = self.decision_function(X)
        z = z - z.max(axis=-1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=-1, keepdims=True)
