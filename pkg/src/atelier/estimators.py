"""scikit-learn estimator wrappers around the tile network and ensemble.

These exist for interop — grid searches, pipelines, clone() — and add
nothing numerically: TileCnnClassifier delegates to the cnn module and
ScaleEnsemble to the aggregate module. X for the tile classifier is a
4-D batch of tiles, not a 2-D feature matrix.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from . import aggregate, cnn
from .validation import check_binary_labels, check_probability_pairs, check_tile_batch


class TileCnnClassifier(BaseEstimator, ClassifierMixin):
    """Binary tile classifier with a fit/predict interface.

    X is (n, tile_size, tile_size, channels) float64 in [0, 1]; y is 0/1
    (1 = positive artist). Pass validation=(X_val, y_val) to control
    epoch selection; otherwise a seeded 20% holdout of X is used.
    """

    def __init__(
        self,
        tile_size=100,
        channels=3,
        conv=((8, 3, True), (16, 3, True)),
        dense_units=32,
        learning_rate=0.01,
        momentum=0.9,
        epochs=10,
        batch_size=32,
        seed=42,
    ):
        self.tile_size = tile_size
        self.channels = channels
        self.conv = conv
        self.dense_units = dense_units
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed

    def _config(self) -> cnn.CnnConfig:
        return cnn.CnnConfig(
            input_size=self.tile_size,
            input_channels=self.channels,
            conv_layers=tuple(tuple(stage) for stage in self.conv),
            dense_units=self.dense_units,
            seed=self.seed,
            learning_rate=self.learning_rate,
            momentum=self.momentum,
            epochs=self.epochs,
            batch_size=self.batch_size,
        )

    def fit(self, X, y, validation=None):
        X = check_tile_batch(X, self.tile_size, self.channels)
        y = check_binary_labels(y, X.shape[0])
        if validation is not None:
            X_val, y_val = validation
            X_val = check_tile_batch(X_val, self.tile_size, self.channels)
            y_val = check_binary_labels(y_val, X_val.shape[0])
            X_tr, y_tr = X, y
        else:
            rng = np.random.default_rng(np.random.SeedSequence([self.seed, 2]))
            order = rng.permutation(X.shape[0])
            n_val = max(1, X.shape[0] // 5)
            if n_val >= X.shape[0]:
                raise ValueError("too few tiles to hold out a validation set")
            X_val, y_val = X[order[:n_val]], y[order[:n_val]]
            X_tr, y_tr = X[order[n_val:]], y[order[n_val:]]
        model = cnn.init_model(self._config())
        self.model_, self.history_ = cnn.train(model, X_tr, y_tr, X_val, y_val)
        self.classes_ = np.array([0, 1])
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        X = check_tile_batch(X, self.tile_size, self.channels)
        p1 = cnn.predict_batched(self.model_, X)
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(np.int64)

    def gradcam(self, tile):
        check_is_fitted(self, "model_")
        tile = check_tile_batch(tile[np.newaxis], self.tile_size, self.channels)[0]
        return cnn.gradcam(self.model_, tile)

    def save(self, path):
        check_is_fitted(self, "model_")
        cnn.save_model(self.model_, path)

    @classmethod
    def load(cls, path):
        model = cnn.load_model(path)
        cfg = model.config
        est = cls(
            tile_size=cfg.input_size,
            channels=cfg.input_channels,
            conv=cfg.conv_layers,
            dense_units=cfg.dense_units,
            learning_rate=cfg.learning_rate,
            momentum=cfg.momentum,
            epochs=cfg.epochs,
            batch_size=cfg.batch_size,
            seed=cfg.seed,
        )
        est.model_ = model
        est.history_ = []
        est.classes_ = np.array([0, 1])
        return est


class ScaleEnsemble(BaseEstimator, ClassifierMixin):
    """Blend of two models' painting-level probabilities.

    X is (n, 2): column 0 the first model's mean probability per
    painting, column 1 the second's; y is 0/1. fit scans the blend
    weight grid; the chosen weight applies to column 0.
    """

    def fit(self, X, y):
        X = check_probability_pairs(X)
        y = check_binary_labels(y, X.shape[0])
        triples = [
            (float(a), float(b), "pos" if label == 1 else "neg")
            for (a, b), label in zip(X, y)
        ]
        chosen = aggregate.optimize_weights(triples)
        self.weight_ = chosen.weight
        self.achieved_error_ = chosen.achieved_error
        self.classes_ = np.array([0, 1])
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "weight_")
        X = check_probability_pairs(X)
        p1 = self.weight_ * X[:, 0] + (1.0 - self.weight_) * X[:, 1]
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(np.int64)
