import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from vssd.estimator import VssdClassifier
from vssd.train import synthetic_dataset


def toy_data(n, seed):
    d = synthetic_dataset(n, image_size=16, num_classes=3, seed=seed, template_seed=4)
    return d.images, d.labels


class TestEstimator:
    def test_fit_predict_learns(self):
        X, y = toy_data(96, 1)
        clf = VssdClassifier(epochs=3, batch_size=32, seed=0).fit(X, y)
        Xt, yt = toy_data(48, 2)
        assert clf.score(Xt, yt) > 0.8

    def test_class_label_mapping(self):
        X, y = toy_data(64, 3)
        clf = VssdClassifier(epochs=1, batch_size=32, seed=0).fit(X, y * 7 + 2)
        assert np.array_equal(clf.classes_, [2, 9, 16])
        assert set(clf.predict(X[:8])) <= {2, 9, 16}

    def test_predict_proba_normalized(self):
        X, y = toy_data(64, 5)
        clf = VssdClassifier(epochs=1, batch_size=32, seed=0).fit(X, y)
        p = clf.predict_proba(X[:6])
        assert p.shape == (6, 3)
        assert np.allclose(p.sum(axis=1), 1.0, atol=1e-5)

    def test_2d_input_with_image_shape(self):
        X, y = toy_data(64, 6)
        flat = X.reshape(64, -1)
        clf = VssdClassifier(epochs=1, batch_size=32, image_shape=(3, 16, 16),
                             seed=0).fit(flat, y)
        assert clf.predict(flat[:4]).shape == (4,)

    def test_2d_without_shape_rejected(self):
        X, y = toy_data(16, 7)
        with pytest.raises(ValueError):
            VssdClassifier(epochs=1).fit(X.reshape(16, -1), y)

    def test_length_mismatch(self):
        X, y = toy_data(16, 8)
        with pytest.raises(ValueError):
            VssdClassifier(epochs=1).fit(X, y[:-1])

    def test_unfitted_predict_raises(self):
        X, _ = toy_data(4, 9)
        with pytest.raises(NotFittedError):
            VssdClassifier().predict(X)

    def test_clone_and_params(self):
        clf = VssdClassifier(epochs=7, learning_rate=3e-4)
        c = clone(clf)
        assert c.get_params()["epochs"] == 7
        assert c.get_params()["learning_rate"] == 3e-4
