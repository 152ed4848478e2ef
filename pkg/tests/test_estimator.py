"""Detector wrapper: sklearn conventions end to end."""

import numpy as np
import pytest
from sklearn.base import clone

from csflow import CrossScaleFlowDetector

from conftest import random_scales


@pytest.fixture(scope="module")
def fitted():
    rng = np.random.default_rng(77)
    X = [random_scales(rng) for _ in range(10)]
    detector = CrossScaleFlowDetector(num_blocks=1, epochs=3, batch_size=4, seed=0)
    return detector.fit(X), X, rng


class TestSklearnProtocol:
    def test_get_params_round_trip(self):
        detector = CrossScaleFlowDetector(num_blocks=2, epochs=5, quantile=0.9)
        params = detector.get_params()
        assert params["num_blocks"] == 2
        assert params["epochs"] == 5
        assert params["quantile"] == 0.9
        rebuilt = CrossScaleFlowDetector(**params)
        assert rebuilt.get_params() == params

    def test_set_params(self):
        detector = CrossScaleFlowDetector()
        detector.set_params(epochs=12, score_mode="z_energy")
        assert detector.epochs == 12
        assert detector.score_mode == "z_energy"

    def test_clone_keeps_params_drops_state(self, fitted):
        detector, X, _ = fitted
        copy = clone(detector)
        assert copy.get_params() == detector.get_params()
        assert not hasattr(copy, "model_")

    def test_unfitted_raises(self, rng):
        detector = CrossScaleFlowDetector()
        with pytest.raises(RuntimeError, match="not fitted"):
            detector.score_samples([random_scales(rng)])
        with pytest.raises(RuntimeError, match="not fitted"):
            detector.predict([random_scales(rng)])


class TestFit:
    def test_fit_sets_state(self, fitted):
        detector, X, _ = fitted
        assert detector.config_.num_scales == 2
        assert detector.config_.channels == 4
        assert len(detector.history_) == 3
        assert detector.offset_ == -detector.threshold_.theta
        assert detector.threshold_.quantile == 0.95

    def test_fit_filters_labeled_anomalies(self, rng):
        X = [random_scales(rng) for _ in range(6)]
        y = [0, 0, 1, 0, 1, 0]
        detector = CrossScaleFlowDetector(num_blocks=1, epochs=2, batch_size=4, seed=1)
        detector.fit(X, y)

        reference = CrossScaleFlowDetector(num_blocks=1, epochs=2, batch_size=4, seed=1)
        reference.fit([x for x, label in zip(X, y) if label == 0])
        assert detector.history_ == reference.history_

    def test_fit_rejects_all_anomalous(self, rng):
        X = [random_scales(rng) for _ in range(2)]
        detector = CrossScaleFlowDetector(num_blocks=1, epochs=1)
        with pytest.raises(ValueError, match="no normal samples"):
            detector.fit(X, y=[1, 1])

    def test_fit_rejects_misaligned_labels(self, rng):
        detector = CrossScaleFlowDetector(num_blocks=1, epochs=1)
        with pytest.raises(ValueError, match="align"):
            detector.fit([random_scales(rng)], y=[0, 0])


class TestDecisions:
    def test_score_samples_negates_anomaly_score(self, fitted):
        detector, X, rng = fitted
        scores = detector.score_samples(X[:4])
        assert scores.shape == (4,)
        # the training data is mostly normal, so its negated scores sit above
        # the negated threshold for at least the calibration fraction
        decisions = detector.decision_function(X)
        assert (decisions >= 0).mean() >= 0.9

    def test_decision_function_is_shifted_score(self, fitted):
        detector, X, _ = fitted
        np.testing.assert_allclose(
            detector.decision_function(X[:3]),
            detector.score_samples(X[:3]) - detector.offset_,
            rtol=1e-12,
        )

    def test_predict_signs(self, fitted):
        detector, X, rng = fitted
        blatant = [[s + 25.0 for s in random_scales(rng)] for _ in range(2)]
        predictions = detector.predict(X + blatant)
        assert set(predictions.tolist()) <= {-1, 1}
        assert predictions[-2:].tolist() == [-1, -1]
        assert (predictions[:-2] == 1).mean() >= 0.9

    def test_threshold_tie_predicts_normal(self, fitted):
        detector, X, _ = fitted
        # decision_function == 0 ⟺ score == theta; np.where(dec < 0, -1, 1) → +1
        assert np.where(np.array([0.0]) < 0, -1, 1).tolist() == [1]
        boundary = detector.predict(X[:1])
        assert boundary[0] in (-1, 1)

    def test_fit_predict_mixin(self, rng):
        X = [random_scales(rng) for _ in range(6)]
        detector = CrossScaleFlowDetector(num_blocks=1, epochs=2, batch_size=4)
        labels = detector.fit_predict(X)
        assert labels.shape == (6,)


class TestTransform:
    def test_latent_matrix_shape(self, fitted):
        detector, X, _ = fitted
        Z = detector.transform(X[:5])
        dims = 4 * 8 * 8 + 4 * 4 * 4
        assert Z.shape == (5, dims)
        assert np.all(np.isfinite(Z))

    def test_fit_transform_matches_transform(self, rng):
        X = [random_scales(rng) for _ in range(6)]
        a = CrossScaleFlowDetector(num_blocks=1, epochs=2, batch_size=4, seed=3)
        Za = a.fit_transform(X)
        b = CrossScaleFlowDetector(num_blocks=1, epochs=2, batch_size=4, seed=3)
        Zb = b.fit(X).transform(X)
        np.testing.assert_array_equal(Za, Zb)

    def test_score_mode_parameter_used(self, rng):
        X = [random_scales(rng) for _ in range(6)]
        nll = CrossScaleFlowDetector(num_blocks=1, epochs=2, batch_size=4, seed=4)
        zen = CrossScaleFlowDetector(num_blocks=1, epochs=2, batch_size=4, seed=4,
                                     score_mode="z_energy")
        s_nll = nll.fit(X).score_samples(X)
        s_zen = zen.fit(X).score_samples(X)
        assert not np.allclose(s_nll, s_zen)
