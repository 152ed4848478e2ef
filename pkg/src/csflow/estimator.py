"""Scikit-learn style wrapper around the full pipeline.

CrossScaleFlowDetector is a one-class detector: fit on defect-free pyramids,
then predict +1 (normal) / -1 (anomalous) on new ones. Following sklearn
outlier conventions, score_samples returns the negated anomaly score (higher
means more normal) and decision_function subtracts the calibrated threshold.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, OutlierMixin

from .flow.api import build_model, forward_batch
from .flow.config import FlowConfig
from .scoring import calibrate_threshold, score_batch
from .training import TrainConfig, train
from .validation import check_pyramid_batch


class CrossScaleFlowDetector(OutlierMixin, BaseEstimator):
    """One-class defect detector over multi-scale feature pyramids.

    Parameters mirror the flow and training configs; pyramid geometry
    (scale count, channels) is inferred from the training data.
    """

    def __init__(
        self,
        num_blocks=4,
        kernel_sizes=None,
        clamp_alpha=3.0,
        hidden_channel_factor=2,
        leaky_slope=0.1,
        learning_rate=2e-4,
        weight_decay=1e-5,
        adam_beta1=0.5,
        adam_beta2=0.9,
        batch_size=16,
        epochs=240,
        grad_clip_norm=1.0,
        shot_limit=None,
        quantile=0.95,
        score_mode="nll",
        seed=0,
    ):
        self.num_blocks = num_blocks
        self.kernel_sizes = kernel_sizes
        self.clamp_alpha = clamp_alpha
        self.hidden_channel_factor = hidden_channel_factor
        self.leaky_slope = leaky_slope
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.adam_beta1 = adam_beta1
        self.adam_beta2 = adam_beta2
        self.batch_size = batch_size
        self.epochs = epochs
        self.grad_clip_norm = grad_clip_norm
        self.shot_limit = shot_limit
        self.quantile = quantile
        self.score_mode = score_mode
        self.seed = seed

    def _flow_config(self, pyramids):
        return FlowConfig(
            num_scales=pyramids[0].num_scales,
            channels=pyramids[0].channels,
            num_blocks=self.num_blocks,
            kernel_sizes=list(self.kernel_sizes) if self.kernel_sizes else None,
            clamp_alpha=self.clamp_alpha,
            hidden_channel_factor=self.hidden_channel_factor,
            leaky_slope=self.leaky_slope,
            seed=self.seed,
        )

    def _train_config(self):
        return TrainConfig(
            learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
            adam_beta1=self.adam_beta1,
            adam_beta2=self.adam_beta2,
            batch_size=self.batch_size,
            epochs=self.epochs,
            grad_clip_norm=self.grad_clip_norm,
            shot_limit=self.shot_limit,
            seed=self.seed,
        )

    def fit(self, X, y=None):
        """Train the flow on normal samples and calibrate the decision threshold.

        When y is given (0/"normal" vs 1/"anomalous"), only normal samples are
        used; the training stage is defect-free by contract.
        """
        pyramids = check_pyramid_batch(X)
        if y is not None:
            keep = [label in (0, False, "normal") for label in y]
            if len(keep) != len(pyramids):
                raise ValueError("y must align with X")
            pyramids = [p for p, k in zip(pyramids, keep) if k]
            if not pyramids:
                raise ValueError("no normal samples to fit on")
        self.config_ = self._flow_config(pyramids)
        self.train_config_ = self._train_config().validate()
        self.model_ = build_model(self.config_)
        state = train(self.model_, pyramids, self.train_config_)
        self.history_ = list(state.epoch_mean_nll)
        records = score_batch(self.model_, pyramids, mode=self.score_mode)
        self.threshold_ = calibrate_threshold(records, q=self.quantile)
        self.offset_ = -self.threshold_.theta
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise RuntimeError("this detector is not fitted yet; call fit first")

    def _anomaly_scores(self, X):
        pyramids = check_pyramid_batch(X)
        records = score_batch(self.model_, pyramids, mode=self.score_mode)
        return np.array([r.score for r in records])

    def score_samples(self, X):
        """Negated anomaly score: higher means more normal."""
        self._check_fitted()
        return -self._anomaly_scores(X)

    def decision_function(self, X):
        """Positive for samples under the calibrated threshold (inliers)."""
        return self.score_samples(X) - self.offset_

    def predict(self, X):
        """+1 for normal, -1 for anomalous; scores exactly at threshold count normal."""
        return np.where(self.decision_function(X) < 0, -1, 1)

    def transform(self, X):
        """Flattened latent vectors, one row per sample."""
        self._check_fitted()
        pyramids = check_pyramid_batch(X)
        latent = forward_batch(self.model_, pyramids)
        return np.stack([np.concatenate([z.ravel() for z in zs]) for zs in latent.latents])

    def fit_transform(self, X, y=None):
        return self.fit(X, y).transform(X)
