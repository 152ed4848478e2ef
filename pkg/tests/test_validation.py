"""Input coercion and batch shape checks."""

import numpy as np
import pytest

from csflow import FeaturePyramid, InvariantViolation, ShapeMismatchError
from csflow.validation import batch_signature, check_pyramid_batch, ensure_pyramid

from conftest import random_scales


class TestEnsurePyramid:
    def test_passes_through_validated_pyramid(self, rng):
        pyramid = FeaturePyramid(scales=random_scales(rng), sample_id="p")
        assert ensure_pyramid(pyramid) is pyramid

    def test_wraps_array_list(self, rng):
        pyramid = ensure_pyramid(random_scales(rng), sample_id="from_list")
        assert isinstance(pyramid, FeaturePyramid)
        assert pyramid.sample_id == "from_list"
        assert pyramid.num_scales == 2

    def test_wraps_bare_3d_array_as_one_scale(self, rng):
        pyramid = ensure_pyramid(rng.normal(size=(4, 8, 8)))
        assert pyramid.num_scales == 1

    def test_rejects_wrong_rank_array(self, rng):
        with pytest.raises(InvariantViolation, match="3-D"):
            ensure_pyramid(rng.normal(size=(8, 8)))

    def test_validation_still_applies(self, rng):
        # odd channel counts cannot be split for the coupling
        with pytest.raises(InvariantViolation):
            ensure_pyramid([rng.normal(size=(3, 8, 8))])


class TestBatch:
    def test_uniform_batch_passes(self, rng):
        batch = check_pyramid_batch([random_scales(rng) for _ in range(3)])
        assert len(batch) == 3
        assert all(isinstance(p, FeaturePyramid) for p in batch)

    def test_generated_ids_are_positional(self, rng):
        batch = check_pyramid_batch([random_scales(rng), random_scales(rng)])
        assert [p.sample_id for p in batch] == ["sample_0000", "sample_0001"]

    def test_named_pyramids_keep_ids(self, rng):
        named = FeaturePyramid(scales=random_scales(rng), sample_id="kept")
        batch = check_pyramid_batch([named, random_scales(rng)])
        assert batch[0].sample_id == "kept"

    def test_mixed_signatures_rejected(self, rng):
        with pytest.raises(ShapeMismatchError, match="signature"):
            check_pyramid_batch([random_scales(rng, channels=4), random_scales(rng, channels=6)])

    def test_empty_batch_rejected(self):
        with pytest.raises(InvariantViolation, match="empty"):
            check_pyramid_batch([])

    def test_signature_shape(self, rng):
        signature = batch_signature([random_scales(rng)])
        assert signature == ((4, 8, 8), (4, 4, 4))
