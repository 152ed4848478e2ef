import numpy as np
import pytest

from csflow import FlowConfig, SyntheticConfig, build_model, generate_synthetic


def random_scales(rng, num_scales=2, channels=4, base=8):
    """Random pyramid as a plain list of per-scale arrays, finest first."""
    return [
        rng.normal(size=(channels, base >> k, base >> k)) for k in range(num_scales)
    ]


def small_model(num_scales=2, channels=4, num_blocks=2, seed=0, **kw):
    cfg = FlowConfig(num_scales=num_scales, channels=channels, num_blocks=num_blocks, seed=seed, **kw)
    return build_model(cfg)


@pytest.fixture(scope="session")
def synthetic_dataset(tmp_path_factory):
    """The acceptance-scale dataset: 64 train normals, 32+32 test, s=2, C=8."""
    out = tmp_path_factory.mktemp("synth_acceptance")
    manifest, manifest_path = generate_synthetic(SyntheticConfig(seed=0), str(out))
    return manifest, manifest_path


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """A very small dataset for plumbing tests that train for a few epochs."""
    out = tmp_path_factory.mktemp("synth_tiny")
    cfg = SyntheticConfig(num_normal=12, num_anomalous=4, channels=4, base_height=8,
                          base_width=8, seed=1)
    manifest, manifest_path = generate_synthetic(cfg, str(out))
    return manifest, manifest_path


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
