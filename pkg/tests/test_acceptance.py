"""Acceptance gate: one test per shipping criterion.

Run with ``pytest -v tests/test_acceptance.py`` to get one pass/fail line per
criterion. Tolerances and runtime budgets are pinned in the asserts; the
slower checks carry their own wall-clock bounds.
"""

import time

import numpy as np
import pytest
import torch

from csflow import (
    FlowConfig,
    TrainConfig,
    auroc,
    build_model,
    compute_gradients,
    forward,
    forward_batch,
    inverse_batch,
    load_dataset,
    localize,
    nll_loss,
    nll_per_sample,
    score_batch,
    soft_clamp,
    split_dataset,
    train,
)
from csflow.ablation import AblationSpec, run_ablation
from csflow.cli import main as cli_main
from csflow.pyramid import DatasetManifest


def nudged_model(config, magnitude=0.1):
    model = build_model(config)
    with torch.no_grad():
        for i, param in enumerate(model.parameters()):
            param.add_(magnitude * torch.linspace(-1.0, 1.0, param.numel()).reshape(param.shape))
            param.add_(0.01 * ((i % 5) - 2))
    return model


def random_pyramid(rng, num_scales, channels, base, spread=3.0):
    return [
        spread * rng.normal(size=(channels, base >> k, base >> k)) for k in range(num_scales)
    ]


def test_bijectivity_inverse_recovers_inputs():
    # >= 100 (config, model, input) combinations; reconstruction error below
    # 1e-4 * (1 + max|y|); the whole sweep stays under a minute.
    started = time.perf_counter()
    rng = np.random.default_rng(0)
    combos = 0
    worst_ratio = 0.0
    for num_scales in (1, 2, 3):
        for channels in (2, 4, 8):
            for num_blocks in (1, 2, 4):
                for model_seed in (0, 1):
                    config = FlowConfig(
                        num_scales=num_scales, channels=channels,
                        num_blocks=num_blocks, seed=model_seed,
                    )
                    model = nudged_model(config)
                    for _ in range(2):
                        sample = random_pyramid(rng, num_scales, channels, base=8)
                        latent = forward(model, sample)
                        back = inverse_batch(model, latent.latents)
                        err = max(
                            float(np.max(np.abs(b - y))) for b, y in zip(back[0], sample)
                        )
                        bound = 1e-4 * (1.0 + max(float(np.max(np.abs(y))) for y in sample))
                        assert err < bound, (
                            f"reconstruction error {err:.3e} exceeds {bound:.3e} "
                            f"(s={num_scales} C={channels} blocks={num_blocks})"
                        )
                        worst_ratio = max(worst_ratio, err / bound)
                        combos += 1
    elapsed = time.perf_counter() - started
    assert combos >= 100
    assert elapsed < 60.0, f"bijectivity sweep took {elapsed:.1f}s"


def test_logdet_matches_dense_jacobian():
    # analytic logdet vs log|det| of a finite-difference dense Jacobian on
    # >= 10 small models (<= 64 dims each), agreement within 1e-3 absolute.
    started = time.perf_counter()
    rng = np.random.default_rng(1)
    cases = [
        (1, 2, 4, 1), (1, 2, 4, 2), (1, 2, 4, 3),
        (1, 4, 4, 1), (1, 4, 4, 2),
        (2, 2, 4, 1), (2, 2, 4, 2), (2, 2, 4, 4),
        (1, 2, 4, 4), (2, 2, 4, 3), (1, 4, 4, 3),
    ]
    checked = 0
    for index, (num_scales, channels, base, num_blocks) in enumerate(cases):
        config = FlowConfig(
            num_scales=num_scales, channels=channels, num_blocks=num_blocks, seed=index,
        )
        model = nudged_model(config, magnitude=0.15)
        shapes = [(channels, base >> k, base >> k) for k in range(num_scales)]
        dims = sum(int(np.prod(s)) for s in shapes)
        assert dims <= 64
        x0 = np.concatenate(
            [rng.normal(size=s).ravel() for s in shapes]
        )

        def run(flat):
            offset = 0
            sample = []
            for s in shapes:
                n = int(np.prod(s))
                sample.append(flat[offset : offset + n].reshape(s))
                offset += n
            result = forward(model, sample)
            return (
                np.concatenate([z.ravel() for z in result.latents[0]]),
                float(result.logdet[0]),
            )

        eps = 1e-4
        jacobian = np.empty((dims, dims))
        for j in range(dims):
            hi, lo = x0.copy(), x0.copy()
            hi[j] += eps
            lo[j] -= eps
            jacobian[:, j] = (run(hi)[0] - run(lo)[0]) / (2 * eps)
        sign, fd_logdet = np.linalg.slogdet(jacobian)
        assert sign != 0
        _, analytic = run(x0)
        assert abs(analytic - fd_logdet) < 1e-3, (
            f"case {index}: analytic {analytic:.6f} vs finite-difference {fd_logdet:.6f}"
        )
        checked += 1
    elapsed = time.perf_counter() - started
    assert checked >= 10
    assert elapsed < 120.0, f"logdet oracle took {elapsed:.1f}s"


def test_gradients_match_finite_differences():
    # every trainable parameter of a small (<= 2000 parameter) config against
    # central differences: relative error < 1e-4 wherever the magnitudes are
    # meaningful (> 1e-3), absolute 1e-6 below that.
    started = time.perf_counter()
    rng = np.random.default_rng(2)
    config = FlowConfig(num_scales=2, channels=4, num_blocks=1, kernel_sizes=[3], seed=0)
    model = nudged_model(config, magnitude=0.1)
    total = sum(p.numel() for p in model.parameters())
    assert total <= 2000, f"oracle config has {total} parameters"

    batch = [random_pyramid(rng, 2, 4, base=8, spread=1.0) for _ in range(2)]
    analytic = compute_gradients(model, batch)

    def loss_value():
        return nll_loss(forward_batch(model, batch))

    eps = 1e-6
    worst_rel = 0.0
    for name, param in model.named_parameters():
        grad = analytic[name].ravel()
        flat = param.detach().numpy().ravel()
        for j in range(flat.size):
            keep = float(flat[j])
            with torch.no_grad():
                param.view(-1)[j] = keep + eps
            up = loss_value()
            with torch.no_grad():
                param.view(-1)[j] = keep - eps
            down = loss_value()
            with torch.no_grad():
                param.view(-1)[j] = keep
            fd = (up - down) / (2 * eps)
            denom = max(abs(fd), abs(grad[j]))
            if denom > 1e-3:
                rel = abs(fd - grad[j]) / denom
                assert rel < 1e-4, f"{name}[{j}]: rel error {rel:.3e}"
                worst_rel = max(worst_rel, rel)
            else:
                assert abs(fd - grad[j]) < 1e-6, f"{name}[{j}]: abs error {abs(fd - grad[j]):.3e}"
    elapsed = time.perf_counter() - started
    assert elapsed < 300.0, f"gradient oracle took {elapsed:.1f}s"


def test_identity_at_init():
    # fresh models are pure permutations: logdet exactly 0, loss exactly the
    # normalized input energy (to 1e-6 relative).
    rng = np.random.default_rng(3)
    for seed, num_scales, channels in ((0, 2, 8), (1, 1, 4), (2, 3, 2)):
        config = FlowConfig(num_scales=num_scales, channels=channels, seed=seed)
        model = build_model(config)
        batch = [random_pyramid(rng, num_scales, channels, base=8) for _ in range(3)]
        latent = forward_batch(model, batch)
        assert np.all(latent.logdet == 0.0)
        dims = latent.total_dims()
        for i, sample in enumerate(batch):
            energy = sum(float(np.sum(np.square(level))) for level in sample)
            expected = energy / (2.0 * dims)
            got = float(nll_per_sample(latent)[i])
            assert got == pytest.approx(expected, rel=1e-6)


def test_soft_clamp_fixed_point_and_bounds():
    # sigma_3(3) = 1.5 to float precision; outputs strictly inside (-a, a)
    # even for inputs at 1e9 magnitude.
    assert abs(float(soft_clamp(np.array(3.0), 3.0)) - 1.5) < 1e-15
    for alpha in (1.0, 1.9, 3.0):
        inputs = np.array([0.0, 1e-6, 1.0, 37.0, 1e4, 1e9, -1e9, -5.0])
        clamped = soft_clamp(inputs, alpha)
        assert np.all(np.abs(clamped) < alpha)
        torch_clamped = soft_clamp(torch.from_numpy(inputs), alpha).numpy()
        np.testing.assert_array_equal(torch_clamped, clamped)


def test_auroc_equals_pairwise_oracle():
    # 1000 random score/label sets (n <= 500, many with heavy ties): the
    # rank-based statistic equals the O(n^2) concordance count exactly.
    rng = np.random.default_rng(4)
    for trial in range(1000):
        n = int(rng.integers(2, 501))
        if trial % 2:
            values = rng.integers(0, 5, size=n).astype(np.float64)  # heavy ties
        else:
            values = rng.normal(size=n)
        flags = np.zeros(n, dtype=bool)
        flags[: int(rng.integers(1, n))] = True
        rng.shuffle(flags)
        labels = ["anomalous" if f else "normal" for f in flags]

        pos = values[flags][:, None]
        neg = values[~flags][None, :]
        oracle = (np.sum(pos > neg) + 0.5 * np.sum(pos == neg)) / (pos.size * neg.size)
        assert auroc(values, labels) == oracle, f"trial {trial}"


@pytest.fixture(scope="module")
def trained_pipeline(synthetic_dataset):
    """30-epoch training run on the reference synthetic dataset, shared below."""
    _, manifest_path = synthetic_dataset
    samples = load_dataset(manifest_path)
    train_pyramids, test_pyramids, test_labels = split_dataset(samples)
    assert len(train_pyramids) == 64
    assert len(test_pyramids) == 64

    first = train_pyramids[0]
    model = build_model(FlowConfig(num_scales=first.num_scales, channels=first.channels, seed=0))
    started = time.perf_counter()
    train(model, train_pyramids, TrainConfig(epochs=30, seed=0))
    elapsed = time.perf_counter() - started
    return model, manifest_path, test_pyramids, test_labels, elapsed


def test_end_to_end_synthetic_detection(trained_pipeline):
    # 64 train normals / 32+32 test at s=2 C=8 16x16, 30 epochs: test AUROC
    # >= 0.90 and the localization argmax lands inside the planted defect for
    # >= 80% of anomalies, all well under the 10 minute budget.
    model, manifest_path, test_pyramids, test_labels, train_seconds = trained_pipeline
    records = score_batch(model, test_pyramids, labels=test_labels)
    value = auroc(records)
    assert value >= 0.90, f"test AUROC {value:.4f}"

    manifest = DatasetManifest.load(manifest_path)
    planted = {
        e.sample_id: e.anomaly for e in manifest.entries if e.anomaly is not None
    }
    hits = 0
    total = 0
    for pyramid, label in zip(test_pyramids, test_labels):
        if label != "anomalous":
            continue
        total += 1
        grid = localize(model, pyramid).upsampled
        row, col = np.unravel_index(int(np.argmax(grid)), grid.shape)
        spot = planted[pyramid.sample_id]
        distance = np.hypot(row - spot["row"], col - spot["col"])
        if distance <= spot["radius"]:
            hits += 1
    assert total == 32
    assert hits / total >= 0.80, f"localization hit rate {hits}/{total}"
    assert train_seconds < 600.0, f"training took {train_seconds:.0f}s"


def test_cross_scale_beats_single_scale_ablation(synthetic_dataset):
    # on scale-correlated synthetic defects the cross-scale variant keeps at
    # least max(single-scale) - 0.02 AUROC, matching the expected ordering.
    _, manifest_path = synthetic_dataset
    samples = load_dataset(manifest_path)
    specs = [
        AblationSpec("cross_scale"),
        AblationSpec("single_scale", scale_index=0),
        AblationSpec("single_scale", scale_index=1),
    ]
    flow_cfg = FlowConfig(num_scales=2, channels=8, seed=0)
    rows = run_ablation(specs, samples, TrainConfig(epochs=15, seed=0), flow_cfg)
    by_variant = {row["variant"]: row["auroc"] for row in rows}
    cross = by_variant["cross_scale"]
    best_single = max(v for k, v in by_variant.items() if k.startswith("single_scale"))
    assert cross >= best_single - 0.02, (
        f"cross_scale {cross:.4f} vs best single {best_single:.4f}"
    )


def test_identical_seeds_reproduce_artifacts_bitwise(tmp_path):
    # two fresh synth+train+score pipeline runs with one seed: checkpoints and
    # score CSVs must match byte for byte.
    outputs = []
    for name in ("first", "second"):
        out = tmp_path / name
        assert cli_main(["synth", "--output-dir", str(out), "--normals", "10",
                         "--anomalies", "4", "--channels", "4", "--size", "8",
                         "--seed", "3"]) == 0
        manifest = str(out / "manifest.json")
        assert cli_main(["train", "--manifest", manifest, "--output-dir", str(out),
                         "--epochs", "3", "--batch-size", "4", "--num-blocks", "2",
                         "--seed", "3"]) == 0
        assert cli_main(["score", "--manifest", manifest, "--output-dir", str(out),
                         "--checkpoint", str(out / "model.csfc"),
                         "--out", str(out / "scores.csv"), "--seed", "3"]) == 0
        outputs.append(out)

    first, second = outputs
    assert (first / "model.csfc").read_bytes() == (second / "model.csfc").read_bytes()
    assert (first / "scores.csv").read_bytes() == (second / "scores.csv").read_bytes()
