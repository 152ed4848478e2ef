"""Command-line entry point.

Subcommands cover the whole pipeline: synth (toy dataset), train, score,
eval, localize, ablate, and inspect (summarize a pyramid file). Settings
resolve as command-line flag > config file > built-in default; the config
file is flat JSON keyed by the same names as the flags' destinations.

Exit codes: 0 success; 2 for usage, path, or configuration problems
(including model/dataset shape mismatches detected up front); 1 for
failures during the actual computation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .ablation import AblationSpec, run_ablation
from .errors import (
    InvariantViolation,
    ManifestError,
    PyramidFormatError,
    ShapeMismatchError,
    UndefinedMetricError,
)
from .flow.api import build_model, check_pyramid_compatible
from .flow.checkpoint import load_checkpoint
from .flow.config import FlowConfig
from .metrics import auroc, histogram, roc_curve
from .pyramid import load_dataset, read_pyramid, split_dataset
from .scoring import (
    localize,
    score_batch,
    read_scores_csv,
    write_localization_csfp,
    write_localization_pgm,
    write_scores_csv,
)
from .synthetic import SyntheticConfig, generate_synthetic
from .training import TrainConfig, train

THREADS_ENV_VAR = "CSFLOW_THREADS"

_CONFIG_ERRORS = (
    InvariantViolation,
    ManifestError,
    PyramidFormatError,
    ShapeMismatchError,
    UndefinedMetricError,
    FileNotFoundError,
)


def _load_config_file(path):
    if path is None:
        return {}
    if not os.path.exists(path):
        raise FileNotFoundError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvariantViolation(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise InvariantViolation("config file must hold a JSON object")
    return data


class Settings:
    """Flag > config file > default resolution over argparse destinations."""

    def __init__(self, args):
        self.args = args
        self.file = _load_config_file(getattr(args, "config", None))

    def get(self, key, default=None):
        value = getattr(self.args, key, None)
        if value is not None:
            return value
        if key in self.file:
            return self.file[key]
        return default

    def require_path(self, key, description):
        path = self.get(key)
        if path is None:
            raise FileNotFoundError(f"no {description} given (flag --{key.replace('_', '-')})")
        if not os.path.exists(path):
            raise FileNotFoundError(f"{description} not found: {path}")
        return path


def _apply_threads(settings):
    value = settings.get("threads")
    if value is None:
        env = os.environ.get(THREADS_ENV_VAR)
        value = int(env) if env else None
    if value is not None:
        if int(value) < 1:
            raise InvariantViolation(f"thread count must be >= 1, got {value}")
        import torch

        torch.set_num_threads(int(value))


def _parse_int_list(value):
    if value is None or isinstance(value, list):
        return value
    return [int(part) for part in str(value).split(",") if part.strip()]


def _output_dir(settings):
    out = settings.get("output_dir", "out")
    os.makedirs(out, exist_ok=True)
    return out


def _train_config(settings) -> TrainConfig:
    cfg = TrainConfig(
        learning_rate=float(settings.get("learning_rate", 2e-4)),
        weight_decay=float(settings.get("weight_decay", 1e-5)),
        adam_beta1=float(settings.get("adam_beta1", 0.5)),
        adam_beta2=float(settings.get("adam_beta2", 0.9)),
        batch_size=int(settings.get("batch_size", 16)),
        epochs=int(settings.get("epochs", 240)),
        grad_clip_norm=float(settings.get("grad_clip_norm", 1.0)),
        shot_limit=settings.get("shot_limit"),
        seed=int(settings.get("seed", 0)),
    )
    if cfg.shot_limit is not None:
        cfg.shot_limit = int(cfg.shot_limit)
    return cfg.validate()


def _flow_config(settings, num_scales, channels) -> FlowConfig:
    return FlowConfig(
        num_scales=num_scales,
        channels=channels,
        num_blocks=int(settings.get("num_blocks", 4)),
        kernel_sizes=_parse_int_list(settings.get("kernel_sizes")),
        clamp_alpha=float(settings.get("clamp_alpha", 3.0)),
        hidden_channel_factor=int(settings.get("hidden_channel_factor", 2)),
        leaky_slope=float(settings.get("leaky_slope", 0.1)),
        seed=int(settings.get("seed", 0)),
    ).validate()


def _load_split(settings, wanted):
    manifest = settings.require_path("manifest", "dataset manifest")
    samples = load_dataset(manifest, standardize=bool(settings.get("standardize", False)))
    if wanted == "all":
        return [(p, label) for p, label, _ in samples]
    return [(p, label) for p, label, split in samples if split == wanted]


def cmd_synth(settings) -> int:
    cfg = SyntheticConfig(
        num_normal=int(settings.get("normals", 96)),
        num_anomalous=int(settings.get("anomalies", 32)),
        num_scales=int(settings.get("scales", 2)),
        channels=int(settings.get("channels", 8)),
        base_height=int(settings.get("size", 16)),
        base_width=int(settings.get("size", 16)),
        anomaly_amplitude=float(settings.get("amplitude", 5.0)),
        anomaly_radius=float(settings.get("radius", 2.0)),
        seed=int(settings.get("seed", 0)),
        num_test_normal=(
            int(settings.get("test_normals")) if settings.get("test_normals") is not None else None
        ),
        class_name=str(settings.get("class_name", "synthetic")),
    )
    _, manifest_path = generate_synthetic(cfg, _output_dir(settings))
    print(manifest_path)
    return 0


def cmd_train(settings) -> int:
    manifest = settings.require_path("manifest", "dataset manifest")
    samples = load_dataset(manifest, standardize=bool(settings.get("standardize", False)))
    train_pyramids, _, _ = split_dataset(samples)
    if not train_pyramids:
        raise ManifestError("manifest has no train-split samples")

    first = train_pyramids[0]
    flow_cfg = _flow_config(settings, first.num_scales, first.channels)
    train_cfg = _train_config(settings)
    out = _output_dir(settings)
    checkpoint_path = settings.get("checkpoint") or os.path.join(out, "model.csfc")
    log_path = settings.get("log") or os.path.join(out, "train_log.ndjson")
    interval = settings.get("checkpoint_interval")

    model = build_model(flow_cfg)
    with open(log_path, "w", encoding="utf-8") as sink:
        state = train(
            model,
            train_pyramids,
            train_cfg,
            sink=sink,
            checkpoint_path=checkpoint_path,
            checkpoint_interval=int(interval) if interval else None,
        )
    print(f"checkpoint: {checkpoint_path}")
    print(f"epochs: {len(state.epoch_mean_nll)} "
          f"first_nll: {state.epoch_mean_nll[0]:.6f} last_nll: {state.epoch_mean_nll[-1]:.6f}")
    return 0


def _load_model_and_split(settings, wanted):
    checkpoint = settings.require_path("checkpoint", "model checkpoint")
    model = load_checkpoint(checkpoint)
    labeled = _load_split(settings, wanted)
    if not labeled:
        raise ManifestError(f"manifest has no {wanted}-split samples")
    for pyramid, _ in labeled:
        check_pyramid_compatible(model.config, pyramid)
    return model, labeled


def cmd_score(settings) -> int:
    wanted = settings.get("split", "test")
    model, labeled = _load_model_and_split(settings, wanted)
    records = score_batch(
        model,
        [p for p, _ in labeled],
        mode=str(settings.get("score_mode", "nll")),
        labels=[label for _, label in labeled],
    )
    out_path = settings.get("out") or os.path.join(_output_dir(settings), "scores.csv")
    write_scores_csv(records, out_path)
    print(out_path)
    return 0


def cmd_eval(settings) -> int:
    scores_path = settings.require_path("scores", "scores CSV")
    with open(scores_path, newline="", encoding="utf-8") as fh:
        records = read_scores_csv(fh)
    if not records:
        raise InvariantViolation(f"no score rows in {scores_path}")
    if any(r.label is None for r in records):
        raise InvariantViolation("eval needs labeled scores")

    curve = roc_curve(records)
    hist = histogram(
        records,
        bins=int(settings.get("bins", 40)),
        clip_max=(
            float(settings.get("clip_max")) if settings.get("clip_max") is not None else None
        ),
    )
    report = {
        "auroc": auroc(records),
        "num_samples": len(records),
        "roc_points": [[fpr, tpr] for fpr, tpr in curve.points],
        "histogram": {
            "edges": [float(e) for e in hist.edges],
            "clip_max": hist.clip_max,
            "counts": {label: [float(v) for v in vals] for label, vals in hist.counts.items()},
        },
    }
    out_path = settings.get("out") or os.path.join(_output_dir(settings), "metrics.json")
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"auroc: {report['auroc']:.6f}")
    print(out_path)
    return 0


def cmd_localize(settings) -> int:
    model, labeled = _load_model_and_split(settings, settings.get("split", "test"))
    wanted_id = settings.get("sample")
    if wanted_id is not None:
        labeled = [(p, label) for p, label in labeled if p.sample_id == wanted_id]
        if not labeled:
            raise ManifestError(f"sample not found in split: {wanted_id}")
    size = settings.get("target_size")
    if size is not None:
        size = _parse_int_list(size)
        if len(size) != 2:
            raise InvariantViolation("target size must be HEIGHT,WIDTH")
    out = _output_dir(settings)
    for pyramid, _ in labeled:
        loc = localize(model, pyramid, target_size=size)
        write_localization_csfp(loc, os.path.join(out, f"{pyramid.sample_id}_map.csfp"))
        write_localization_pgm(loc, os.path.join(out, f"{pyramid.sample_id}_map.pgm"))
    print(f"wrote {2 * len(labeled)} files to {out}")
    return 0


def _parse_variants(raw):
    specs = []
    for part in str(raw).split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            name, index = part.split(":", 1)
            specs.append(AblationSpec(variant=name, scale_index=int(index)))
        else:
            specs.append(AblationSpec(variant=part))
    if not specs:
        raise InvariantViolation("no ablation variants given")
    return specs


def cmd_ablate(settings) -> int:
    manifest = settings.require_path("manifest", "dataset manifest")
    samples = load_dataset(manifest, standardize=bool(settings.get("standardize", False)))
    first = samples[0][0]
    flow_cfg = _flow_config(settings, first.num_scales, first.channels)
    train_cfg = _train_config(settings)
    specs = _parse_variants(settings.get("variants", "cross_scale"))
    blocks = _parse_int_list(settings.get("blocks"))
    if blocks:
        for spec in specs:
            spec.block_counts = list(blocks)
    rows = run_ablation(specs, samples, train_cfg, flow_cfg)
    out_path = settings.get("out") or os.path.join(_output_dir(settings), "ablation.json")
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(rows, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for row in rows:
        print(f"{row['variant']} blocks={row['num_blocks']} auroc={row['auroc']:.6f}")
    print(out_path)
    return 0


def cmd_inspect(settings) -> int:
    path = settings.require_path("file", "pyramid file")
    pyramid = read_pyramid(path)
    summary = {
        "sample_id": pyramid.sample_id,
        "num_scales": pyramid.num_scales,
        "channels": pyramid.channels,
        "scales": [list(s.shape) for s in pyramid.scales],
        "total_dims": pyramid.total_dims(),
    }
    print(json.dumps(summary, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="csflow",
        description="Cross-scale normalizing flow for defect detection on feature pyramids.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--threads", type=int,
                        help=f"torch CPU thread cap (default: ${THREADS_ENV_VAR} or hardware)")
    common.add_argument("--output-dir", dest="output_dir", help="directory for outputs (default out)")
    common.add_argument("--seed", type=int, help="seed for everything in this command")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic CSFP dataset")
    p.add_argument("--normals", type=int, help="number of normal samples (default 96)")
    p.add_argument("--anomalies", type=int, help="number of anomalous samples (default 32)")
    p.add_argument("--scales", type=int, help="pyramid levels (default 2)")
    p.add_argument("--channels", type=int, help="channels per level, even (default 8)")
    p.add_argument("--size", type=int, help="finest-scale edge length (default 16)")
    p.add_argument("--amplitude", type=float, help="bump strength in field-std units (default 5)")
    p.add_argument("--radius", type=float, help="bump radius in finest-scale pixels (default 2)")
    p.add_argument("--test-normals", dest="test_normals", type=int,
                   help="normals held out for the test split")
    p.add_argument("--class-name", dest="class_name", help="class tag in the manifest")
    p.set_defaults(func=cmd_synth)

    train_common = argparse.ArgumentParser(add_help=False)
    train_common.add_argument("--manifest", help="dataset manifest JSON")
    train_common.add_argument("--standardize", action="store_const", const=True,
                              help="per-channel standardization from train statistics")
    train_common.add_argument("--learning-rate", dest="learning_rate", type=float)
    train_common.add_argument("--weight-decay", dest="weight_decay", type=float)
    train_common.add_argument("--beta1", dest="adam_beta1", type=float)
    train_common.add_argument("--beta2", dest="adam_beta2", type=float)
    train_common.add_argument("--batch-size", dest="batch_size", type=int)
    train_common.add_argument("--epochs", type=int)
    train_common.add_argument("--grad-clip", dest="grad_clip_norm", type=float)
    train_common.add_argument("--shots", dest="shot_limit", type=int,
                              help="train on this many randomly chosen samples")
    train_common.add_argument("--num-blocks", dest="num_blocks", type=int)
    train_common.add_argument("--kernel-sizes", dest="kernel_sizes",
                              help="comma-separated odd kernel sizes, one per block")
    train_common.add_argument("--clamp-alpha", dest="clamp_alpha", type=float)
    train_common.add_argument("--hidden-factor", dest="hidden_channel_factor", type=int)
    train_common.add_argument("--leaky-slope", dest="leaky_slope", type=float)

    p = sub.add_parser("train", parents=[common, train_common], help="train a flow on the train split")
    p.add_argument("--checkpoint", help="checkpoint output path (default out/model.csfc)")
    p.add_argument("--log", help="progress NDJSON path (default out/train_log.ndjson)")
    p.add_argument("--checkpoint-interval", dest="checkpoint_interval", type=int,
                   help="also save the checkpoint every N epochs")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", parents=[common], help="score a dataset split with a checkpoint")
    p.add_argument("--manifest", help="dataset manifest JSON")
    p.add_argument("--standardize", action="store_const", const=True,
                   help="per-channel standardization from train statistics")
    p.add_argument("--checkpoint", help="model checkpoint path")
    p.add_argument("--mode", dest="score_mode", choices=["nll", "z_energy"],
                   help="anomaly score definition (default nll)")
    p.add_argument("--split", choices=["train", "test", "all"], help="which split (default test)")
    p.add_argument("--out", help="scores CSV path (default out/scores.csv)")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", parents=[common], help="metrics from a labeled scores CSV")
    p.add_argument("--scores", help="scores CSV path")
    p.add_argument("--bins", type=int, help="histogram bin count (default 40)")
    p.add_argument("--clip-max", dest="clip_max", type=float,
                   help="scores above this share the last histogram bin")
    p.add_argument("--out", help="metrics JSON path (default out/metrics.json)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("localize", parents=[common], help="latent-energy maps per sample")
    p.add_argument("--manifest", help="dataset manifest JSON")
    p.add_argument("--standardize", action="store_const", const=True,
                   help="per-channel standardization from train statistics")
    p.add_argument("--checkpoint", help="model checkpoint path")
    p.add_argument("--split", choices=["train", "test", "all"], help="which split (default test)")
    p.add_argument("--sample", help="restrict to one sample id")
    p.add_argument("--target-size", dest="target_size",
                   help="HEIGHT,WIDTH of the exported map (default finest scale)")
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("ablate", parents=[common, train_common],
                       help="train and compare scale-usage variants")
    p.add_argument("--variants",
                   help="comma list: cross_scale, single_scale:<i>, separate_multi_scale, "
                        "concat_multi_scale")
    p.add_argument("--blocks", help="comma list of block counts to sweep")
    p.add_argument("--out", help="report JSON path (default out/ablation.json)")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("inspect", parents=[common], help="summarize a CSFP pyramid file as JSON")
    p.add_argument("file", help="pyramid file path")
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = Settings(args)
        _apply_threads(settings)
        return args.func(settings)
    except _CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
