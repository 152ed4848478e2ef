"""Maximum-likelihood training of the flow.

The loss is the per-dimension normalized negative log-likelihood of a standard
normal latent: (||z||^2 / 2 - logdet) / D. Updates are AdamW steps with the
decoupled weight decay applied to convolution weights only, after global l2
gradient clipping. Everything is deterministic given the config seed.
"""

from __future__ import annotations

import json
import time
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
import torch

from .errors import InvariantViolation, NonFiniteError
from .flow.api import LatentResult, pyramids_to_tensors
from .flow.checkpoint import save_checkpoint
from .flow.modules import CrossScaleFlow

PROBE_EPOCH_INTERVAL = 10


@dataclass
class TrainConfig:
    learning_rate: float = 2e-4
    weight_decay: float = 1e-5
    adam_beta1: float = 0.5
    adam_beta2: float = 0.9
    batch_size: int = 16
    epochs: int = 240
    grad_clip_norm: float = 1.0
    shot_limit: int | None = None
    seed: int = 0

    def validate(self):
        positive = {
            "learning_rate": self.learning_rate,
            "weight_decay": self.weight_decay,
            "adam_beta1": self.adam_beta1,
            "adam_beta2": self.adam_beta2,
            "batch_size": self.batch_size,
            "grad_clip_norm": self.grad_clip_norm,
        }
        for name, value in positive.items():
            if not value > 0:
                raise InvariantViolation(f"{name} must be positive, got {value}")
        if self.epochs < 1:
            raise InvariantViolation(f"epochs must be >= 1, got {self.epochs}")
        if self.shot_limit is not None and self.shot_limit < 1:
            raise InvariantViolation(f"shot_limit must be >= 1, got {self.shot_limit}")
        return self

    def to_json(self):
        return {
            "learning_rate": self.learning_rate,
            "weight_decay": self.weight_decay,
            "adam_beta1": self.adam_beta1,
            "adam_beta2": self.adam_beta2,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "grad_clip_norm": self.grad_clip_norm,
            "shot_limit": self.shot_limit,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, data):
        return cls(**data).validate()


@dataclass
class TrainState:
    """Model plus optimizer accumulators and the per-epoch loss history."""

    model: CrossScaleFlow
    optimizer: torch.optim.Optimizer
    step_count: int = 0
    epoch_mean_nll: list[float] = field(default_factory=list)

    def moment_shapes(self):
        """Adam accumulator shapes, for the shape-mirroring invariant."""
        shapes = []
        for group in self.optimizer.param_groups:
            for p in group["params"]:
                state = self.optimizer.state.get(p, {})
                if "exp_avg" in state:
                    shapes.append((tuple(state["exp_avg"].shape), tuple(p.shape)))
        return shapes


def nll_per_sample(latent: LatentResult, total_dims=None, normalized=True):
    """Per-sample NLL values from latents and log-determinants."""
    raw = latent.z_norm_squared() / 2.0 - latent.logdet
    if not normalized:
        return raw
    dims = latent.total_dims() if total_dims is None else int(total_dims)
    return raw / dims


def nll_loss(latent: LatentResult, total_dims=None, normalized=True):
    """Batch-mean NLL (normalized per dimension unless told otherwise)."""
    return float(np.mean(nll_per_sample(latent, total_dims, normalized)))


def _batch_loss(model, xs):
    """Differentiable batch-mean normalized NLL on stacked tensors."""
    zs, logdet = model(xs)
    dims = sum(z[0].numel() for z in zs)
    norm_sq = sum(z.pow(2).sum(dim=(1, 2, 3)) for z in zs)
    per_sample = norm_sq / 2.0 - logdet
    return per_sample.mean() / dims, zs


def compute_gradients(model: CrossScaleFlow, batch) -> "OrderedDict[str, np.ndarray]":
    """Reverse-mode gradients of the batch-mean normalized NLL per parameter."""
    if not batch:
        raise ValueError("empty batch")
    xs = pyramids_to_tensors(batch, model.config)
    model.zero_grad(set_to_none=True)
    loss, _ = _batch_loss(model, xs)
    if not torch.isfinite(loss):
        raise NonFiniteError("non-finite training loss")
    loss.backward()
    grads = OrderedDict()
    for name, param in model.named_parameters():
        grad = param.grad
        grads[name] = np.zeros(param.shape) if grad is None else grad.detach().numpy().copy()
    model.zero_grad(set_to_none=True)
    return grads


def global_grad_norm(grads) -> float:
    values = grads.values() if hasattr(grads, "values") else grads
    return float(np.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in values)))


def clip_gradients(grads, max_norm):
    """Scale all gradients by max_norm/g when the global l2 norm g exceeds max_norm."""
    if not max_norm > 0:
        raise InvariantViolation(f"max_norm must be positive, got {max_norm}")
    norm = global_grad_norm(grads)
    if norm <= max_norm:
        return grads
    factor = max_norm / norm
    if hasattr(grads, "items"):
        return OrderedDict((name, g * factor) for name, g in grads.items())
    return [g * factor for g in grads]


def _clip_in_place(params, max_norm):
    """Torch-side counterpart of clip_gradients; returns the pre-clip norm."""
    grads = [p.grad for p in params if p.grad is not None]
    norm = torch.sqrt(sum(g.pow(2).sum() for g in grads))
    if norm > max_norm:
        factor = max_norm / norm
        with torch.no_grad():
            for g in grads:
                g.mul_(factor)
    return float(norm)


def _split_decay_groups(model):
    """Decoupled weight decay hits conv weights only, never biases or the γ scalars."""
    decay, no_decay = [], []
    for name, param in model.named_parameters():
        (decay if name.endswith(".weight") else no_decay).append(param)
    return decay, no_decay


def build_optimizer(model: CrossScaleFlow, cfg: TrainConfig):
    decay, no_decay = _split_decay_groups(model)
    return torch.optim.AdamW(
        [
            {"params": decay, "weight_decay": cfg.weight_decay},
            {"params": no_decay, "weight_decay": 0.0},
        ],
        lr=cfg.learning_rate,
        betas=(cfg.adam_beta1, cfg.adam_beta2),
    )


def _emit(sink, record):
    if sink is None:
        return
    if hasattr(sink, "write"):
        sink.write(json.dumps(record, sort_keys=True) + "\n")
        if hasattr(sink, "flush"):
            sink.flush()
    else:
        sink(record)


def _probe_bijectivity(model, xs, epoch):
    with torch.no_grad():
        zs, _ = model(xs)
        back = model.inverse(zs)
    worst = max(float((y - x).abs().max()) for y, x in zip(back, xs))
    bound = 1e-4 * (1.0 + max(float(x.abs().max()) for x in xs))
    if worst >= bound:
        raise InvariantViolation(
            f"bijectivity probe failed at epoch {epoch}: reconstruction error {worst:.3e}"
        )


def select_shot_subset(num_samples, shot_limit, seed):
    """Deterministic subsample of training indices when a shot limit is set."""
    if shot_limit is None or shot_limit >= num_samples:
        return np.arange(num_samples)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0])))
    return np.sort(rng.choice(num_samples, size=shot_limit, replace=False))


def epoch_order(num_samples, seed, epoch):
    """Per-epoch shuffle stream, derived from (seed, epoch)."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, epoch])))
    return rng.permutation(num_samples)


def train(
    model: CrossScaleFlow,
    dataset,
    cfg: TrainConfig,
    sink=None,
    checkpoint_path=None,
    checkpoint_interval=None,
) -> TrainState:
    """Run the full epoch loop on an all-normal training set.

    ``dataset`` is a sequence of pyramids (or per-scale array lists) sharing one
    shape signature. ``sink`` receives one structured record per epoch. When
    ``checkpoint_path`` is set the model is saved there at completion and, if
    ``checkpoint_interval`` is set, every that-many epochs along the way.
    """
    cfg.validate()
    if len(dataset) == 0:
        raise ValueError("empty training dataset")

    indices = select_shot_subset(len(dataset), cfg.shot_limit, cfg.seed)
    samples = [dataset[i] for i in indices]
    stacked = pyramids_to_tensors(samples, model.config)
    probe = [x[: min(2, x.shape[0])].clone() for x in stacked]

    optimizer = build_optimizer(model, cfg)
    state = TrainState(model=model, optimizer=optimizer)
    params = [p for group in optimizer.param_groups for p in group["params"]]
    started = time.perf_counter()

    for epoch in range(1, cfg.epochs + 1):
        order = epoch_order(len(samples), cfg.seed, epoch)
        loss_sum = 0.0
        norm_sum = 0.0
        steps = 0
        for start in range(0, len(order), cfg.batch_size):
            chosen = order[start : start + cfg.batch_size]
            xs = [x[chosen] for x in stacked]
            optimizer.zero_grad(set_to_none=True)
            try:
                loss, _ = _batch_loss(model, xs)
            except NonFiniteError as exc:
                raise NonFiniteError(f"epoch {epoch}: {exc}") from None
            if not torch.isfinite(loss):
                raise NonFiniteError(f"epoch {epoch}: non-finite training loss")
            loss.backward()
            norm_sum += _clip_in_place(params, cfg.grad_clip_norm)
            optimizer.step()
            loss_sum += float(loss.detach()) * len(chosen)
            steps += 1
            state.step_count += 1

        mean_nll = loss_sum / len(samples)
        state.epoch_mean_nll.append(mean_nll)
        _emit(
            sink,
            {
                "epoch": epoch,
                "mean_nll": mean_nll,
                "grad_norm_pre_clip": norm_sum / steps,
                "wall_time": time.perf_counter() - started,
            },
        )
        if epoch % PROBE_EPOCH_INTERVAL == 0:
            _probe_bijectivity(model, probe, epoch)
        if checkpoint_path is not None and checkpoint_interval and epoch % checkpoint_interval == 0:
            save_checkpoint(model, checkpoint_path)

    if checkpoint_path is not None:
        save_checkpoint(model, checkpoint_path)
    return state
