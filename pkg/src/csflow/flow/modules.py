"""Torch modules implementing the cross-scale flow.

A coupling block permutes channels per scale, splits them in half, and lets
each half regress element-wise affine parameters for the other half through a
cross-scale convolutional subnet. Scale activations are soft-clamped before
exponentiation, and the learnable per-block coefficients start at zero so a
fresh model is a pure channel permutation.
"""

from __future__ import annotations

import math

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from ..errors import NonFiniteError


def soft_clamp(h, alpha):
    """Map values smoothly into (-alpha, alpha): (2*alpha/pi) * arctan(h / alpha)."""
    if isinstance(h, torch.Tensor):
        return (2.0 * alpha / math.pi) * torch.atan(h / alpha)
    return (2.0 * alpha / math.pi) * np.arctan(np.asarray(h, dtype=np.float64) / alpha)


def _init_conv(conv, rng):
    """Fan-in-scaled uniform init, drawn from the shared numpy stream."""
    out_c, in_c, kh, kw = conv.weight.shape
    bound = 1.0 / math.sqrt(in_c * kh * kw)
    w = rng.uniform(-bound, bound, size=(out_c, in_c, kh, kw))
    b = rng.uniform(-bound, bound, size=(out_c,))
    with torch.no_grad():
        conv.weight.copy_(torch.from_numpy(w))
        conv.bias.copy_(torch.from_numpy(b))


def _conv(in_c, out_c, kernel, stride=1):
    return nn.Conv2d(in_c, out_c, kernel, stride=stride, padding=kernel // 2, dtype=torch.float64)


class CrossScaleSubnet(nn.Module):
    """Regresses per-scale scale/shift parameters from the opposite coupling half.

    Level 1 applies one convolution plus leaky ReLU per scale. Level 2 sums a
    same-scale convolution with contributions from the adjacent scales:
    finer neighbors arrive through stride-2 convolutions, coarser neighbors
    through a convolution at their own resolution followed by 2x bilinear
    upsampling. The output is split channel-wise into the (clamped) scale and
    the shift component.
    """

    def __init__(self, num_scales, in_channels, hidden_channels, out_channels, kernel, clamp_alpha, leaky_slope):
        super().__init__()
        self.num_scales = num_scales
        self.clamp_alpha = clamp_alpha
        self.leaky_slope = leaky_slope
        self.level1 = nn.ModuleList(_conv(in_channels, hidden_channels, kernel) for _ in range(num_scales))
        self.same = nn.ModuleList(_conv(hidden_channels, out_channels, kernel) for _ in range(num_scales))
        self.down = nn.ModuleList(
            _conv(hidden_channels, out_channels, kernel, stride=2) for _ in range(num_scales - 1)
        )
        self.up = nn.ModuleList(_conv(hidden_channels, out_channels, kernel) for _ in range(num_scales - 1))

    def init_weights(self, rng):
        for conv in self.conv_sequence():
            _init_conv(conv, rng)

    def conv_sequence(self):
        """Fixed draw order for deterministic initialization."""
        return [*self.level1, *self.same, *self.down, *self.up]

    def forward(self, xs):
        hidden = [F.leaky_relu(conv(x), negative_slope=self.leaky_slope) for conv, x in zip(self.level1, xs)]
        outputs = []
        for i in range(self.num_scales):
            out = self.same[i](hidden[i])
            if i + 1 < self.num_scales:
                coarse = self.up[i](hidden[i + 1])
                out = out + F.interpolate(coarse, scale_factor=2, mode="bilinear", align_corners=False)
            if i > 0:
                out = out + self.down[i - 1](hidden[i - 1])
            outputs.append(out)
        half = outputs[0].shape[1] // 2
        scales = [soft_clamp(out[:, :half], self.clamp_alpha) for out in outputs]
        shifts = [out[:, half:] for out in outputs]
        return scales, shifts


class CouplingBlock(nn.Module):
    """One affine coupling step over all scales with fixed channel permutations."""

    def __init__(self, config, kernel):
        super().__init__()
        self.num_scales = config.num_scales
        self.half = config.half_channels
        args = (
            config.num_scales,
            config.half_channels,
            config.hidden_channels,
            config.channels,
            kernel,
            config.clamp_alpha,
            config.leaky_slope,
        )
        self.subnet1 = CrossScaleSubnet(*args)
        self.subnet2 = CrossScaleSubnet(*args)
        self.gamma1 = nn.Parameter(torch.zeros((), dtype=torch.float64))
        self.gamma2 = nn.Parameter(torch.zeros((), dtype=torch.float64))
        for i in range(config.num_scales):
            self.register_buffer(f"perm_{i}", torch.arange(config.channels))
            self.register_buffer(f"perm_inv_{i}", torch.arange(config.channels))

    def init_state(self, rng, channels):
        for i in range(self.num_scales):
            perm = rng.permutation(channels)
            inv = np.argsort(perm)
            getattr(self, f"perm_{i}").copy_(torch.from_numpy(perm))
            getattr(self, f"perm_inv_{i}").copy_(torch.from_numpy(inv))
        self.subnet1.init_weights(rng)
        self.subnet2.init_weights(rng)

    def permutations(self):
        return [getattr(self, f"perm_{i}") for i in range(self.num_scales)]

    def forward(self, xs):
        permuted = [x.index_select(1, getattr(self, f"perm_{i}")) for i, x in enumerate(xs)]
        first = [x[:, : self.half] for x in permuted]
        second = [x[:, self.half :] for x in permuted]
        s1, t1 = self.subnet1(first)
        second_out = [v * torch.exp(self.gamma1 * s) + self.gamma1 * t for v, s, t in zip(second, s1, t1)]
        s2, t2 = self.subnet2(second_out)
        first_out = [u * torch.exp(self.gamma2 * s) + self.gamma2 * t for u, s, t in zip(first, s2, t2)]
        logdet = sum(
            (self.gamma1 * a).sum(dim=(1, 2, 3)) + (self.gamma2 * b).sum(dim=(1, 2, 3))
            for a, b in zip(s1, s2)
        )
        outputs = [torch.cat([u, v], dim=1) for u, v in zip(first_out, second_out)]
        return outputs, logdet

    def inverse(self, zs):
        first_out = [z[:, : self.half] for z in zs]
        second_out = [z[:, self.half :] for z in zs]
        s2, t2 = self.subnet2(second_out)
        first = [(u - self.gamma2 * t) * torch.exp(-self.gamma2 * s) for u, s, t in zip(first_out, s2, t2)]
        s1, t1 = self.subnet1(first)
        second = [(v - self.gamma1 * t) * torch.exp(-self.gamma1 * s) for v, s, t in zip(second_out, s1, t1)]
        merged = [torch.cat([u, v], dim=1) for u, v in zip(first, second)]
        return [x.index_select(1, getattr(self, f"perm_inv_{i}")) for i, x in enumerate(merged)]


class CrossScaleFlow(nn.Module):
    """Chain of coupling blocks transforming a feature pyramid bijectively."""

    def __init__(self, config):
        super().__init__()
        config.validate()
        self.config = config
        self.blocks = nn.ModuleList(CouplingBlock(config, k) for k in config.kernel_sizes)
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(config.seed)))
        for block in self.blocks:
            block.init_state(rng, config.channels)

    def forward(self, xs):
        batch = xs[0].shape[0]
        logdet = torch.zeros(batch, dtype=xs[0].dtype, device=xs[0].device)
        for idx, block in enumerate(self.blocks):
            xs, block_logdet = block(xs)
            logdet = logdet + block_logdet
            if not all(torch.isfinite(x).all() for x in xs):
                raise NonFiniteError(f"non-finite values after coupling block {idx}")
        return xs, logdet

    def inverse(self, zs):
        for idx in range(len(self.blocks) - 1, -1, -1):
            zs = self.blocks[idx].inverse(zs)
            if not all(torch.isfinite(z).all() for z in zs):
                raise NonFiniteError(f"non-finite values after inverting coupling block {idx}")
        return zs

    def trainable_parameters(self):
        """Named parameters in a stable order (permutations are buffers, not trained)."""
        return list(self.named_parameters())
