"""Architecture configuration for the cross-scale flow."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import InvariantViolation


def default_kernel_sizes(num_blocks):
    """3x3 kernels for all blocks except the last, which uses 5x5."""
    if num_blocks == 1:
        return [5]
    return [3] * (num_blocks - 1) + [5]


@dataclass
class FlowConfig:
    num_scales: int
    channels: int
    num_blocks: int = 4
    kernel_sizes: list[int] | None = None
    clamp_alpha: float = 3.0
    hidden_channel_factor: int = 2
    leaky_slope: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.kernel_sizes is None:
            self.kernel_sizes = default_kernel_sizes(self.num_blocks)
        else:
            self.kernel_sizes = list(self.kernel_sizes)

    def validate(self):
        if self.num_scales < 1:
            raise InvariantViolation("num_scales must be >= 1")
        if self.channels < 2 or self.channels % 2 != 0:
            raise InvariantViolation(f"channels must be even and >= 2, got {self.channels}")
        if self.num_blocks < 1:
            raise InvariantViolation("num_blocks must be >= 1")
        if len(self.kernel_sizes) != self.num_blocks:
            raise InvariantViolation(
                f"kernel_sizes has {len(self.kernel_sizes)} entries for {self.num_blocks} blocks"
            )
        for k in self.kernel_sizes:
            if k < 1 or k % 2 == 0:
                raise InvariantViolation(f"kernel sizes must be odd and positive, got {k}")
        if self.clamp_alpha <= 0:
            raise InvariantViolation("clamp_alpha must be positive")
        if self.hidden_channel_factor < 1:
            raise InvariantViolation("hidden_channel_factor must be >= 1")
        if self.leaky_slope < 0:
            raise InvariantViolation("leaky_slope must be >= 0")
        return self

    @property
    def half_channels(self):
        return self.channels // 2

    @property
    def hidden_channels(self):
        return self.hidden_channel_factor * self.half_channels

    def to_json(self):
        return {
            "num_scales": self.num_scales,
            "channels": self.channels,
            "num_blocks": self.num_blocks,
            "kernel_sizes": list(self.kernel_sizes),
            "clamp_alpha": self.clamp_alpha,
            "hidden_channel_factor": self.hidden_channel_factor,
            "leaky_slope": self.leaky_slope,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, doc):
        return cls(**doc)
