"""Model, adapter and optimizer configuration."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..errors import ConfigError

# Weight matrices that can receive low-rank adapters, addressed by the
# suffix of their parameter key ("attn.wq" expands to every layer).
ADAPTABLE_SUFFIXES = (
    "attn.wq", "attn.wk", "attn.wv", "attn.wo", "mlp.w1", "mlp.w2", "head",
)


@dataclass
class ModelConfig:
    n_layers: int = 4
    n_heads: int = 4
    d_model: int = 128
    d_ff: int = 512
    vocab_size: int = 259
    max_seq_len: int = 512

    def validate(self) -> None:
        for name in ("n_layers", "n_heads", "d_model", "d_ff", "vocab_size",
                     "max_seq_len"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.d_model % self.n_heads != 0:
            raise ConfigError(
                f"d_model ({self.d_model}) must be divisible by n_heads "
                f"({self.n_heads})"
            )
        if self.vocab_size < 259:
            raise ConfigError("vocab_size must cover 256 bytes + BOS/EOS/PAD")


@dataclass
class LoRAConfig:
    """Low-rank adapter settings.

    The effective weight of an adapted matrix is W0 + (alpha / rank) * A @ B
    with A (d_in, rank) Gaussian-initialized and B (rank, d_out) zero, so a
    fresh adapter is an exact no-op. alpha does not appear in the source
    update rule W = W0 + BA; alpha = rank recovers that unscaled form.

    Besides the attention query/value projections, the default target set
    includes the output head: the base here is a random surrogate rather
    than a pretrained checkpoint, and a frozen random unembedding caps the
    confidence any Q/V-only adaptation can reach.
    """

    rank: int = 8
    alpha: float = 16.0
    targets: tuple[str, ...] = ("attn.wq", "attn.wv", "head")

    @property
    def scale(self) -> float:
        return self.alpha / self.rank

    def validate(self, model_cfg: ModelConfig) -> None:
        if self.rank <= 0:
            raise ConfigError("rank must be positive")
        if self.alpha <= 0:
            raise ConfigError("alpha must be positive")
        if not self.targets:
            raise ConfigError("at least one adapter target required")
        for target in self.targets:
            if target not in ADAPTABLE_SUFFIXES:
                raise ConfigError(
                    f"unknown adapter target {target!r}; "
                    f"choose from {ADAPTABLE_SUFFIXES}"
                )
            d_in, d_out = target_shape(target, model_cfg)
            if self.rank > min(d_in, d_out) // 2:
                raise ConfigError(
                    f"rank {self.rank} too large for target {target!r} of shape "
                    f"({d_in}, {d_out}); must be <= min/2 = {min(d_in, d_out) // 2}"
                )


def target_shape(target: str, cfg: ModelConfig) -> tuple[int, int]:
    """(d_in, d_out) of an adaptable weight matrix."""
    if target.startswith("attn."):
        return cfg.d_model, cfg.d_model
    if target == "mlp.w1":
        return cfg.d_model, cfg.d_ff
    if target == "mlp.w2":
        return cfg.d_ff, cfg.d_model
    if target == "head":
        return cfg.d_model, cfg.vocab_size
    raise ConfigError(f"unknown adapter target {target!r}")


def expand_targets(lora_cfg: LoRAConfig, model_cfg: ModelConfig) -> list[str]:
    """Expand target suffixes to concrete parameter keys, in layer order."""
    keys = []
    for layer in range(model_cfg.n_layers):
        for suffix in lora_cfg.targets:
            if suffix != "head":
                keys.append(f"h{layer}.{suffix}")
    if "head" in lora_cfg.targets:
        keys.append("head")
    return keys


@dataclass
class OptimizerConfig:
    """AdamW with a linear-warmup + cosine-decay learning-rate schedule."""

    lr: float = 1e-3
    weight_decay: float = 0.0
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    warmup_steps: int = 50
    total_steps: int = 1000

    def validate(self) -> None:
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        if not (0 < self.warmup_steps < self.total_steps):
            raise ConfigError(
                f"need 0 < warmup_steps < total_steps, got "
                f"{self.warmup_steps} / {self.total_steps}"
            )
        if not all(0 <= b < 1 for b in self.betas):
            raise ConfigError("betas must lie in [0, 1)")


def lr_at(cfg: OptimizerConfig, step: int) -> float:
    """Learning rate at a step: linear ramp to lr, then cosine decay to 0."""
    if not 0 <= step <= cfg.total_steps:
        raise ValueError(
            f"step {step} outside [0, {cfg.total_steps}]"
        )
    if step < cfg.warmup_steps:
        return cfg.lr * step / cfg.warmup_steps
    progress = (step - cfg.warmup_steps) / (cfg.total_steps - cfg.warmup_steps)
    return cfg.lr * 0.5 * (1.0 + math.cos(math.pi * progress))
