"""Desk-scale decoder-only transformer with LoRA adapters."""
from .config import (ADAPTABLE_SUFFIXES, LoRAConfig, ModelConfig,
                     OptimizerConfig, expand_targets, lr_at, target_shape)
from .generate import generate
from .network import backward, effective_weights, forward
from .state import (ModelState, init_model, load_checkpoint, save_checkpoint)
from .train import build_batch, fit, nll_loss, train_step

__all__ = [
    "ADAPTABLE_SUFFIXES",
    "LoRAConfig",
    "ModelConfig",
    "ModelState",
    "OptimizerConfig",
    "backward",
    "build_batch",
    "effective_weights",
    "expand_targets",
    "fit",
    "forward",
    "generate",
    "init_model",
    "load_checkpoint",
    "lr_at",
    "nll_loss",
    "save_checkpoint",
    "target_shape",
    "train_step",
]
