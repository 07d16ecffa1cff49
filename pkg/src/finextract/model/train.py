"""Teacher-forced NLL training of adapter parameters under AdamW."""
from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, DegenerateInputError, NumericFault
from ..prompting import BOS_ID, EOS_ID, PAD_ID, PromptPair
from .config import LoRAConfig, ModelConfig, OptimizerConfig, lr_at
from .network import backward, forward
from .state import ModelState


def nll_loss(logits: np.ndarray, target_ids: np.ndarray,
             loss_mask: np.ndarray) -> float:
    """Summed negative log-likelihood over the masked target positions.

    logits: (..., T, V); target_ids, loss_mask: (..., T). The mask marks
    exactly the target-sequence positions; prompt and padding positions
    must be zero.
    """
    mask = np.asarray(loss_mask, dtype=np.float64)
    if mask.sum() == 0:
        raise DegenerateInputError("loss mask selects no positions")
    shifted = logits - logits.max(axis=-1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=-1))
    picked = np.take_along_axis(
        shifted, np.asarray(target_ids)[..., None], axis=-1
    )[..., 0]
    return float(((log_z - picked) * mask).sum())


def _nll_and_grad(logits, target_ids, mask):
    """Mean-per-token NLL plus dlogits for the mean loss."""
    n_tokens = float(mask.sum())
    if n_tokens == 0:
        raise DegenerateInputError("loss mask selects no positions")
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=-1, keepdims=True)
    log_z = np.log(exp.sum(axis=-1))
    picked = np.take_along_axis(shifted, target_ids[..., None], axis=-1)[..., 0]
    loss_sum = float(((log_z - picked) * mask).sum())

    dlogits = probs
    np.put_along_axis(
        dlogits, target_ids[..., None],
        np.take_along_axis(dlogits, target_ids[..., None], axis=-1) - 1.0,
        axis=-1,
    )
    dlogits *= mask[..., None] / n_tokens
    return loss_sum / n_tokens, dlogits


def build_batch(pairs: list[PromptPair], max_seq_len: int):
    """Assemble (inputs, labels, mask) arrays for teacher forcing.

    Sequence layout: BOS, prompt, target, EOS, padding. The loss mask
    covers exactly the positions whose label is a target token or the
    closing EOS; prompt and pad positions are excluded.
    """
    if not pairs:
        raise DegenerateInputError("empty batch")
    seqs = []
    prompt_lens = []
    for pair in pairs:
        seq = [BOS_ID] + pair.input_ids + pair.target_ids + [EOS_ID]
        if len(seq) - 1 > max_seq_len:
            raise ConfigError(
                f"prompt+target of {len(seq) - 1} tokens exceeds "
                f"max_seq_len {max_seq_len}"
            )
        seqs.append(seq)
        prompt_lens.append(1 + len(pair.input_ids))

    t = max(len(s) for s in seqs) - 1
    inputs = np.full((len(seqs), t), PAD_ID, dtype=np.int64)
    labels = np.full((len(seqs), t), PAD_ID, dtype=np.int64)
    mask = np.zeros((len(seqs), t), dtype=np.float64)
    for i, seq in enumerate(seqs):
        n = len(seq) - 1
        inputs[i, :n] = seq[:-1]
        labels[i, :n] = seq[1:]
        mask[i, prompt_lens[i] - 1 : n] = 1.0
    return inputs, labels, mask


def train_step(state: ModelState, batch: list[PromptPair],
               opt_cfg: OptimizerConfig) -> float:
    """One AdamW update of the adapter parameters; returns the batch loss.

    The loss is the batch's mean NLL per target token, computed before the
    update (teacher forcing). Base weights are never touched.
    """
    inputs, labels, mask = build_batch(batch, state.model_cfg.max_seq_len)
    logits, cache = forward(state.params, state.adapters, state.model_cfg,
                            state.lora_cfg, inputs, want_cache=True)
    loss, dlogits = _nll_and_grad(logits, labels, mask)
    if not np.isfinite(loss):
        raise NumericFault(f"non-finite loss at step {state.step}",
                           step=state.step, tensor="loss")
    grads = backward(dlogits, cache, state.params, state.adapters,
                     state.model_cfg, state.lora_cfg)

    state.step += 1
    lr = lr_at(opt_cfg, min(state.step, opt_cfg.total_steps))
    beta1, beta2 = opt_cfg.betas
    bc1 = 1.0 - beta1 ** state.step
    bc2 = 1.0 - beta2 ** state.step
    for key, ab_grads in grads.items():
        for factor in ("A", "B"):
            g = ab_grads[factor]
            if not np.all(np.isfinite(g)):
                raise NumericFault(
                    f"non-finite gradient in {key}.{factor} at step {state.step}",
                    step=state.step, tensor=f"{key}.{factor}",
                )
            m = state.opt_m[key][factor]
            v = state.opt_v[key][factor]
            m += (1.0 - beta1) * (g - m)
            v += (1.0 - beta2) * (g * g - v)
            theta = state.adapters[key][factor]
            update = (m / bc1) / (np.sqrt(v / bc2) + opt_cfg.eps)
            theta -= lr * (update + opt_cfg.weight_decay * theta)
    return loss


@dataclass
class TrainLogEntry:
    step: int
    loss: float
    lr: float


def fit(state: ModelState, pairs: list[PromptPair], opt_cfg: OptimizerConfig,
        batch_size: int, seed: int = 0, log_every: int = 50,
        log_cb=None) -> list[TrainLogEntry]:
    """Run opt_cfg.total_steps train steps over length-bucketed batches.

    Pairs are sorted by length and grouped into fixed batches; batch order
    is reshuffled every epoch. Deterministic in the seed.
    """
    opt_cfg.validate()
    if not pairs:
        raise DegenerateInputError("no training pairs")
    ordered = sorted(pairs, key=lambda p: p.total_len)
    batches = [ordered[i : i + batch_size]
               for i in range(0, len(ordered), batch_size)]
    rng = random.Random(seed)
    history: list[TrainLogEntry] = []

    order: list[int] = []
    while state.step < opt_cfg.total_steps:
        if not order:
            order = list(range(len(batches)))
            rng.shuffle(order)
        loss = train_step(state, batches[order.pop()], opt_cfg)
        if state.step % log_every == 0 or state.step == opt_cfg.total_steps:
            entry = TrainLogEntry(step=state.step, loss=loss,
                                  lr=lr_at(opt_cfg, state.step))
            history.append(entry)
            if log_cb is not None:
                log_cb(entry)
    return history
