"""Greedy autoregressive decoding with an incremental K/V cache.

The prompt is primed in one vectorized forward pass; only newly generated
tokens run the per-position incremental step.
"""
from __future__ import annotations

import math

import numpy as np

from ..prompting import BOS_ID, EOS_ID
from .config import ModelConfig
from .network import effective_weights, forward, gelu, layer_norm
from .state import ModelState

_OPEN_BRACE = ord("{")
_CLOSE_BRACE = ord("}")


class _KVCache:
    def __init__(self, cfg: ModelConfig, capacity: int):
        h, hd = cfg.n_heads, cfg.d_model // cfg.n_heads
        self.k = [np.empty((h, capacity, hd)) for _ in range(cfg.n_layers)]
        self.v = [np.empty((h, capacity, hd)) for _ in range(cfg.n_layers)]
        self.length = 0

    def seed(self, layer_caches) -> None:
        for layer, lc in enumerate(layer_caches):
            t = lc["k"].shape[2]
            self.k[layer][:, :t] = lc["k"][0]
            self.v[layer][:, :t] = lc["v"][0]
        self.length = t


def _step(params, eff, cfg: ModelConfig, kv: _KVCache, token_id: int,
          pos: int) -> np.ndarray:
    """Advance one position; returns the logits row for that position."""
    h = cfg.n_heads
    hd = cfg.d_model // h
    scale = 1.0 / math.sqrt(hd)
    t = kv.length

    x = params["wte"][token_id] + params["wpe"][pos]
    for layer in range(cfg.n_layers):
        p = f"h{layer}."
        a, _ = layer_norm(x, params[p + "ln1.g"], params[p + "ln1.b"])
        q = (a @ eff[p + "attn.wq"]).reshape(h, hd) * scale
        kv.k[layer][:, t] = (a @ eff[p + "attn.wk"]).reshape(h, hd)
        kv.v[layer][:, t] = (a @ eff[p + "attn.wv"]).reshape(h, hd)
        keys = kv.k[layer][:, : t + 1]
        values = kv.v[layer][:, : t + 1]
        att = np.einsum("hd,htd->ht", q, keys)
        att = np.exp(att - att.max(axis=-1, keepdims=True))
        att /= att.sum(axis=-1, keepdims=True)
        ctx = np.einsum("ht,htd->hd", att, values).reshape(cfg.d_model)
        x = x + ctx @ eff[p + "attn.wo"]
        m, _ = layer_norm(x, params[p + "ln2.g"], params[p + "ln2.b"])
        x = x + gelu(m @ eff[p + "mlp.w1"]) @ eff[p + "mlp.w2"]
    kv.length = t + 1
    hf, _ = layer_norm(x, params["lnf.g"], params["lnf.b"])
    return hf @ eff["head"]


def generate(state: ModelState, prompt_ids: list[int],
             max_new_tokens: int) -> list[int]:
    """Greedy decode; deterministic, ties broken by lowest token id.

    Stops at EOS (not emitted), after max_new_tokens, or as soon as the
    emitted bytes form a brace-balanced object.
    """
    cfg = state.model_cfg
    if 1 + len(prompt_ids) > cfg.max_seq_len - max_new_tokens:
        raise ValueError(
            f"prompt of {len(prompt_ids)} tokens does not fit "
            f"max_seq_len {cfg.max_seq_len} minus max_new_tokens {max_new_tokens}"
        )
    if max_new_tokens == 0:
        return []

    seq = np.asarray([[BOS_ID] + prompt_ids], dtype=np.int64)
    logits_all, cache = forward(state.params, state.adapters, cfg,
                                state.lora_cfg, seq, want_cache=True)
    kv = _KVCache(cfg, capacity=len(prompt_ids) + 1 + max_new_tokens)
    kv.seed(cache["layers"])
    logits = logits_all[0, -1]
    eff = cache["eff"]

    out: list[int] = []
    depth = 0
    seen_open = False
    pos = len(prompt_ids) + 1
    while len(out) < max_new_tokens:
        next_id = int(np.argmax(logits))
        if next_id == EOS_ID:
            break
        out.append(next_id)
        if next_id == _OPEN_BRACE:
            seen_open = True
            depth += 1
        elif next_id == _CLOSE_BRACE:
            depth -= 1
        if seen_open and depth <= 0:
            break
        logits = _step(state.params, eff, cfg, kv, next_id, pos)
        pos += 1
    return out
