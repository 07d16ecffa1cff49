"""Model state: frozen base weights, adapters, optimizer moments, checkpoints."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import CheckpointError, ConfigError
from .config import (LoRAConfig, ModelConfig, expand_targets, target_shape)

CHECKPOINT_VERSION = 1

# Trainable share of the default configuration must stay well below the
# full parameter count; enforced at init.
MAX_TRAINABLE_RATIO = 0.2


@dataclass
class ModelState:
    model_cfg: ModelConfig
    lora_cfg: LoRAConfig
    params: dict[str, np.ndarray]
    adapters: dict[str, dict[str, np.ndarray]]
    opt_m: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)
    opt_v: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)
    step: int = 0

    def base_param_count(self) -> int:
        return sum(p.size for p in self.params.values())

    def trainable_param_count(self) -> int:
        return sum(ab["A"].size + ab["B"].size for ab in self.adapters.values())

    def base_hash(self) -> str:
        """SHA-256 over the frozen base weights, key-sorted, byte-exact."""
        digest = hashlib.sha256()
        for key in sorted(self.params):
            digest.update(key.encode())
            digest.update(self.params[key].tobytes())
        return digest.hexdigest()


def _base_param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {
        "wte": (cfg.vocab_size, cfg.d_model),
        "wpe": (cfg.max_seq_len, cfg.d_model),
    }
    for layer in range(cfg.n_layers):
        p = f"h{layer}."
        shapes[p + "ln1.g"] = (cfg.d_model,)
        shapes[p + "ln1.b"] = (cfg.d_model,)
        for name in ("wq", "wk", "wv", "wo"):
            shapes[p + f"attn.{name}"] = (cfg.d_model, cfg.d_model)
        shapes[p + "ln2.g"] = (cfg.d_model,)
        shapes[p + "ln2.b"] = (cfg.d_model,)
        shapes[p + "mlp.w1"] = (cfg.d_model, cfg.d_ff)
        shapes[p + "mlp.w2"] = (cfg.d_ff, cfg.d_model)
    shapes["lnf.g"] = (cfg.d_model,)
    shapes["lnf.b"] = (cfg.d_model,)
    shapes["head"] = (cfg.d_model, cfg.vocab_size)
    return shapes


def init_model(model_cfg: ModelConfig, lora_cfg: LoRAConfig,
               seed: int) -> ModelState:
    """Seeded Gaussian base surrogate plus zero-delta adapters.

    Adapter A factors are Gaussian, B factors zero, so the fresh model is
    bitwise identical to the base-only model. Deterministic in the seed.
    """
    model_cfg.validate()
    lora_cfg.validate(model_cfg)
    rng = np.random.default_rng(seed)

    residual_scale = 1.0 / math.sqrt(2.0 * model_cfg.n_layers)
    params: dict[str, np.ndarray] = {}
    for key, shape in _base_param_shapes(model_cfg).items():
        if key.endswith((".g",)):
            params[key] = np.ones(shape)
        elif key.endswith((".b",)):
            params[key] = np.zeros(shape)
        elif key in ("wte", "wpe"):
            params[key] = rng.normal(0.0, 1.0, shape)
        else:
            std = 1.0 / math.sqrt(shape[0])
            # Matrices writing into the residual stream are damped so depth
            # does not inflate activation scale.
            if key.endswith(("attn.wo", "mlp.w2")):
                std *= residual_scale
            params[key] = rng.normal(0.0, std, shape)

    adapters: dict[str, dict[str, np.ndarray]] = {}
    opt_m: dict[str, dict[str, np.ndarray]] = {}
    opt_v: dict[str, dict[str, np.ndarray]] = {}
    for key in expand_targets(lora_cfg, model_cfg):
        suffix = key if key == "head" else key.split(".", 1)[1]
        d_in, d_out = target_shape(suffix, model_cfg)
        adapters[key] = {
            "A": rng.normal(0.0, 1.0 / math.sqrt(d_in), (d_in, lora_cfg.rank)),
            "B": np.zeros((lora_cfg.rank, d_out)),
        }
        opt_m[key] = {"A": np.zeros((d_in, lora_cfg.rank)),
                      "B": np.zeros((lora_cfg.rank, d_out))}
        opt_v[key] = {"A": np.zeros((d_in, lora_cfg.rank)),
                      "B": np.zeros((lora_cfg.rank, d_out))}

    state = ModelState(model_cfg=model_cfg, lora_cfg=lora_cfg, params=params,
                       adapters=adapters, opt_m=opt_m, opt_v=opt_v, step=0)

    ratio = state.trainable_param_count() / state.base_param_count()
    if ratio >= MAX_TRAINABLE_RATIO:
        raise ConfigError(
            f"trainable/total parameter ratio {ratio:.3f} >= "
            f"{MAX_TRAINABLE_RATIO}; reduce rank or targets"
        )
    return state


def save_checkpoint(state: ModelState, path: str | Path) -> None:
    """Write a single-file checkpoint that round-trips bit-exactly."""
    path = Path(path)
    meta = {
        "version": CHECKPOINT_VERSION,
        "step": state.step,
        "model_cfg": vars(state.model_cfg),
        "lora_cfg": {
            "rank": state.lora_cfg.rank,
            "alpha": state.lora_cfg.alpha,
            "targets": list(state.lora_cfg.targets),
        },
    }
    arrays: dict[str, np.ndarray] = {
        f"params/{k}": v for k, v in state.params.items()
    }
    for group, name in ((state.adapters, "adapters"), (state.opt_m, "opt_m"),
                        (state.opt_v, "opt_v")):
        for key, ab in group.items():
            arrays[f"{name}/{key}/A"] = ab["A"]
            arrays[f"{name}/{key}/B"] = ab["B"]
    arrays["__meta__"] = np.frombuffer(
        json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8
    )
    with path.open("wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path: str | Path) -> ModelState:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        data = np.load(path, allow_pickle=False)
    except (OSError, ValueError) as exc:
        raise CheckpointError(f"unreadable checkpoint {path}: {exc}") from exc
    meta = json.loads(bytes(data["__meta__"]).decode())
    if meta.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {meta.get('version')!r}"
        )
    model_cfg = ModelConfig(**meta["model_cfg"])
    lc = meta["lora_cfg"]
    lora_cfg = LoRAConfig(rank=lc["rank"], alpha=lc["alpha"],
                          targets=tuple(lc["targets"]))

    params: dict[str, np.ndarray] = {}
    groups: dict[str, dict[str, dict[str, np.ndarray]]] = {
        "adapters": {}, "opt_m": {}, "opt_v": {}
    }
    for name in data.files:
        if name == "__meta__":
            continue
        kind, rest = name.split("/", 1)
        if kind == "params":
            params[rest] = data[name]
        else:
            key, factor = rest.rsplit("/", 1)
            groups[kind].setdefault(key, {})[factor] = data[name]
    return ModelState(
        model_cfg=model_cfg, lora_cfg=lora_cfg, params=params,
        adapters=groups["adapters"], opt_m=groups["opt_m"],
        opt_v=groups["opt_v"], step=meta["step"],
    )
