"""Decoder-only transformer forward/backward in float64 numpy.

Pre-LN blocks: x += Attn(LN(x)); x += MLP(LN(x)); final LN; untied output
head. Adapted matrices use W0 + (alpha/rank) * A @ B as their effective
weight. The backward pass propagates activation gradients through the whole
network but materializes parameter gradients only for adapter factors;
base weights are frozen by construction.

Summation order is fixed (plain numpy reductions, sequential over layers),
so results are reproducible bit-for-bit for a fixed BLAS thread count.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import erf

from ..errors import ConfigError
from .config import LoRAConfig, ModelConfig

Params = dict[str, np.ndarray]
Adapters = dict[str, dict[str, np.ndarray]]

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_LN_EPS = 1e-5


def gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x / _SQRT2))


def _gelu_fwd(x: np.ndarray):
    phi = 0.5 * (1.0 + erf(x / _SQRT2))
    return x * phi, phi


def _gelu_grad(x: np.ndarray, phi: np.ndarray) -> np.ndarray:
    return phi + x * np.exp(-0.5 * x * x) * _INV_SQRT_2PI


def layer_norm(x, gain, bias):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + _LN_EPS)
    xhat = xc * inv
    return gain * xhat + bias, (xhat, inv, gain)


def layer_norm_grad(dy, ln_cache):
    xhat, inv, gain = ln_cache
    dxhat = dy * gain
    m1 = dxhat.mean(axis=-1, keepdims=True)
    m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
    return inv * (dxhat - m1 - xhat * m2)


def softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _causal_softmax(scores: np.ndarray, tril: np.ndarray) -> np.ndarray:
    """Row softmax restricted to the lower triangle.

    exp is evaluated only on causal positions (ufunc where=); future
    positions stay exactly zero.
    """
    m = scores.max(axis=-1, keepdims=True, where=tril, initial=-np.inf)
    e = np.zeros_like(scores)
    np.exp(scores - m, out=e, where=tril)
    e /= e.sum(axis=-1, keepdims=True)
    return e


def effective_weights(params: Params, adapters: Adapters,
                      lora_cfg: LoRAConfig) -> Params:
    """Base weights with adapter deltas folded in for the adapted keys."""
    eff = dict(params)
    for key, ab in adapters.items():
        eff[key] = params[key] + lora_cfg.scale * (ab["A"] @ ab["B"])
    return eff


def _split_heads(x, n_heads):
    b, t, d = x.shape
    return np.ascontiguousarray(
        x.reshape(b, t, n_heads, d // n_heads).transpose(0, 2, 1, 3)
    )


def _merge_heads(x):
    b, h, t, hd = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, t, h * hd)


def forward(params: Params, adapters: Adapters, model_cfg: ModelConfig,
            lora_cfg: LoRAConfig, ids: np.ndarray, want_cache: bool = False):
    """Run the model over ids (B, T); returns (logits, cache).

    Logits at position t depend only on ids[..t] (causal masking).
    """
    b, t = ids.shape
    if t > model_cfg.max_seq_len:
        raise ConfigError(
            f"sequence length {t} exceeds max_seq_len {model_cfg.max_seq_len}"
        )
    eff = effective_weights(params, adapters, lora_cfg)
    h = model_cfg.n_heads
    scale = 1.0 / math.sqrt(model_cfg.d_model // h)
    tril = np.tril(np.ones((t, t), dtype=bool))

    x = params["wte"][ids] + params["wpe"][:t][None, :, :]
    cache: dict = {"ids": ids, "eff": eff, "layers": []}

    for layer in range(model_cfg.n_layers):
        p = f"h{layer}."
        lc: dict = {"x_in": x}
        a_in, lc["ln1"] = layer_norm(x, params[p + "ln1.g"], params[p + "ln1.b"])
        lc["a_in"] = a_in

        # Fused QKV projection: one GEMM against the concatenated weights.
        wqkv = np.concatenate(
            [eff[p + "attn.wq"], eff[p + "attn.wk"], eff[p + "attn.wv"]], axis=1
        )
        qkv = a_in @ wqkv
        d = model_cfg.d_model
        q = _split_heads(qkv[..., :d] * scale, h)
        k = _split_heads(qkv[..., d : 2 * d], h)
        v = _split_heads(qkv[..., 2 * d :], h)
        att = _causal_softmax(q @ k.transpose(0, 1, 3, 2), tril)
        ctx = _merge_heads(att @ v)
        x = x + ctx @ eff[p + "attn.wo"]
        lc.update(q=q, k=k, v=v, att=att, ctx=ctx, x_mid=x)

        m_in, lc["ln2"] = layer_norm(x, params[p + "ln2.g"], params[p + "ln2.b"])
        u = m_in @ eff[p + "mlp.w1"]
        g, phi = _gelu_fwd(u)
        x = x + g @ eff[p + "mlp.w2"]
        lc.update(m_in=m_in, u=u, g=g, phi=phi)

        cache["layers"].append(lc if want_cache else None)

    h_final, lnf = layer_norm(x, params["lnf.g"], params["lnf.b"])
    logits = h_final @ eff["head"]
    if want_cache:
        cache.update(h_final=h_final, lnf=lnf)
        return logits, cache
    return logits, None


def backward(dlogits: np.ndarray, cache: dict, params: Params,
             adapters: Adapters, model_cfg: ModelConfig,
             lora_cfg: LoRAConfig) -> dict[str, dict[str, np.ndarray]]:
    """Backpropagate dlogits; returns gradients for adapter factors only.

    For an adapted weight W_eff = W0 + s*A@B the chain rule gives
    dA = s * dW_eff @ B.T and dB = s * A.T @ dW_eff, where dW_eff is the
    ordinary weight gradient of the effective matrix.
    """
    eff = cache["eff"]
    h = model_cfg.n_heads
    d = model_cfg.d_model
    scale = 1.0 / math.sqrt(d // h)

    weight_grads: dict[str, np.ndarray] = {}

    def matmul_grad(key: str, x: np.ndarray, dy: np.ndarray) -> None:
        # dW for y = x @ W, contracted over batch and time.
        if key in adapters:
            weight_grads[key] = (
                x.reshape(-1, x.shape[-1]).T @ dy.reshape(-1, dy.shape[-1])
            )

    dh_final = dlogits @ eff["head"].T
    matmul_grad("head", cache["h_final"], dlogits)
    dx = layer_norm_grad(dh_final, cache["lnf"])

    for layer in reversed(range(model_cfg.n_layers)):
        p = f"h{layer}."
        lc = cache["layers"][layer]

        # MLP block: x_out = x_mid + gelu(m_in @ w1) @ w2
        dg = dx @ eff[p + "mlp.w2"].T
        matmul_grad(p + "mlp.w2", lc["g"], dx)
        du = dg * _gelu_grad(lc["u"], lc["phi"])
        matmul_grad(p + "mlp.w1", lc["m_in"], du)
        dm_in = du @ eff[p + "mlp.w1"].T
        dx = dx + layer_norm_grad(dm_in, lc["ln2"])

        # Attention block: x_mid = x_in + merge(att @ v) @ wo
        dctx = dx @ eff[p + "attn.wo"].T
        matmul_grad(p + "attn.wo", lc["ctx"], dx)
        dctx_h = _split_heads(dctx, h)

        att, q, k, v = lc["att"], lc["q"], lc["k"], lc["v"]
        datt = dctx_h @ v.transpose(0, 1, 3, 2)
        dv = att.transpose(0, 1, 3, 2) @ dctx_h
        dscores = att * (datt - (datt * att).sum(axis=-1, keepdims=True))
        dq = dscores @ k * scale  # q was pre-scaled in the forward pass
        dk = dscores.transpose(0, 1, 3, 2) @ q  # q already carries the scale

        dqkv = np.concatenate(
            [_merge_heads(dq), _merge_heads(dk), _merge_heads(dv)], axis=-1
        )
        a_in = lc["a_in"]
        if p + "attn.wq" in adapters or p + "attn.wk" in adapters \
                or p + "attn.wv" in adapters:
            dwqkv = a_in.reshape(-1, d).T @ dqkv.reshape(-1, 3 * d)
            for i, name in enumerate(("wq", "wk", "wv")):
                key = p + f"attn.{name}"
                if key in adapters:
                    weight_grads[key] = dwqkv[:, i * d : (i + 1) * d]
        wqkv = np.concatenate(
            [eff[p + "attn.wq"], eff[p + "attn.wk"], eff[p + "attn.wv"]], axis=1
        )
        da_in = dqkv @ wqkv.T
        dx = dx + layer_norm_grad(da_in, lc["ln1"])

    grads: dict[str, dict[str, np.ndarray]] = {}
    for key, ab in adapters.items():
        dw = weight_grads[key]
        grads[key] = {
            "A": lora_cfg.scale * dw @ ab["B"].T,
            "B": lora_cfg.scale * ab["A"].T @ dw,
        }
    return grads
