"""Scaled dot-product attention, self/guided attention blocks, and the
two-branch co-attention stack used for modality fusion.

Blocks follow the modular co-attention composition: attention -> dropout ->
residual -> LayerNorm, then a pointwise feed-forward sub-layer wrapped the
same way. No positional encoding; the recurrent encoders inject order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import Tensor, nn

from .errors import AllKeysMasked, ShapeMismatch


@dataclass(frozen=True)
class AttentionConfig:
    d_model: int = 128
    n_layers: int = 2
    n_heads: int = 1
    ffn_width: int | None = None    # defaults to 4 * d_model
    dropout_p: float = 0.1

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ValueError("d_model must be divisible by n_heads")
        if self.ffn_width is None:
            object.__setattr__(self, "ffn_width", 4 * self.d_model)


def scaled_dot_attention(q: Tensor, k: Tensor, v: Tensor,
                         key_mask: Tensor | None = None,
                         return_weights: bool = False):
    """softmax(q k^T / sqrt(d)) v over the last two axes.

    q: ... x Nq x d; k: ... x Nk x d; v: ... x Nk x dv. key_mask marks
    valid keys (... x Nk, True = attendable); every query needs at least
    one unmasked key.
    """
    if q.shape[-1] != k.shape[-1]:
        raise ShapeMismatch(f"q depth {q.shape[-1]} != k depth {k.shape[-1]}")
    if k.shape[-2] != v.shape[-2]:
        raise ShapeMismatch(f"k has {k.shape[-2]} rows but v has {v.shape[-2]}")

    d = q.shape[-1]
    scores = q @ k.transpose(-2, -1) / math.sqrt(d)     # ... x Nq x Nk
    if key_mask is not None:
        if key_mask.shape[-1] != k.shape[-2]:
            raise ShapeMismatch("key_mask length must equal the number of keys")
        mask = key_mask.unsqueeze(-2)                   # broadcast over queries
        if not bool(key_mask.any(dim=-1).all()):
            raise AllKeysMasked("a query row has no unmasked key")
        scores = scores.masked_fill(~mask, float("-inf"))
    weights = torch.softmax(scores, dim=-1)
    out = weights @ v
    if return_weights:
        return out, weights
    return out


class AttentionBlock(nn.Module):
    """One attention sub-layer plus feed-forward, residual and LayerNorm.

    forward(x) is self-attention; forward(x, guide=y) draws keys and values
    from the guide sequence while queries come from x. Masked query rows
    are zeroed on exit so downstream pooling stays exact.
    """

    def __init__(self, d_model: int, n_heads: int = 1,
                 ffn_width: int | None = None, dropout_p: float = 0.1):
        super().__init__()
        if d_model % n_heads != 0:
            raise ValueError("d_model must be divisible by n_heads")
        ffn_width = ffn_width or 4 * d_model
        self.d_model = d_model
        self.n_heads = n_heads

        self.q_proj = nn.Linear(d_model, d_model)
        self.k_proj = nn.Linear(d_model, d_model)
        self.v_proj = nn.Linear(d_model, d_model)
        self.out_proj = nn.Linear(d_model, d_model)
        self.ffn = nn.Sequential(
            nn.Linear(d_model, ffn_width),
            nn.ReLU(),
            nn.Linear(ffn_width, d_model),
        )
        self.norm1 = nn.LayerNorm(d_model)
        self.norm2 = nn.LayerNorm(d_model)
        self.drop1 = nn.Dropout(dropout_p)
        self.drop2 = nn.Dropout(dropout_p)

    def _split_heads(self, x: Tensor) -> Tensor:
        b, t, _ = x.shape
        return x.view(b, t, self.n_heads, -1).transpose(1, 2)   # B x h x T x d/h

    def forward(self, x: Tensor, x_mask: Tensor | None = None,
                guide: Tensor | None = None,
                guide_mask: Tensor | None = None) -> Tensor:
        src = x if guide is None else guide
        src_mask = x_mask if guide is None else guide_mask

        q = self._split_heads(self.q_proj(x))
        k = self._split_heads(self.k_proj(src))
        v = self._split_heads(self.v_proj(src))
        key_mask = None if src_mask is None else src_mask.unsqueeze(1)  # over heads
        attn = scaled_dot_attention(q, k, v, key_mask=key_mask)
        attn = attn.transpose(1, 2).reshape(x.shape)
        x = self.norm1(x + self.drop1(self.out_proj(attn)))
        x = self.norm2(x + self.drop2(self.ffn(x)))
        if x_mask is not None:
            x = x * x_mask.unsqueeze(-1).to(x.dtype)
        return x


class CoAttentionStack(nn.Module):
    """Two-branch fusion: branch A refines itself through n_layers of
    self-attention; branch B alternates self-attention with guided
    attention whose keys/values come from A's final output.
    """

    def __init__(self, cfg: AttentionConfig = AttentionConfig()):
        super().__init__()
        self.cfg = cfg

        def block():
            return AttentionBlock(cfg.d_model, cfg.n_heads, cfg.ffn_width, cfg.dropout_p)

        self.enc = nn.ModuleList(block() for _ in range(cfg.n_layers))
        self.dec_self = nn.ModuleList(block() for _ in range(cfg.n_layers))
        self.dec_guided = nn.ModuleList(block() for _ in range(cfg.n_layers))

    def forward(self, a: Tensor, b: Tensor,
                a_mask: Tensor | None = None,
                b_mask: Tensor | None = None) -> tuple[Tensor, Tensor]:
        for blk in self.enc:
            a = blk(a, a_mask)
        # every decoder layer is guided by A's *final* output, not the
        # same-depth intermediate
        for self_blk, guided_blk in zip(self.dec_self, self.dec_guided):
            b = self_blk(b, b_mask)
            b = guided_blk(b, b_mask, guide=a, guide_mask=a_mask)
        return a, b
