"""Attention primitives shared by the encoders and the restoration decoder.

``mca`` is the bare masked cross-attention map (no learned projections);
``MultiHeadAttention`` wraps it with the usual q/k/v/out projections so the
same arithmetic backs self-attention, cross-attention and the fused decoder
variants.
"""

from __future__ import annotations

import math

import torch
import torch.nn as nn
import torch.nn.functional as F


def mca(
    queries: torch.Tensor,
    keys: torch.Tensor,
    values: torch.Tensor,
    num_heads: int = 1,
    key_mask: torch.Tensor | None = None,
    attn_mask: torch.Tensor | None = None,
    return_weights: bool = False,
):
    """Multi-head scaled dot-product cross-attention without projections.

    Args:
        queries: (B, N_q, d).
        keys: (B, N_k, d).
        values: (B, N_k, d).
        num_heads: head count; d must divide evenly.
        key_mask: optional (B, N_k) bool, True where the key is valid.
        attn_mask: optional (N_q, N_k) bool, True where attention is allowed.
        return_weights: also return the (B, heads, N_q, N_k) attention map.

    Returns:
        (B, N_q, d) attention output, heads concatenated; each output row is
        a convex combination of value rows. With a single key (N_k == 1) the
        softmax is a no-op and every output row equals that key's value row.
    """
    b, n_q, d = queries.shape
    n_k = keys.shape[1]
    if d % num_heads != 0:
        raise ValueError(f"dim {d} not divisible by {num_heads} heads")
    if keys.shape[-1] != d or values.shape[-1] != d or values.shape[1] != n_k:
        raise ValueError(
            f"shape mismatch: q {tuple(queries.shape)}, k {tuple(keys.shape)}, v {tuple(values.shape)}"
        )
    head_dim = d // num_heads

    q = queries.reshape(b, n_q, num_heads, head_dim).transpose(1, 2)
    k = keys.reshape(b, n_k, num_heads, head_dim).transpose(1, 2)
    v = values.reshape(b, n_k, num_heads, head_dim).transpose(1, 2)

    scores = (q @ k.transpose(-2, -1)) / math.sqrt(head_dim)  # (B, h, N_q, N_k)
    if attn_mask is not None:
        scores = scores.masked_fill(~attn_mask.view(1, 1, n_q, n_k), float("-inf"))
    if key_mask is not None:
        scores = scores.masked_fill(~key_mask.view(b, 1, 1, n_k), float("-inf"))
    attn = F.softmax(scores, dim=-1)
    out = (attn @ v).transpose(1, 2).reshape(b, n_q, d)  # heads concatenated
    if return_weights:
        return out, attn
    return out


class MultiHeadAttention(nn.Module):
    """Projected multi-head attention over arbitrary query/key tensors."""

    def __init__(self, dim: int, num_heads: int):
        super().__init__()
        if dim % num_heads != 0:
            raise ValueError(f"dim {dim} not divisible by {num_heads} heads")
        self.dim = dim
        self.num_heads = num_heads
        self.q_proj = nn.Linear(dim, dim)
        self.k_proj = nn.Linear(dim, dim)
        self.v_proj = nn.Linear(dim, dim)
        self.out_proj = nn.Linear(dim, dim)
        for proj in (self.q_proj, self.k_proj, self.v_proj, self.out_proj):
            nn.init.zeros_(proj.bias)

    def forward(
        self,
        queries: torch.Tensor,
        keys: torch.Tensor | None = None,
        values: torch.Tensor | None = None,
        key_mask: torch.Tensor | None = None,
        attn_mask: torch.Tensor | None = None,
    ) -> torch.Tensor:
        if keys is None:
            keys = queries
        if values is None:
            values = keys
        out = mca(
            self.q_proj(queries),
            self.k_proj(keys),
            self.v_proj(values),
            num_heads=self.num_heads,
            key_mask=key_mask,
            attn_mask=attn_mask,
        )
        return self.out_proj(out)


class Mlp(nn.Module):
    def __init__(self, dim: int, hidden_ratio: float = 4.0):
        super().__init__()
        hidden = int(dim * hidden_ratio)
        self.fc1 = nn.Linear(dim, hidden)
        self.fc2 = nn.Linear(hidden, dim)
        nn.init.zeros_(self.fc1.bias)
        nn.init.zeros_(self.fc2.bias)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.fc2(F.gelu(self.fc1(x)))


class TransformerBlock(nn.Module):
    """Pre-norm self-attention block, the unit of both encoders."""

    def __init__(self, dim: int, num_heads: int, mlp_ratio: float = 4.0):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.attn = MultiHeadAttention(dim, num_heads)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = Mlp(dim, mlp_ratio)

    def forward(
        self,
        x: torch.Tensor,
        key_mask: torch.Tensor | None = None,
        attn_mask: torch.Tensor | None = None,
    ) -> torch.Tensor:
        h = self.norm1(x)
        x = x + self.attn(h, h, h, key_mask=key_mask, attn_mask=attn_mask)
        x = x + self.mlp(self.norm2(x))
        return x
