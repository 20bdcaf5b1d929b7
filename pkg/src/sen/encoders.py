"""Dual encoders: patch-based image transformer and token-based text transformer.

Both produce a full hidden-state sequence plus an L2-normalizable global
feature (image: CLS position; text: EOS position). The image encoder can
replace an arbitrary subset of patch embeddings with a learned mask token
before position embeddings are added, which is how the restoration task
corrupts its input.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn

from .attention import TransformerBlock
from .config import EncoderConfig


def patchify(images: torch.Tensor, patch_size: int) -> torch.Tensor:
    """(B, 3, H, W) -> (B, N, P*P*3) non-overlapping patch rows.

    Patches are ordered row-major over the (H/P, W/P) grid; values within a
    patch are ordered (P, P, 3) so a patch row reads as a tiny HWC image.
    """
    b, c, h, w = images.shape
    if c != 3:
        raise ValueError(f"expected 3 channels, got {c}")
    if h % patch_size or w % patch_size:
        raise ValueError(f"image {h}x{w} not divisible by patch size {patch_size}")
    gh, gw = h // patch_size, w // patch_size
    x = images.reshape(b, c, gh, patch_size, gw, patch_size)
    x = x.permute(0, 2, 4, 3, 5, 1)  # (B, gh, gw, P, P, C)
    return x.reshape(b, gh * gw, patch_size * patch_size * c)


def unpatchify(patches: torch.Tensor, patch_size: int, height: int, width: int) -> torch.Tensor:
    """Inverse of :func:`patchify`; (B, N, P*P*3) -> (B, 3, H, W)."""
    b, n, v = patches.shape
    gh, gw = height // patch_size, width // patch_size
    if n != gh * gw or v != patch_size * patch_size * 3:
        raise ValueError(f"patch tensor {tuple(patches.shape)} does not tile {height}x{width}")
    x = patches.reshape(b, gh, gw, patch_size, patch_size, 3)
    x = x.permute(0, 5, 1, 3, 2, 4)  # (B, C, gh, P, gw, P)
    return x.reshape(b, 3, height, width)


@dataclass
class EncodedSequence:
    """Transformer output: per-position states plus the pooled global."""

    states: torch.Tensor  # (B, N, d), final-layer hidden states
    global_feature: torch.Tensor  # (B, d), not normalized


class ImageEncoder(nn.Module):
    """ViT-style encoder over a CLS token plus non-overlapping patches."""

    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        self.cfg = cfg
        n = cfg.num_patches
        self.patch_embed = nn.Linear(cfg.patch_values, cfg.embed_dim)
        self.cls_token = nn.Parameter(torch.zeros(1, 1, cfg.embed_dim))
        self.mask_token = nn.Parameter(torch.zeros(1, 1, cfg.embed_dim))
        self.pos_embed = nn.Parameter(torch.zeros(1, n + 1, cfg.embed_dim))
        self.blocks = nn.ModuleList(
            TransformerBlock(cfg.embed_dim, cfg.num_heads) for _ in range(cfg.image_layers)
        )
        self.norm = nn.LayerNorm(cfg.embed_dim)
        nn.init.normal_(self.cls_token, std=0.02)
        nn.init.normal_(self.mask_token, std=0.02)
        nn.init.normal_(self.pos_embed, std=0.02)

    def forward(self, images: torch.Tensor, mask: torch.Tensor | None = None) -> EncodedSequence:
        """Encode images, optionally corrupting masked patches.

        Args:
            images: (B, 3, H, W) float tensor.
            mask: optional (B, N) bool, True where the patch embedding is
                replaced by the learned mask token. Replacement happens
                before position embeddings are added, so positional identity
                survives the corruption.

        Returns:
            EncodedSequence with states (B, N+1, d); ``states[:, 0]`` is the
            CLS position and equals ``global_feature``.
        """
        x = self.patch_embed(patchify(images, self.cfg.patch_size))  # (B, N, d)
        if mask is not None:
            x = torch.where(mask.unsqueeze(-1), self.mask_token.to(x.dtype), x)
        cls = self.cls_token.expand(x.shape[0], -1, -1)
        x = torch.cat([cls, x], dim=1) + self.pos_embed
        for blk in self.blocks:
            x = blk(x)
        x = self.norm(x)
        return EncodedSequence(states=x, global_feature=x[:, 0])


class TextEncoder(nn.Module):
    """Token transformer; the EOS position provides the global feature."""

    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        self.cfg = cfg
        self.token_embed = nn.Embedding(cfg.vocab_size, cfg.embed_dim)
        self.pos_embed = nn.Parameter(torch.zeros(1, cfg.max_text_len, cfg.embed_dim))
        self.blocks = nn.ModuleList(
            TransformerBlock(cfg.embed_dim, cfg.num_heads) for _ in range(cfg.text_layers)
        )
        self.norm = nn.LayerNorm(cfg.embed_dim)
        nn.init.normal_(self.token_embed.weight, std=0.02)
        nn.init.normal_(self.pos_embed, std=0.02)
        if cfg.text_causal:
            causal = torch.tril(torch.ones(cfg.max_text_len, cfg.max_text_len, dtype=torch.bool))
            self.register_buffer("causal_mask", causal, persistent=False)
        else:
            self.causal_mask = None

    def forward(
        self,
        token_ids: torch.Tensor,
        pad_mask: torch.Tensor,
        eos_index: torch.Tensor,
    ) -> EncodedSequence:
        """Encode padded token ids.

        Args:
            token_ids: (B, L) int64.
            pad_mask: (B, L) bool, True on real tokens.
            eos_index: (B,) position of the sequence-end token.
        """
        b, length = token_ids.shape
        x = self.token_embed(token_ids) + self.pos_embed[:, :length]
        attn_mask = None
        if self.causal_mask is not None:
            attn_mask = self.causal_mask[:length, :length]
        for blk in self.blocks:
            x = blk(x, key_mask=pad_mask, attn_mask=attn_mask)
        x = self.norm(x)
        pooled = x[torch.arange(b, device=x.device), eos_index]
        return EncodedSequence(states=x, global_feature=pooled)
