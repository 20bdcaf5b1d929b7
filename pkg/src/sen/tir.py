"""Text-guided image restoration: masking, cross-modal decoder, pixel loss.

The task corrupts a fixed fraction of image patches, encodes the corrupted
image, and asks a shallow decoder to regress the missing pixels while
attending to the caption's hidden states. Restoration quality is scored only
on masked patches; unmasked positions never influence the loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn

from .attention import Mlp, MultiHeadAttention
from .config import DecoderConfig, EncoderConfig


def mask_count(num_patches: int, mask_ratio: float) -> int:
    """Number of patches to corrupt: floor(N * ratio).

    The tiny epsilon keeps products like 0.7 * 10 from landing just below
    their exact value and flooring one short.
    """
    if not 0 <= mask_ratio <= 1:
        raise ValueError(f"mask_ratio {mask_ratio} outside [0, 1]")
    return int(math.floor(num_patches * mask_ratio + 1e-9))


@dataclass
class MaskPlan:
    """A sampled corruption pattern for one batch."""

    mask: torch.Tensor  # (B, N) bool, True where the patch is corrupted
    num_masked: int  # per-image count, identical across the batch
    ratio: float


def sample_masks(
    batch_size: int,
    num_patches: int,
    mask_ratio: float,
    generator: torch.Generator | None = None,
) -> MaskPlan:
    """Sample per-image masks, uniform over patch subsets of the exact size."""
    count = mask_count(num_patches, mask_ratio)
    noise = torch.rand(batch_size, num_patches, generator=generator)
    order = torch.argsort(noise, dim=1)
    mask = torch.zeros(batch_size, num_patches, dtype=torch.bool)
    if count:
        mask.scatter_(1, order[:, :count], True)
    return MaskPlan(mask=mask, num_masked=count, ratio=mask_ratio)


class DecoderBlock(nn.Module):
    """One interaction layer; wiring depends on the variant.

    cross: queries are patch states, keys/values are caption states.
    fuse: adds a patch self-attention branch to the cross branch.
    concat: self-attention over the concatenated patch+caption sequence,
        caption positions held fixed.
    """

    def __init__(self, cfg: DecoderConfig):
        super().__init__()
        self.variant = cfg.variant
        self.norm_q = nn.LayerNorm(cfg.hidden_dim)
        self.norm_kv = None if cfg.ln_queries_only else nn.LayerNorm(cfg.hidden_dim)
        self.attn = MultiHeadAttention(cfg.hidden_dim, cfg.num_heads)
        if cfg.variant == "fuse":
            self.self_attn = MultiHeadAttention(cfg.hidden_dim, cfg.num_heads)
        self.norm2 = nn.LayerNorm(cfg.hidden_dim)
        self.mlp = Mlp(cfg.hidden_dim)

    def attention_stage(
        self,
        x: torch.Tensor,
        text: torch.Tensor,
        text_mask: torch.Tensor | None,
    ) -> torch.Tensor:
        """The attention branch alone, before the residual is applied."""
        q = self.norm_q(x)
        kv = text if self.norm_kv is None else self.norm_kv(text)
        if self.variant == "cross":
            return self.attn(q, kv, kv, key_mask=text_mask)
        if self.variant == "fuse":
            return self.self_attn(q, q, q) + self.attn(q, kv, kv, key_mask=text_mask)
        n = x.shape[1]  # concat
        seq = torch.cat([q, kv], dim=1)
        if text_mask is None:
            joint_mask = None
        else:
            ones = torch.ones(x.shape[0], n, dtype=torch.bool, device=x.device)
            joint_mask = torch.cat([ones, text_mask], dim=1)
        return self.attn(seq, seq, seq, key_mask=joint_mask)[:, :n]

    def forward(
        self,
        x: torch.Tensor,
        text: torch.Tensor,
        text_mask: torch.Tensor | None,
    ) -> torch.Tensor:
        x = x + self.attention_stage(x, text, text_mask)
        x = x + self.mlp(self.norm2(x))
        return x


class CrossModalDecoder(nn.Module):
    """Shallow decoder that restores masked patches under caption guidance.

    Consumes the image encoder's patch states (CLS excluded) and the text
    encoder's token states, and emits per-patch pixel predictions of size
    P*P*3 through a single linear head.
    """

    def __init__(self, enc_cfg: EncoderConfig, dec_cfg: DecoderConfig):
        super().__init__()
        self.enc_cfg = enc_cfg
        self.cfg = dec_cfg
        d = dec_cfg.hidden_dim
        self.image_embed = nn.Linear(enc_cfg.embed_dim, d)
        self.text_embed = nn.Linear(enc_cfg.embed_dim, d)
        self.pos_embed = nn.Parameter(torch.zeros(1, enc_cfg.num_patches, d))
        self.blocks = nn.ModuleList(DecoderBlock(dec_cfg) for _ in range(dec_cfg.depth))
        self.norm = nn.LayerNorm(d)
        self.pixel_head = nn.Linear(d, enc_cfg.patch_values)
        nn.init.normal_(self.pos_embed, std=0.02)
        for lin in (self.image_embed, self.text_embed, self.pixel_head):
            nn.init.zeros_(lin.bias)

    def forward(
        self,
        patch_states: torch.Tensor,
        text_states: torch.Tensor,
        text_mask: torch.Tensor | None = None,
    ) -> torch.Tensor:
        """(B, N, d_enc) patch states + (B, L, d_enc) text -> (B, N, P*P*3)."""
        x = self.image_embed(patch_states) + self.pos_embed
        t = self.text_embed(text_states)
        for blk in self.blocks:
            x = blk(x, t, text_mask)
        return self.pixel_head(self.norm(x))


def tir_loss(
    predicted: torch.Tensor,
    target: torch.Tensor,
    mask: torch.Tensor,
) -> torch.Tensor:
    """Restoration loss: mean over masked patches of per-patch summed SE.

    Args:
        predicted: (B, N, V) pixel predictions.
        target: (B, N, V) ground-truth patch pixels. The target is always
            taken from the original color image, even when the corrupted
            input was grayscaled.
        mask: (B, N) bool, True on corrupted patches.

    Each masked patch contributes the sum of squared errors over its V
    values; the total is divided by the number of masked patches. Unmasked
    patches are excluded exactly, not down-weighted. With an empty mask the
    loss is 0.
    """
    if predicted.shape != target.shape:
        raise ValueError(f"shape mismatch {tuple(predicted.shape)} vs {tuple(target.shape)}")
    n_masked = int(mask.sum())
    if n_masked == 0:
        return predicted.sum() * 0.0
    per_patch = ((predicted - target) ** 2).sum(dim=-1)  # (B, N)
    return per_patch[mask].sum() / n_masked
