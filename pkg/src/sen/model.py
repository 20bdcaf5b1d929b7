"""The full dual-encoder model with its restoration decoder and identity head."""

from __future__ import annotations

import torch
import torch.nn as nn

from .config import ExperimentConfig
from .encoders import EncodedSequence, ImageEncoder, TextEncoder, patchify
from .losses import IdClassifier
from .tir import CrossModalDecoder, MaskPlan, sample_masks


class SenModel(nn.Module):
    """Image encoder + text encoder + (optional) restoration decoder + id head.

    The decoder and identity head are training-time modules; retrieval only
    needs the two encoders' global features.
    """

    def __init__(self, cfg: ExperimentConfig, num_classes: int | None = None):
        super().__init__()
        self.cfg = cfg
        self.image_encoder = ImageEncoder(cfg.encoder)
        self.text_encoder = TextEncoder(cfg.encoder)
        self.decoder = CrossModalDecoder(cfg.encoder, cfg.decoder) if cfg.tir_enabled else None
        self.id_head = IdClassifier(cfg.encoder.embed_dim, num_classes) if num_classes else None
        self.num_classes = num_classes

    def encode_images(self, images: torch.Tensor, mask: torch.Tensor | None = None) -> EncodedSequence:
        return self.image_encoder(images, mask=mask)

    def encode_texts(
        self, token_ids: torch.Tensor, pad_mask: torch.Tensor, eos_index: torch.Tensor
    ) -> EncodedSequence:
        return self.text_encoder(token_ids, pad_mask, eos_index)

    def sample_mask_plan(self, batch_size: int, generator: torch.Generator | None = None) -> MaskPlan:
        return sample_masks(batch_size, self.cfg.encoder.num_patches, self.cfg.mask_ratio, generator)

    def restore(
        self,
        corrupted_images: torch.Tensor,
        plan: MaskPlan,
        text_states: torch.Tensor,
        text_mask: torch.Tensor | None,
    ) -> torch.Tensor:
        """Encode the corrupted image and predict pixels for every patch.

        The caller scores predictions only at ``plan.mask`` positions
        against patches of the original color image.
        """
        if self.decoder is None:
            raise RuntimeError("restoration decoder is disabled in this configuration")
        encoded = self.image_encoder(corrupted_images, mask=plan.mask)
        patch_states = encoded.states[:, 1:]  # drop the CLS position
        return self.decoder(patch_states, text_states, text_mask)

    def restoration_target(self, color_images: torch.Tensor) -> torch.Tensor:
        """Ground-truth patch pixels, always from the color image."""
        return patchify(color_images, self.cfg.encoder.patch_size)

    # Separating pretrained-style backbone parameters from freshly
    # initialized task modules lets the optimizer run two learning rates.
    def backbone_parameters(self):
        yield from self.image_encoder.parameters()
        yield from self.text_encoder.parameters()

    def task_parameters(self):
        if self.decoder is not None:
            yield from self.decoder.parameters()
        if self.id_head is not None:
            yield from self.id_head.parameters()
