"""Training objectives: hard-pair margin loss, similarity distribution
matching, identity classification, and their unweighted sum.

All similarity-based losses share one convention: rows of the similarity
matrix are image anchors, columns are text anchors, and ``positive_mask``
marks same-identity pairs. Each loss is computed in both retrieval
directions and the directions are summed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F


def cosine_sim_matrix(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Pairwise cosine similarity, (B_a, d) x (B_b, d) -> (B_a, B_b).

    Scale-invariant per row; zero-norm rows are rejected rather than
    silently mapped anywhere.
    """
    norm_a = a.norm(dim=-1, keepdim=True)
    norm_b = b.norm(dim=-1, keepdim=True)
    if (norm_a == 0).any() or (norm_b == 0).any():
        raise ValueError("cosine similarity undefined for zero-norm feature rows")
    return (a / norm_a) @ (b / norm_b).T


def positive_mask(labels_a: torch.Tensor, labels_b: torch.Tensor | None = None) -> torch.Tensor:
    """Bool matrix, True where the identity labels agree."""
    if labels_b is None:
        labels_b = labels_a
    return labels_a.view(-1, 1) == labels_b.view(1, -1)


def match_probability(sim: torch.Tensor, temperature: float = 0.02) -> torch.Tensor:
    """Row-wise matching distribution: softmax of sim / temperature."""
    if temperature <= 0:
        raise ValueError("temperature must be > 0")
    return F.softmax(sim / temperature, dim=-1)


@dataclass
class MinedPairs:
    """Per-anchor extremes mined from one direction of a similarity matrix.

    Ties resolve to the lowest column index (torch min/max convention).
    Anchors missing a positive or a negative carry sentinel similarities
    (+inf / -inf) and are flagged invalid; they must not reach the loss.
    """

    weakest_positive: torch.Tensor  # (B,) similarity values
    hardest_negative: torch.Tensor  # (B,)
    weakest_positive_index: torch.Tensor  # (B,) int64
    hardest_negative_index: torch.Tensor  # (B,) int64
    valid: torch.Tensor  # (B,) bool, anchor has both a positive and a negative


def mine_hard_pairs(sim: torch.Tensor, positives: torch.Tensor) -> MinedPairs:
    """Mine the weakest positive and hardest negative per row anchor.

    The weakest positive is the minimum similarity among same-identity
    columns (the anchor's own pair included); the hardest negative is the
    maximum among different-identity columns. Transpose both arguments to
    mine the other direction.
    """
    if sim.shape != positives.shape:
        raise ValueError("sim and positives must have identical shapes")
    # inf sentinels keep mining exact for any real-valued similarity matrix
    pos_vals, pos_idx = sim.masked_fill(~positives, float("inf")).min(dim=1)
    neg_vals, neg_idx = sim.masked_fill(positives, float("-inf")).max(dim=1)
    has_pos = positives.any(dim=1)
    has_neg = (~positives).any(dim=1)
    return MinedPairs(
        weakest_positive=pos_vals,
        hardest_negative=neg_vals,
        weakest_positive_index=pos_idx,
        hardest_negative_index=neg_idx,
        valid=has_pos & has_neg,
    )


def cmt_hinge(pos_sim: torch.Tensor, neg_sim: torch.Tensor, margin: float) -> torch.Tensor:
    """Margin term [neg - pos + margin]_+ for mined pairs."""
    return F.relu(neg_sim - pos_sim + margin)


def cmt_loss(sim: torch.Tensor, positives: torch.Tensor, margin: float = 0.2) -> torch.Tensor:
    """Cross-modal hard-pair margin loss, both directions.

    Per direction, each anchor contributes [hardest_neg - weakest_pos +
    margin]_+ and the batch is averaged; the two directions are summed.
    Anchors without a usable pair contribute exactly zero (a batch drawn
    from a single identity has no negatives) and trigger a warning.
    """
    total = sim.new_zeros(())
    skipped = 0
    for s, p in ((sim, positives), (sim.T, positives.T)):
        mined = mine_hard_pairs(s, p)
        term = cmt_hinge(mined.weakest_positive, mined.hardest_negative, margin)
        term = torch.where(mined.valid, term, torch.zeros_like(term))
        skipped += int((~mined.valid).sum())
        total = total + term.mean()
    if skipped:
        warnings.warn(
            f"cmt_loss: {skipped} anchors lacked a positive or negative and were skipped",
            RuntimeWarning,
            stacklevel=2,
        )
    return total


def sdm_loss(
    sim: torch.Tensor,
    positives: torch.Tensor,
    temperature: float = 0.02,
    epsilon: float = 1e-8,
) -> torch.Tensor:
    """Similarity distribution matching, both directions.

    Per direction the matching distribution p (softmax of sim/temperature)
    is pulled toward the normalized ground-truth distribution q via
    KL(p || q + epsilon), averaged over anchors. epsilon keeps the zero
    cells of q finite; with epsilon = 0 any probability mass on a negative
    pair makes the loss infinite.
    """
    total = sim.new_zeros(())
    for s, pos in ((sim, positives), (sim.T, positives.T)):
        q = pos.to(s.dtype)
        q = q / q.sum(dim=1, keepdim=True)
        log_p = F.log_softmax(s / temperature, dim=-1)
        p = log_p.exp()
        kl = (p * (log_p - torch.log(q + epsilon))).sum(dim=1)
        total = total + kl.mean()
    return total


class IdClassifier(nn.Module):
    """Bias-free linear head over identity classes, shared by both modalities."""

    def __init__(self, embed_dim: int, num_classes: int):
        super().__init__()
        if num_classes < 2:
            raise ValueError("need at least two identity classes")
        self.proj = nn.Linear(embed_dim, num_classes, bias=False)
        nn.init.normal_(self.proj.weight, std=0.001)

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        return self.proj(features)


def id_loss(
    image_logits: torch.Tensor,
    text_logits: torch.Tensor,
    labels: torch.Tensor,
) -> torch.Tensor:
    """Identity cross-entropy averaged over the two modalities.

    Uniform logits over C classes score ln C per modality, so an untrained
    head starts at exactly ln C.
    """
    return 0.5 * (F.cross_entropy(image_logits, labels) + F.cross_entropy(text_logits, labels))


@dataclass
class LossTerms:
    """Individual objectives for one step; disabled ones stay None."""

    tir: torch.Tensor | None = None
    cmt: torch.Tensor | None = None
    sdm: torch.Tensor | None = None
    id: torch.Tensor | None = None

    @property
    def total(self) -> torch.Tensor:
        terms = [t for t in (self.tir, self.cmt, self.sdm, self.id) if t is not None]
        if not terms:
            raise ValueError("no loss components enabled")
        out = terms[0]
        for t in terms[1:]:
            out = out + t
        return out

    def to_log_dict(self) -> dict[str, float]:
        d = {}
        for key, val in (("l_tir", self.tir), ("l_cmt", self.cmt), ("l_sdm", self.sdm), ("l_id", self.id)):
            if val is not None:
                d[key] = float(val.detach())
        d["total"] = float(self.total.detach())
        return d


def total_loss(
    tir: torch.Tensor | None = None,
    cmt: torch.Tensor | None = None,
    sdm: torch.Tensor | None = None,
    id: torch.Tensor | None = None,
) -> torch.Tensor:
    """Unweighted sum of whichever objectives are present."""
    return LossTerms(tir=tir, cmt=cmt, sdm=sdm, id=id).total
