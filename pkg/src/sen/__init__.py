"""Dual-encoder text-to-image person retrieval with a text-guided
restoration auxiliary task.

Public surface: configs, the model and its building blocks, the four
training objectives, augmentation, retrieval metrics with caching, dataset
tools, and the training loop behind the ``sen`` command line.
"""

from .attention import MultiHeadAttention, TransformerBlock, mca
from .augmentation import (
    PosTag,
    RuleBasedTagger,
    augment_batch,
    keyword_skeleton,
    load_word_list,
    pos_prune,
    standard_augs,
    to_grayscale,
)
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import (
    AugConfig,
    DecoderConfig,
    EncoderConfig,
    ExperimentConfig,
    LossConfig,
    OptimConfig,
    clip_b16_config,
    toy_experiment_config,
)
from .data import (
    AnnotationRecord,
    SplitDataset,
    SyntheticSpec,
    batch_stream,
    generate_synthetic,
    load_annotations,
    load_image,
)
from .encoders import EncodedSequence, ImageEncoder, TextEncoder, patchify, unpatchify
from .losses import (
    IdClassifier,
    LossTerms,
    MinedPairs,
    cmt_loss,
    cosine_sim_matrix,
    id_loss,
    match_probability,
    mine_hard_pairs,
    positive_mask,
    sdm_loss,
    total_loss,
)
from .model import SenModel
from .retrieval import (
    Gallery,
    RankingResult,
    evaluate_rankings,
    load_gallery_cache,
    mean_average_precision,
    mean_inverse_negative_penalty,
    rank_all,
    rank_gallery,
    rank_k,
    save_gallery_cache,
)
from .tir import CrossModalDecoder, MaskPlan, mask_count, sample_masks, tir_loss
from .tokenizer import SimpleTokenizer
from .training import Trainer, TrainResult, build_gallery, encode_queries, evaluate_model

__version__ = "0.1.0"

__all__ = [
    "AnnotationRecord", "AugConfig", "Checkpoint", "CrossModalDecoder",
    "DecoderConfig", "EncodedSequence", "EncoderConfig", "ExperimentConfig",
    "Gallery", "IdClassifier", "ImageEncoder", "LossConfig", "LossTerms",
    "MaskPlan", "MinedPairs", "MultiHeadAttention", "OptimConfig", "PosTag",
    "RankingResult", "RuleBasedTagger", "SenModel", "SimpleTokenizer",
    "SplitDataset", "SyntheticSpec", "TextEncoder", "TrainResult", "Trainer",
    "TransformerBlock", "augment_batch", "batch_stream", "build_gallery",
    "clip_b16_config",
    "cmt_loss", "cosine_sim_matrix", "encode_queries", "evaluate_model",
    "evaluate_rankings", "generate_synthetic", "id_loss", "keyword_skeleton",
    "load_annotations", "load_checkpoint", "load_gallery_cache", "load_image",
    "load_word_list", "mask_count", "match_probability", "mca",
    "mean_average_precision", "mean_inverse_negative_penalty",
    "mine_hard_pairs", "patchify", "pos_prune", "positive_mask", "rank_all",
    "rank_gallery", "rank_k", "sample_masks", "save_checkpoint",
    "save_gallery_cache", "sdm_loss", "standard_augs", "tir_loss",
    "to_grayscale", "total_loss", "toy_experiment_config", "unpatchify",
]
