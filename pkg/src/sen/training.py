"""End-to-end training: augment, encode clean and corrupted views, restore,
apply the four objectives, and log every step as a JSON line.

The optimizer is Adam with two parameter groups (encoder backbone at the
base rate, freshly initialized task modules at a higher rate) under a
linear-warmup-then-cosine schedule. A NaN total loss aborts the run after
snapshotting the offending batch for inspection.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .augmentation import pos_prune, standard_augs, to_grayscale
from .checkpoint import save_checkpoint
from .config import ExperimentConfig
from .data import SplitDataset, batch_stream, load_annotations
from .losses import LossTerms, cmt_loss, cosine_sim_matrix, id_loss, positive_mask, sdm_loss
from .model import SenModel
from .retrieval import Gallery, evaluate_rankings, rank_all
from .tir import tir_loss
from .tokenizer import SimpleTokenizer, words_of

logger = logging.getLogger(__name__)


def lr_scale(epoch: float, optim_cfg, base_lr: float) -> float:
    """Multiplier on a group's base rate at a fractional epoch.

    Linear warmup from warmup_start_lr to the base rate, then cosine decay
    to zero at the final epoch.
    """
    warm = optim_cfg.warmup_epochs
    if warm > 0 and epoch < warm:
        start = optim_cfg.warmup_start_lr / base_lr
        return start + (1.0 - start) * (epoch / warm)
    span = max(optim_cfg.epochs - warm, 1e-9)
    progress = min((epoch - warm) / span, 1.0)
    return 0.5 * (1.0 + math.cos(math.pi * progress))


@dataclass
class TrainResult:
    checkpoint_path: Path
    log_path: Path
    steps: int
    final_metrics: dict[str, float]
    eval_split: str
    history: list[dict] = field(default_factory=list)


class Trainer:
    """Owns one training run over an annotation directory."""

    def __init__(self, cfg: ExperimentConfig, data_dir, out_dir):
        self.cfg = cfg
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)

        if cfg.deterministic:
            torch.set_num_threads(1)
        torch.manual_seed(cfg.seed)
        self.rng = np.random.default_rng(cfg.seed)
        self.mask_generator = torch.Generator().manual_seed(cfg.seed + 1)

        records = load_annotations(data_dir)
        self.train_set = SplitDataset(records, "train")
        self.eval_split = "val"
        try:
            self.eval_set = SplitDataset(records, "val")
        except ValueError:
            warnings.warn("no val split; final evaluation runs on train", RuntimeWarning)
            self.eval_set = self.train_set
            self.eval_split = "train"

        captions = self.train_set.all_captions()
        self.tokenizer = SimpleTokenizer.from_corpus(captions, max_vocab=cfg.encoder.vocab_size)
        distinct = {w for cap in captions for w in words_of(cap)}
        if len(distinct - set(self.tokenizer.vocab)) > 0:
            warnings.warn(
                f"caption corpus has {len(distinct)} distinct words; vocab_size "
                f"{cfg.encoder.vocab_size} truncates the tail to the unknown token",
                RuntimeWarning,
            )
        self.model = SenModel(cfg, num_classes=self.train_set.num_identities)
        self.optimizer = torch.optim.Adam(
            [
                {"params": list(self.model.backbone_parameters()), "base_lr": cfg.optim.lr},
                {"params": list(self.model.task_parameters()), "base_lr": cfg.optim.decoder_lr},
            ],
            lr=cfg.optim.lr,
            weight_decay=cfg.optim.weight_decay,
        )
        self.steps_per_epoch = max(len(self.train_set) // cfg.batch_size, 1)
        self.log_path = self.out_dir / "train_log.jsonl"
        self.checkpoint_path = self.out_dir / "checkpoint.npz"

    def _prepare_batch(self, indices: np.ndarray):
        cfg = self.cfg
        images = []
        captions = []
        for i in indices:
            img = standard_augs(self.train_set.image(int(i)), cfg.aug, self.rng)
            images.append(img)
            cap = self.train_set.caption(int(i), rng=self.rng)
            captions.append(pos_prune(cap, cfg.aug, self.rng))
        batch_images = torch.stack(images)
        token_ids, pad_mask, eos_index = self.tokenizer.pad_batch(captions, cfg.encoder.max_text_len)
        labels = torch.from_numpy(self.train_set.labels[indices])
        return batch_images, token_ids, pad_mask, eos_index, labels

    def _step_losses(self, batch_images, token_ids, pad_mask, eos_index, labels) -> LossTerms:
        cfg = self.cfg
        text = self.model.encode_texts(token_ids, pad_mask, eos_index)
        image = self.model.encode_images(batch_images)

        terms = LossTerms()
        if cfg.tir_enabled:
            plan = self.model.sample_mask_plan(len(batch_images), self.mask_generator)
            tir_input = to_grayscale(batch_images) if cfg.aug.grayscale_for_tir else batch_images
            predicted = self.model.restore(tir_input, plan, text.states, pad_mask)
            target = self.model.restoration_target(batch_images)
            terms.tir = tir_loss(predicted, target, plan.mask)

        sim = cosine_sim_matrix(image.global_feature, text.global_feature)
        positives = positive_mask(labels)
        if cfg.cmt_enabled:
            terms.cmt = cmt_loss(sim, positives, margin=cfg.loss.margin)
        terms.sdm = sdm_loss(sim, positives, temperature=cfg.loss.temperature, epsilon=cfg.loss.epsilon)
        terms.id = id_loss(
            self.model.id_head(image.global_feature),
            self.model.id_head(text.global_feature),
            labels,
        )
        return terms

    def _snapshot_bad_batch(self, step, batch_images, token_ids, labels, terms: LossTerms) -> Path:
        path = self.out_dir / f"nan_batch_step{step}.npz"
        np.savez(
            path,
            images=batch_images.detach().numpy(),
            token_ids=token_ids.numpy(),
            labels=labels.numpy(),
            losses=np.array(json.dumps({k: str(v) for k, v in terms.to_log_dict().items()})),
        )
        return path

    def run(self, max_steps: int | None = None) -> TrainResult:
        cfg = self.cfg
        total_steps = max_steps if max_steps is not None else cfg.max_steps
        if total_steps is None:
            total_steps = cfg.optim.epochs * self.steps_per_epoch
        stream = batch_stream(
            self.train_set.labels, cfg.batch_size, cfg.instances_per_identity, self.rng
        )
        history = []
        self.model.train()
        with open(self.log_path, "w", encoding="utf-8") as log_file:
            for step in range(1, total_steps + 1):
                batch = self._prepare_batch(next(stream))
                batch_images, token_ids, pad_mask, eos_index, labels = batch

                epoch = step / self.steps_per_epoch
                for group in self.optimizer.param_groups:
                    group["lr"] = group["base_lr"] * lr_scale(epoch, cfg.optim, group["base_lr"])

                terms = self._step_losses(*batch)
                total = terms.total
                if not torch.isfinite(total):
                    path = self._snapshot_bad_batch(step, batch_images, token_ids, labels, terms)
                    raise RuntimeError(
                        f"non-finite loss at step {step}; offending batch saved to {path}"
                    )
                self.optimizer.zero_grad()
                total.backward()
                self.optimizer.step()

                entry = {"step": step, **terms.to_log_dict()}
                log_file.write(json.dumps(entry) + "\n")
                history.append(entry)
                if cfg.checkpoint_every and step % cfg.checkpoint_every == 0:
                    save_checkpoint(
                        self.out_dir / f"checkpoint_step{step}.npz",
                        self.model, cfg, self.tokenizer, meta={"step": step},
                    )

        save_checkpoint(
            self.checkpoint_path, self.model, cfg, self.tokenizer, meta={"step": total_steps}
        )
        metrics = evaluate_model(self.model, self.tokenizer, self.eval_set)
        logger.info("final %s metrics: %s", self.eval_split, metrics)
        return TrainResult(
            checkpoint_path=self.checkpoint_path,
            log_path=self.log_path,
            steps=total_steps,
            final_metrics=metrics,
            eval_split=self.eval_split,
            history=history,
        )


def build_gallery(model: SenModel, dataset: SplitDataset, batch_size: int = 32) -> Gallery:
    """Encode every image of a split once into a retrieval gallery."""
    model.eval()
    feats = []
    with torch.no_grad():
        for start in range(0, len(dataset), batch_size):
            imgs = torch.stack([dataset.image(i) for i in range(start, min(start + batch_size, len(dataset)))])
            feats.append(model.encode_images(imgs).global_feature)
    features = torch.cat(feats).double().numpy()
    return Gallery(ids=np.arange(len(dataset)), labels=dataset.labels.copy(), features=features)


def encode_queries(model: SenModel, tokenizer: SimpleTokenizer, captions: list[str]) -> np.ndarray:
    model.eval()
    token_ids, pad_mask, eos_index = tokenizer.pad_batch(captions, model.cfg.encoder.max_text_len)
    with torch.no_grad():
        out = model.encode_texts(token_ids, pad_mask, eos_index)
    return out.global_feature.double().numpy()


def evaluate_model(
    model: SenModel,
    tokenizer: SimpleTokenizer,
    dataset: SplitDataset,
    ks: tuple[int, ...] = (1, 5, 10),
) -> dict[str, float]:
    """Caption-to-image retrieval metrics over one split.

    Every caption of every record acts as a query; the gallery is every
    image of the split.
    """
    gallery = build_gallery(model, dataset)
    captions = []
    query_labels = []
    for idx, record in enumerate(dataset.records):
        for cap in record.captions:
            captions.append(cap)
            query_labels.append(dataset.labels[idx])
    features = encode_queries(model, tokenizer, captions)
    results = rank_all(features, np.array(query_labels), gallery)
    return evaluate_rankings(results, ks=ks)
