"""Dataset ingestion and synthesis.

The annotation format is a JSON array of ``{"id": int, "file_path": str,
"captions": [str], "split": str}`` objects, the de-facto community shape
for caption-based person search sets, so real data drops in unchanged.

A synthetic generator renders desk-scale "person" images (colored torso /
leg / shoe rectangles on a noise background) with templated captions whose
color words match the rendered regions exactly. That gives tests a dataset
where the caption fully determines the ranking signal.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from PIL import Image

logger = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")

ANNOTATIONS_NAME = "annotations.json"
MANIFEST_NAME = "manifest.json"

# Render palette; names double as caption adjectives.
COLOR_RGB: dict[str, tuple[int, int, int]] = {
    "red": (220, 30, 30),
    "blue": (30, 60, 200),
    "green": (30, 160, 60),
    "yellow": (230, 220, 40),
    "white": (240, 240, 240),
    "black": (15, 15, 15),
    "purple": (140, 40, 160),
    "orange": (240, 140, 30),
}

GARMENT_SLOTS = ("shirt", "pants", "shoes")

CAPTION_TEMPLATES = (
    "a person wearing a {shirt} shirt, {pants} pants and {shoes} shoes",
    "a man dressed in a {shirt} shirt with {pants} pants and {shoes} shoes",
)


@dataclass
class AnnotationRecord:
    """One image with its captions, after identity remapping."""

    identity_id: int  # contiguous within the split
    image_path: Path  # resolved absolute path
    captions: list[str]
    split: str
    source_id: int  # identity id as written in the file


@dataclass
class SyntheticSpec:
    """Recipe for a generated dataset; fully determined by the seed."""

    num_identities: int = 16
    images_per_identity: int = 4
    colors: list[str] = field(default_factory=lambda: list(COLOR_RGB))
    image_height: int = 64
    image_width: int = 32
    # Identities assigned to held-out splits, taken from the end of the
    # identity range; the rest train.
    val_identities: int = 0
    test_identities: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.num_identities < 1 or self.images_per_identity < 1:
            raise ValueError("need at least one identity and one image each")
        if not self.colors:
            raise ValueError("color vocabulary must be non-empty")
        unknown = [c for c in self.colors if c not in COLOR_RGB]
        if unknown:
            raise ValueError(f"colors without render values: {unknown}")
        if self.val_identities + self.test_identities > self.num_identities:
            raise ValueError("held-out identities exceed the identity count")

    def to_dict(self) -> dict:
        d = self.__dict__.copy()
        d["colors"] = list(self.colors)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        return cls(**d)


def _parse_record(obj, index: int, base_dir: Path) -> tuple[int, Path, list[str], str]:
    if not isinstance(obj, dict):
        raise ValueError(f"record {index}: expected an object, got {type(obj).__name__}")
    for key in ("id", "file_path", "captions", "split"):
        if key not in obj:
            raise ValueError(f"record {index}: missing required field {key!r}")
    if not isinstance(obj["id"], int):
        raise ValueError(f"record {index}: 'id' must be an integer")
    caps = obj["captions"]
    if not isinstance(caps, list) or not caps or not all(isinstance(c, str) for c in caps):
        raise ValueError(f"record {index}: 'captions' must be a non-empty list of strings")
    if obj["split"] not in SPLITS:
        raise ValueError(f"record {index}: split {obj['split']!r} not in {SPLITS}")
    path = (base_dir / obj["file_path"]).resolve()
    return obj["id"], path, list(caps), obj["split"]


def load_annotations(path) -> list[AnnotationRecord]:
    """Load and validate an annotation file (or a directory containing one).

    Identity ids are remapped to contiguous [0, C) independently per split,
    in ascending source-id order. Every referenced image must exist.
    """
    path = Path(path)
    if path.is_dir():
        path = path / ANNOTATIONS_NAME
    with open(path, "r", encoding="utf-8") as f:
        raw = json.load(f)
    if not isinstance(raw, list):
        raise ValueError(f"{path}: expected a JSON array of records")
    base_dir = path.parent
    parsed = [_parse_record(obj, i, base_dir) for i, obj in enumerate(raw)]
    for i, (_, img_path, _, _) in enumerate(parsed):
        if not img_path.is_file():
            raise FileNotFoundError(f"record {i}: image file not found: {img_path}")

    remap: dict[str, dict[int, int]] = {}
    for split in SPLITS:
        ids = sorted({sid for sid, _, _, s in parsed if s == split})
        remap[split] = {sid: new for new, sid in enumerate(ids)}

    records = [
        AnnotationRecord(
            identity_id=remap[split][sid],
            image_path=img_path,
            captions=caps,
            split=split,
            source_id=sid,
        )
        for sid, img_path, caps, split in parsed
    ]
    sizes = {split: sum(1 for r in records if r.split == split) for split in SPLITS}
    logger.info(
        "loaded %d records (%s)",
        len(records),
        ", ".join(f"{s}: {n} images / {len(remap[s])} ids" for s, n in sizes.items()),
    )
    return records


def _render_person(
    rng: np.random.Generator,
    spec: SyntheticSpec,
    shirt: str,
    pants: str,
    shoes: str,
) -> np.ndarray:
    """One (H, W, 3) uint8 frame: noise background, solid garment bands."""
    h, w = spec.image_height, spec.image_width
    img = rng.integers(60, 196, size=(h, w, 3), dtype=np.int64).astype(np.uint8)
    # Horizontal pose jitter keeps the bands away from a fixed column range
    # without ever moving the torso out of the central crop tests use.
    dx = int(rng.integers(-2, 3))
    left = max(0, w // 4 + dx)
    right = min(w, left + w // 2)
    bands = (
        (int(0.25 * h), int(0.55 * h), COLOR_RGB[shirt]),
        (int(0.55 * h), int(0.85 * h), COLOR_RGB[pants]),
        (int(0.85 * h), h, COLOR_RGB[shoes]),
    )
    for top, bottom, rgb in bands:
        img[top:bottom, left:right] = rgb
    return img


def garment_band(spec: SyntheticSpec, slot: str) -> tuple[int, int, int, int]:
    """Central (top, bottom, left, right) region guaranteed inside a garment
    band regardless of pose jitter; used by pixel-statistics checks."""
    h, w = spec.image_height, spec.image_width
    rows = {
        "shirt": (int(0.25 * h), int(0.55 * h)),
        "pants": (int(0.55 * h), int(0.85 * h)),
        "shoes": (int(0.85 * h), h),
    }[slot]
    left = w // 4 + 2
    right = w // 4 + w // 2 - 2
    return rows[0], rows[1], left, right


def generate_synthetic(spec: SyntheticSpec, out_dir) -> Path:
    """Render a dataset to ``out_dir`` and return the annotation file path.

    Each identity gets a distinct (shirt, pants, shoes) color triple shared
    by all its images; pose and background vary per image. Captions are
    templated from the triple, two per image, so caption color words match
    the rendered regions by construction. Identical seeds produce
    byte-identical trees.
    """
    out_dir = Path(out_dir)
    image_dir = out_dir / "images"
    image_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)

    triples: list[tuple[str, str, str]] = []
    seen = set()
    max_combos = len(spec.colors) ** 3
    if spec.num_identities > max_combos:
        raise ValueError(
            f"{spec.num_identities} identities need distinct color triples "
            f"but only {max_combos} exist"
        )
    while len(triples) < spec.num_identities:
        t = tuple(spec.colors[int(i)] for i in rng.integers(0, len(spec.colors), size=3))
        if t not in seen:
            seen.add(t)
            triples.append(t)

    n_train = spec.num_identities - spec.val_identities - spec.test_identities
    records = []
    for ident in range(spec.num_identities):
        shirt, pants, shoes = triples[ident]
        if ident < n_train:
            split = "train"
        elif ident < n_train + spec.val_identities:
            split = "val"
        else:
            split = "test"
        for j in range(spec.images_per_identity):
            img = _render_person(rng, spec, shirt, pants, shoes)
            rel = f"images/{ident:04d}_{j:02d}.png"
            Image.fromarray(img).save(out_dir / rel)
            captions = [
                tpl.format(shirt=shirt, pants=pants, shoes=shoes) for tpl in CAPTION_TEMPLATES
            ]
            records.append({"id": ident, "file_path": rel, "captions": captions, "split": split})

    ann_path = out_dir / ANNOTATIONS_NAME
    with open(ann_path, "w", encoding="utf-8") as f:
        json.dump(records, f, indent=1)
    with open(out_dir / MANIFEST_NAME, "w", encoding="utf-8") as f:
        json.dump({"generator": "sen.data.generate_synthetic", "spec": spec.to_dict()}, f, indent=1)
    return ann_path


def load_image(path) -> torch.Tensor:
    """Read an RGB image file to a (3, H, W) float tensor in [0, 1]."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    return torch.from_numpy(arr).permute(2, 0, 1).contiguous()


class SplitDataset:
    """Records of one split with image loading and caption access."""

    def __init__(self, records: list[AnnotationRecord], split: str):
        self.split = split
        self.records = [r for r in records if r.split == split]
        if not self.records:
            raise ValueError(f"split {split!r} is empty")
        self.labels = np.array([r.identity_id for r in self.records], dtype=np.int64)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def num_identities(self) -> int:
        return len(np.unique(self.labels))

    def image(self, index: int) -> torch.Tensor:
        return load_image(self.records[index].image_path)

    def caption(self, index: int, rng=None) -> str:
        caps = self.records[index].captions
        if rng is None or len(caps) == 1:
            return caps[0]
        return caps[int(rng.integers(0, len(caps)))]

    def all_captions(self) -> list[str]:
        return [c for r in self.records for c in r.captions]


def batch_stream(labels: np.ndarray, batch_size: int, instances_per_identity: int, rng):
    """Endless identity-balanced batch index stream.

    Each batch draws P = batch_size / instances_per_identity distinct
    identities and K instances of each (with replacement when an identity
    has fewer than K images), so every sample has in-batch positives, and
    negatives whenever the dataset has >= 2 identities. Identity order
    reshuffles every pass; a fixed rng reproduces the exact sequence.
    """
    k = instances_per_identity
    if batch_size < 2:
        raise ValueError("batch_size must be >= 2")
    if batch_size % k != 0:
        raise ValueError(f"batch_size {batch_size} not divisible by instances_per_identity {k}")
    p = batch_size // k
    unique = np.unique(labels)
    if len(unique) < 2:
        warnings.warn(
            "dataset has a single identity; batches carry no negatives",
            RuntimeWarning,
            stacklevel=2,
        )
    if len(unique) < p:
        warnings.warn(
            f"only {len(unique)} identities available for {p} per batch; batches shrink",
            RuntimeWarning,
            stacklevel=2,
        )
        p = len(unique)
    by_identity = {int(u): np.flatnonzero(labels == u) for u in unique}
    while True:
        order = rng.permutation(unique)
        for start in range(0, len(order) - p + 1, p):
            chosen = order[start : start + p]
            batch = []
            for ident in chosen:
                pool = by_identity[int(ident)]
                take = rng.choice(pool, size=k, replace=len(pool) < k)
                batch.extend(int(i) for i in take)
            yield np.array(batch, dtype=np.int64)
