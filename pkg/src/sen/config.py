"""Configuration dataclasses for models, losses, augmentation and experiments.

All configs serialize to/from plain dicts and JSON. ``ExperimentConfig``
round-trips losslessly (serialize -> deserialize -> serialize is
byte-identical), which lets checkpoints embed the full experiment setup.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field


DECODER_VARIANTS = ("cross", "fuse", "concat")


@dataclass
class EncoderConfig:
    """Shape of the dual encoders.

    The toy defaults run every test in seconds on CPU; ``clip_b16_config``
    builds the full-scale shape (384x128 images, 12+12 layers, d=512).
    """

    image_height: int = 64
    image_width: int = 32
    patch_size: int = 16
    embed_dim: int = 64
    image_layers: int = 2
    text_layers: int = 2
    num_heads: int = 4
    max_text_len: int = 32
    vocab_size: int = 512
    # CLIP-schema weights use causal text attention; toy configs default to
    # bidirectional. Both are selectable.
    text_causal: bool = False

    def __post_init__(self):
        if self.image_height % self.patch_size != 0 or self.image_width % self.patch_size != 0:
            raise ValueError(
                f"image dims ({self.image_height}x{self.image_width}) must be "
                f"divisible by patch_size={self.patch_size}"
            )
        if self.embed_dim % self.num_heads != 0:
            raise ValueError(f"embed_dim={self.embed_dim} not divisible by num_heads={self.num_heads}")
        if self.max_text_len < 2:
            raise ValueError("max_text_len must fit at least SOS and EOS")

    @property
    def num_patches(self) -> int:
        return (self.image_height * self.image_width) // (self.patch_size ** 2)

    @property
    def patch_values(self) -> int:
        """Flattened values per patch (P*P*3)."""
        return self.patch_size * self.patch_size * 3


@dataclass
class DecoderConfig:
    """Cross-modal interaction decoder shape.

    ``variant`` selects the attention wiring: "cross" uses text as the sole
    key/value source, "fuse" sums a visual self-attention and a textual
    cross-attention, "concat" self-attends over the concatenated sequence.
    """

    depth: int = 4
    hidden_dim: int = 512
    num_heads: int = 8
    variant: str = "cross"
    # Pre-norm is applied to Q, K and V by default; set to normalize Q only.
    ln_queries_only: bool = False

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("decoder depth must be >= 1")
        if self.hidden_dim % self.num_heads != 0:
            raise ValueError(f"hidden_dim={self.hidden_dim} not divisible by num_heads={self.num_heads}")
        if self.variant not in DECODER_VARIANTS:
            raise ValueError(f"unknown decoder variant {self.variant!r}; expected one of {DECODER_VARIANTS}")


@dataclass
class LossConfig:
    temperature: float = 0.02
    margin: float = 0.2
    # Smoothing added to the normalized target distribution inside the
    # similarity-distribution-matching loss.
    epsilon: float = 1e-8
    id_class_count: int = 0

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")
        if self.margin < 0:
            raise ValueError("margin must be >= 0")
        if not 0 <= self.epsilon < 1:
            raise ValueError("epsilon must be in [0, 1)")


@dataclass
class AugConfig:
    text_prune_prob: float = 0.2
    grayscale_for_tir: bool = True
    flip_prob: float = 0.5
    crop_padding: int = 0
    erase_prob: float = 0.0
    # Per-caption gating by default; per-word mode drops each non-keyword
    # independently instead.
    prune_per_word: bool = False

    def __post_init__(self):
        for name in ("text_prune_prob", "flip_prob", "erase_prob"):
            p = getattr(self, name)
            if not 0 <= p <= 1:
                raise ValueError(f"{name}={p} outside [0, 1]")
        if self.crop_padding < 0:
            raise ValueError("crop_padding must be >= 0")


@dataclass
class OptimConfig:
    lr: float = 1e-5
    # Randomly initialized modules (decoder, heads) train at a higher rate.
    decoder_lr: float = 5e-5
    warmup_epochs: int = 5
    warmup_start_lr: float = 1e-6
    epochs: int = 60
    weight_decay: float = 0.0

    def __post_init__(self):
        if self.lr <= 0 or self.decoder_lr <= 0:
            raise ValueError("learning rates must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.warmup_epochs < 0 or self.warmup_epochs >= self.epochs:
            raise ValueError("warmup_epochs must be in [0, epochs)")


@dataclass
class ExperimentConfig:
    """Everything a training run needs; embedded verbatim in checkpoints."""

    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    aug: AugConfig = field(default_factory=AugConfig)
    optim: OptimConfig = field(default_factory=OptimConfig)
    # Component switches (tir/cmt). ``irr_enabled`` is a reserved placeholder
    # kept so component sweeps can enumerate the full historical grid; it has
    # no training effect.
    tir_enabled: bool = True
    cmt_enabled: bool = True
    irr_enabled: bool = False
    mask_ratio: float = 0.7
    batch_size: int = 8
    instances_per_identity: int = 2
    max_steps: int | None = None
    checkpoint_every: int = 0
    seed: int = 0
    # Single-threaded deterministic execution; the default for tests.
    deterministic: bool = True

    def __post_init__(self):
        if not 0 <= self.mask_ratio <= 1:
            raise ValueError("mask_ratio must be in [0, 1]")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        if self.instances_per_identity < 1:
            raise ValueError("instances_per_identity must be >= 1")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        kwargs = {}
        for name, sub_cls in (
            ("encoder", EncoderConfig),
            ("decoder", DecoderConfig),
            ("loss", LossConfig),
            ("aug", AugConfig),
            ("optim", OptimConfig),
        ):
            if name in d:
                sub = d.pop(name)
                sub_known = {f.name for f in dataclasses.fields(sub_cls)}
                sub_unknown = set(sub) - sub_known
                if sub_unknown:
                    raise ValueError(f"unknown {name} config keys: {sorted(sub_unknown)}")
                kwargs[name] = sub_cls(**sub)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs.update(d)
        return cls(**kwargs)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_json(f.read())

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.to_json())


def clip_b16_config() -> ExperimentConfig:
    """Full-scale configuration shape (not exercised by the test suite)."""
    return ExperimentConfig(
        encoder=EncoderConfig(
            image_height=384,
            image_width=128,
            patch_size=16,
            embed_dim=512,
            image_layers=12,
            text_layers=12,
            num_heads=8,
            max_text_len=77,
            vocab_size=49408,
            text_causal=True,
        ),
        decoder=DecoderConfig(depth=4, hidden_dim=512, num_heads=8),
        batch_size=64,
    )


def toy_experiment_config(seed: int = 0) -> ExperimentConfig:
    """Desk-scale preset tuned to memorize a small synthetic set quickly.

    Full-scale schedule defaults (60 epochs, lr 1e-5, long warmup) assume a
    pretrained backbone; from random init at d=64 the toy preset needs much
    larger rates, no warmup, and wide identity coverage per batch.
    """
    return ExperimentConfig(
        encoder=EncoderConfig(),
        decoder=DecoderConfig(depth=2, hidden_dim=64, num_heads=4),
        aug=AugConfig(flip_prob=0.5, crop_padding=0, erase_prob=0.0),
        optim=OptimConfig(
            lr=2e-4, decoder_lr=2e-3, warmup_epochs=0, warmup_start_lr=1e-4, epochs=100
        ),
        batch_size=32,
        seed=seed,
    )
