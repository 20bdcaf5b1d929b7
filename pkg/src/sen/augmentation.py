"""Attribute-focused augmentation.

Caption side: probability-gated pruning that reduces a sentence to its
descriptive skeleton (pronouns, adjectives, nouns, and verbs attached to
them) so training occasionally sees pure keyword strings.

Image side: grayscale conversion for the restoration branch (the clean
retrieval branch always sees color) plus the usual flip / pad-crop / erase
stack. Everything is deterministic given an rng handle.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .config import AugConfig


KEEP_TAGS = ("pronoun", "adjective", "noun")

# Closed-class words that never survive pruning: articles, copulas,
# auxiliaries, prepositions, conjunctions, determiners, degree adverbs.
STOPWORDS = frozenset("""
a an the is are was were be been being am has have had do does did done
will would can could shall should may might must and or but nor so yet
while as if than because of to from by for with without in on at over
under above below behind beside between into onto off up down around
through across near against this that these those some any each every no
both few several all most other another such what which there here very
quite also too not just only where when how its it's
""".split())

PRONOUNS = frozenset("""
he she it they him her them his hers their theirs himself herself
themselves who whom i we you me us my our your mine ours yours one
someone somebody anyone everybody
""".split())

# Open-class verbs common in person descriptions; -ing forms are caught by
# suffix, these cover the finite forms.
VERBS = frozenset("""
wears carries holds walks stands runs sits looks rides pushes pulls leans
dressed paired tucked
""".split())

COLORS = frozenset("""
red blue green yellow white black gray grey brown purple pink orange tan
beige navy maroon cream khaki golden silver violet teal turquoise
""".split())

ADJECTIVES = COLORS | frozenset("""
short long tall small large big little young old bright dark light plain
striped plaid checkered floral casual loose tight thin thick high low
baggy slim curly straight blond blonde sleeveless
""".split())

_ADJ_SUFFIXES = ("ish", "less", "ful", "ous")


def load_word_list(path) -> frozenset[str]:
    """Read a one-word-per-line list file; blank lines and # comments skipped."""
    words = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            w = line.strip().lower()
            if w and not w.startswith("#"):
                words.append(w)
    return frozenset(words)


@dataclass
class PosTag:
    word: str
    tag: str  # one of pronoun, adjective, noun, verb, other


class RuleBasedTagger:
    """Deterministic coarse POS tagger, no downloads, no external models.

    Classification order: closed-class stopword -> other; pronoun list;
    verb by lexicon or -ing suffix; adjective by lexicon or suffix; default
    noun. Words with no alphanumeric core (bare punctuation) tag as other.
    Every word gets exactly one tag.
    """

    def __init__(
        self,
        stopwords: frozenset[str] = STOPWORDS,
        pronouns: frozenset[str] = PRONOUNS,
        verbs: frozenset[str] = VERBS,
        adjectives: frozenset[str] = ADJECTIVES,
    ):
        self.stopwords = stopwords
        self.pronouns = pronouns
        self.verbs = verbs
        self.adjectives = adjectives

    def tag_word(self, word: str) -> str:
        core = "".join(ch for ch in word.lower() if ch.isalnum() or ch == "'")
        if not core:
            return "other"
        if core in self.stopwords:
            return "other"
        if core in self.pronouns:
            return "pronoun"
        if core in self.verbs or (core.endswith("ing") and len(core) > 4):
            return "verb"
        if core in self.adjectives or core.endswith(_ADJ_SUFFIXES):
            return "adjective"
        return "noun"

    def tag(self, caption: str) -> list[PosTag]:
        return [PosTag(w, self.tag_word(w)) for w in caption.split()]


_DEFAULT_TAGGER = RuleBasedTagger()


def keyword_skeleton(caption: str, tagger: RuleBasedTagger = _DEFAULT_TAGGER) -> str:
    """Reduce a caption to kept words: pronouns/adjectives/nouns plus verbs
    adjacent to one of those in the kept sequence.

    A verb survives when its neighbor among the keep-candidate words (the
    base classes plus verbs, in order) is a base-class word; chained verbs
    do not keep each other alive. A caption with no base-class word is
    returned unchanged.
    """
    tags = tagger.tag(caption)
    candidates = [i for i, t in enumerate(tags) if t.tag in KEEP_TAGS or t.tag == "verb"]
    base = {i for i in candidates if tags[i].tag in KEEP_TAGS}
    if not base:
        return caption
    kept = []
    for j, i in enumerate(candidates):
        if i in base:
            kept.append(i)
            continue
        prev_base = j > 0 and candidates[j - 1] in base
        next_base = j + 1 < len(candidates) and candidates[j + 1] in base
        if prev_base or next_base:
            kept.append(i)
    return " ".join(tags[i].word for i in kept)


def pos_prune(caption: str, cfg: AugConfig, rng, tagger: RuleBasedTagger = _DEFAULT_TAGGER) -> str:
    """Probability-gated caption pruning.

    Default mode: with probability ``text_prune_prob`` the whole caption is
    replaced by its keyword skeleton, otherwise returned verbatim. Per-word
    mode (``prune_per_word``) instead drops each non-keyword independently
    with that probability. Either way the output words form a subsequence
    of the input words.
    """
    if cfg.prune_per_word:
        tags = tagger.tag(caption)
        keep_classes = set(KEEP_TAGS) | {"verb"}
        kept = [t.word for t in tags if t.tag in keep_classes or rng.random() >= cfg.text_prune_prob]
        return " ".join(kept) if kept else caption
    if rng.random() < cfg.text_prune_prob:
        return keyword_skeleton(caption, tagger)
    return caption


def to_grayscale(image: torch.Tensor) -> torch.Tensor:
    """Luminance conversion, all channels made equal.

    Accepts (..., 3, H, W); output shape matches. Y = 0.299R + 0.587G +
    0.114B, so values stay in [0, 1] and the map is idempotent.
    """
    if image.shape[-3] != 3:
        raise ValueError(f"expected channel dim of 3, got {image.shape[-3]}")
    r, g, b = image.unbind(dim=-3)
    y = 0.299 * r + 0.587 * g + 0.114 * b
    return torch.stack([y, y, y], dim=-3)


def standard_augs(image: torch.Tensor, cfg: AugConfig, rng) -> torch.Tensor:
    """Horizontal flip, pad-then-crop, random erase on one (3, H, W) image.

    Draw order is fixed (flip coin, crop offsets, erase coin, erase box) so
    a fixed rng state reproduces the output exactly.
    """
    _, h, w = image.shape
    out = image
    if rng.random() < cfg.flip_prob:
        out = torch.flip(out, dims=[-1])
    if cfg.crop_padding > 0:
        p = cfg.crop_padding
        padded = torch.zeros(3, h + 2 * p, w + 2 * p, dtype=out.dtype)
        padded[:, p : p + h, p : p + w] = out
        top = int(rng.integers(0, 2 * p + 1))
        left = int(rng.integers(0, 2 * p + 1))
        out = padded[:, top : top + h, left : left + w]
    if rng.random() < cfg.erase_prob:
        out = out.clone()
        area = h * w * rng.uniform(0.02, 0.2)
        aspect = rng.uniform(0.3, 3.3)
        eh = min(h, max(1, int(round((area * aspect) ** 0.5))))
        ew = min(w, max(1, int(round((area / aspect) ** 0.5))))
        top = int(rng.integers(0, h - eh + 1))
        left = int(rng.integers(0, w - ew + 1))
        out[:, top : top + eh, left : left + ew] = 0.0
    return out


def augment_batch(images: torch.Tensor, cfg: AugConfig, rng) -> torch.Tensor:
    """Apply standard_augs per sample; (B, 3, H, W) in and out."""
    return torch.stack([standard_augs(img, cfg, rng) for img in images])
