"""Whitespace/punctuation tokenizer with a fixed special-token layout.

Token ids: 0 = PAD, 1 = SOS, 2 = EOS, 3 = UNK, then vocabulary words in
first-seen order. Text is lowercased before lookup, so "A Man" and "a man"
produce identical sequences. The empty string encodes to (SOS, EOS).

The sequence-end token doubles as the sentence summary position: the text
encoder reads its global feature at the EOS index.
"""

from __future__ import annotations

import re


PAD, SOS, EOS, UNK = 0, 1, 2, 3
_SPECIALS = ("<pad>", "<sos>", "<eos>", "<unk>")

_WORD_RE = re.compile(r"[a-z0-9]+(?:'[a-z]+)?|[.,!?;:]")


def words_of(text: str) -> list[str]:
    """Lowercased word/punctuation split used everywhere text enters."""
    return _WORD_RE.findall(text.lower())


class SimpleTokenizer:
    """Word-level tokenizer built from a caption corpus.

    A byte-pair vocabulary can be dropped in by passing an explicit
    ``vocab`` mapping; the surrounding code only relies on the special-token
    layout and ``encode``/``decode``.
    """

    def __init__(self, vocab: dict[str, int] | None = None):
        if vocab is None:
            vocab = {}
        for i, tok in enumerate(_SPECIALS):
            if vocab.setdefault(tok, i) != i:
                raise ValueError(f"special token {tok!r} must map to id {i}")
        self.vocab = vocab
        self._inverse = {i: w for w, i in vocab.items()}

    @classmethod
    def from_corpus(cls, captions: list[str], max_vocab: int | None = None) -> "SimpleTokenizer":
        vocab = {tok: i for i, tok in enumerate(_SPECIALS)}
        for cap in captions:
            for w in words_of(cap):
                if w not in vocab:
                    if max_vocab is not None and len(vocab) >= max_vocab:
                        continue
                    vocab[w] = len(vocab)
        return cls(vocab)

    def __len__(self) -> int:
        return len(self.vocab)

    def encode(self, text: str, max_len: int | None = None) -> list[int]:
        """Encode to [SOS, w1, ..., wk, EOS], truncating words to fit max_len."""
        ids = [self.vocab.get(w, UNK) for w in words_of(text)]
        if max_len is not None:
            ids = ids[: max_len - 2]
        return [SOS] + ids + [EOS]

    def decode(self, ids: list[int]) -> str:
        words = []
        for i in ids:
            if i in (PAD, SOS, EOS):
                continue
            words.append(self._inverse.get(int(i), "<unk>"))
        return " ".join(words)

    def pad_batch(self, texts: list[str], max_len: int):
        """Encode and right-pad a batch.

        Returns:
            ids: (B, max_len) int64 token ids, PAD-filled.
            mask: (B, max_len) bool, True on real tokens (including SOS/EOS).
            eos_index: (B,) int64 position of EOS per row.
        """
        import torch

        ids = torch.full((len(texts), max_len), PAD, dtype=torch.int64)
        mask = torch.zeros((len(texts), max_len), dtype=torch.bool)
        eos_index = torch.zeros(len(texts), dtype=torch.int64)
        for r, text in enumerate(texts):
            seq = self.encode(text, max_len=max_len)
            ids[r, : len(seq)] = torch.tensor(seq, dtype=torch.int64)
            mask[r, : len(seq)] = True
            eos_index[r] = len(seq) - 1
        return ids, mask, eos_index

    def to_dict(self) -> dict[str, int]:
        return dict(self.vocab)

    @classmethod
    def from_dict(cls, d: dict[str, int]) -> "SimpleTokenizer":
        return cls({w: int(i) for w, i in d.items()})
