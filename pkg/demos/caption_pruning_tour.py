"""
Caption pruning tour: from full sentences to keyword skeletons
==============================================================

Shows what the rule-based tagger keeps, how often the probability gate
fires, and what the grayscale conversion used by the restoration branch
does to channel statistics. Pure CPU, finishes in a second.
"""

import numpy as np
import torch

from sen import AugConfig, RuleBasedTagger, keyword_skeleton, pos_prune, to_grayscale

tagger = RuleBasedTagger()

sentences = [
    "the man is wearing a bright red jacket",
    "a woman with long blond hair carries a black leather handbag",
    "he is walking quickly while holding a large green umbrella",
    "short white sneakers and a plain gray hoodie",
]

print("tagger output and keyword skeletons")
print("-" * 60)
for sentence in sentences:
    tags = tagger.tag(sentence)
    print(f"  {sentence}")
    print("   ", " ".join(f"{t.word}/{t.tag[:4]}" for t in tags))
    print(f"    -> {keyword_skeleton(sentence, tagger)}")
    print()

# the training default prunes whole captions with probability 0.2
cfg = AugConfig(text_prune_prob=0.2)
rng = np.random.default_rng(0)
caption = sentences[0]
n = 10000
pruned = sum(pos_prune(caption, cfg, rng) != caption for _ in range(n))
print(f"gate fired on {pruned}/{n} draws (expected ~{int(cfg.text_prune_prob * n)})")

# per-word mode drops individual non-keywords instead
per_word = AugConfig(text_prune_prob=0.5, prune_per_word=True)
rng = np.random.default_rng(1)
print("\nper-word mode, five draws of the same caption:")
for _ in range(5):
    print("  ", pos_prune(caption, per_word, rng))

# the restoration branch sees grayscale input; channels become equal
img = torch.rand(3, 64, 32)
gray = to_grayscale(img)
print("\ngrayscale conversion")
print(f"  input channel means:  {[round(float(c.mean()), 3) for c in img]}")
print(f"  output channel means: {[round(float(c.mean()), 3) for c in gray]}")
print(f"  channels identical: {bool(torch.equal(gray[0], gray[1]) and torch.equal(gray[1], gray[2]))}")
