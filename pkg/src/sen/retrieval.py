"""Ranking and evaluation: encode once, rank by cosine, score with
Rank-k / mAP / mINP.

Everything here is numpy at float64 so results are platform-stable; the
model side converts its features before calling in. Ties in similarity are
broken by ascending gallery id, making every ranking deterministic.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass

import numpy as np


@dataclass
class Gallery:
    """Precomputed gallery: ids, identity labels, global features (G, d)."""

    ids: np.ndarray  # (G,) int64, unique
    labels: np.ndarray  # (G,) int64 identity labels
    features: np.ndarray  # (G, d) float64

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2 or len(self.ids) != len(self.features):
            raise ValueError("features must be (G, d) aligned with ids")
        if len(self.labels) != len(self.ids):
            raise ValueError("labels must align with ids")
        if len(np.unique(self.ids)) != len(self.ids):
            raise ValueError("gallery ids must be unique")
        norms = np.linalg.norm(self.features, axis=1)
        if np.any(norms == 0):
            raise ValueError("gallery contains zero-norm feature rows")

    def __len__(self) -> int:
        return len(self.ids)


@dataclass
class RankingResult:
    """One query's full ranking: gallery ids in rank order plus relevance."""

    ordered_ids: np.ndarray  # (G,) int64
    relevant: np.ndarray  # (G,) bool, aligned with ordered_ids

    def __post_init__(self):
        if len(self.ordered_ids) != len(self.relevant):
            raise ValueError("ordered_ids and relevant must align")


def _order(similarities: np.ndarray, ids: np.ndarray) -> np.ndarray:
    # lexsort: last key is primary. Descending similarity, then ascending id.
    return np.lexsort((ids, -similarities))


def rank_gallery(query_feature: np.ndarray, gallery: Gallery, query_label: int) -> RankingResult:
    """Rank the whole gallery against one query feature."""
    q = np.asarray(query_feature, dtype=np.float64).reshape(-1)
    qn = np.linalg.norm(q)
    if qn == 0:
        raise ValueError("query feature has zero norm")
    g = gallery.features / np.linalg.norm(gallery.features, axis=1, keepdims=True)
    sims = g @ (q / qn)
    order = _order(sims, gallery.ids)
    return RankingResult(
        ordered_ids=gallery.ids[order],
        relevant=(gallery.labels[order] == query_label),
    )


def rank_all(
    query_features: np.ndarray,
    query_labels: np.ndarray,
    gallery: Gallery,
) -> list[RankingResult]:
    """Rank every query in one matrix product."""
    q = np.asarray(query_features, dtype=np.float64)
    norms = np.linalg.norm(q, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("query features contain zero-norm rows")
    q = q / norms
    g = gallery.features / np.linalg.norm(gallery.features, axis=1, keepdims=True)
    sims = q @ g.T  # (Q, G)
    results = []
    for row, label in zip(sims, np.asarray(query_labels)):
        order = _order(row, gallery.ids)
        results.append(
            RankingResult(
                ordered_ids=gallery.ids[order],
                relevant=(gallery.labels[order] == label),
            )
        )
    return results


def _usable(results: list[RankingResult]) -> list[RankingResult]:
    """Drop queries with zero relevant items, warning with the count."""
    kept = [r for r in results if r.relevant.any()]
    dropped = len(results) - len(kept)
    if dropped:
        warnings.warn(
            f"{dropped} of {len(results)} queries have no relevant gallery item and are excluded",
            RuntimeWarning,
            stacklevel=3,
        )
    if not kept:
        raise ValueError("no query has a relevant gallery item")
    return kept


def rank_k(results: list[RankingResult], k: int) -> float:
    """Fraction of queries with a relevant item in the top k."""
    results = _usable(results)
    gallery_size = len(results[0].ordered_ids)
    if k < 1 or k > gallery_size:
        raise ValueError(f"k={k} outside [1, {gallery_size}]")
    hits = sum(1 for r in results if r.relevant[:k].any())
    return hits / len(results)


def mean_average_precision(results: list[RankingResult]) -> float:
    """Mean over queries of AP = (1/|rel|) sum over relevant ranks r of
    (relevant count at ranks <= r) / r."""
    results = _usable(results)
    total = 0.0
    for r in results:
        rel = r.relevant
        ap = 0.0
        seen = 0
        for rank0 in np.flatnonzero(rel):
            seen += 1
            ap += seen / (rank0 + 1)
        total += ap / int(rel.sum())
    return total / len(results)


def mean_inverse_negative_penalty(results: list[RankingResult]) -> float:
    """Mean over queries of |rel| / rank of the hardest relevant item."""
    results = _usable(results)
    total = 0.0
    for r in results:
        rel_positions = np.flatnonzero(r.relevant)
        hardest_rank = int(rel_positions[-1]) + 1
        total += len(rel_positions) / hardest_rank
    return total / len(results)


def evaluate_rankings(results: list[RankingResult], ks: tuple[int, ...] = (1, 5, 10)) -> dict[str, float]:
    """Standard metric report. Requested k beyond the gallery size is
    clamped with a warning so small toy galleries still report all columns."""
    gallery_size = len(results[0].ordered_ids)
    report = {}
    for k in ks:
        kk = k
        if k > gallery_size:
            warnings.warn(f"rank_k k={k} clamped to gallery size {gallery_size}", RuntimeWarning, stacklevel=2)
            kk = gallery_size
        report[f"rank{k}"] = rank_k(results, kk)
    report["mAP"] = mean_average_precision(results)
    report["mINP"] = mean_inverse_negative_penalty(results)
    return report


def format_metric_table(report: dict[str, float]) -> str:
    """Aligned two-row text table of a metric report."""
    names = list(report)
    vals = [f"{report[n] * 100:.2f}" for n in names]
    widths = [max(len(n), len(v)) for n, v in zip(names, vals)]
    head = "  ".join(n.rjust(w) for n, w in zip(names, widths))
    body = "  ".join(v.rjust(w) for v, w in zip(vals, widths))
    return head + "\n" + body


CACHE_HEADER_KEY = "header_json"


def save_gallery_cache(path, gallery: Gallery) -> None:
    """Write a gallery to a single binary archive with a JSON header.

    The header records dim, count and a sha256 over the feature bytes;
    loading validates the header before trusting the arrays.
    """
    feats = np.ascontiguousarray(gallery.features, dtype=np.float64)
    header = {
        "dim": int(feats.shape[1]),
        "count": int(feats.shape[0]),
        "checksum": hashlib.sha256(feats.tobytes()).hexdigest(),
    }
    np.savez(
        path,
        **{CACHE_HEADER_KEY: np.array(json.dumps(header))},
        ids=gallery.ids,
        labels=gallery.labels,
        features=feats,
    )


def load_gallery_cache(path) -> Gallery:
    with np.load(path, allow_pickle=False) as archive:
        if CACHE_HEADER_KEY not in archive:
            raise ValueError(f"{path}: not a gallery cache (missing JSON header)")
        header = json.loads(str(archive[CACHE_HEADER_KEY]))
        feats = archive["features"]
        if feats.shape != (header["count"], header["dim"]):
            raise ValueError(
                f"{path}: header says {header['count']}x{header['dim']}, "
                f"arrays are {feats.shape}"
            )
        digest = hashlib.sha256(np.ascontiguousarray(feats, dtype=np.float64).tobytes()).hexdigest()
        if digest != header["checksum"]:
            raise ValueError(f"{path}: feature checksum mismatch, cache is corrupt")
        return Gallery(ids=archive["ids"], labels=archive["labels"], features=feats)
