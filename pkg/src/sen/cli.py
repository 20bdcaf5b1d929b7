"""Operator commands: train, eval, ablate, retrieve, build-cache, gen-data.

Configs and reports are JSON; metric reports are also rendered as aligned
text tables. Every command is runnable at desk scale on CPU.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint
from .config import ExperimentConfig, toy_experiment_config
from .data import SplitDataset, SyntheticSpec, generate_synthetic, load_annotations
from .retrieval import format_metric_table, load_gallery_cache, rank_all, save_gallery_cache
from .training import Trainer, build_gallery, encode_queries, evaluate_model

COMPONENT_GRID = (
    # (cmt, irr, tir); irr is a reserved no-op axis kept so the historical
    # 8-row component table stays enumerable.
    ("baseline", False, False, False),
    ("+cmt", True, False, False),
    ("+irr", False, True, False),
    ("+tir", False, False, True),
    ("+cmt+irr", True, True, False),
    ("+cmt+tir", True, False, True),
    ("+irr+tir", False, True, True),
    ("full", True, True, True),
)

ABLATION_AXES = ("mask_ratio", "decoder_depth", "decoder_variant", "components")


def _load_config(path: str | None) -> ExperimentConfig:
    if path is None:
        return toy_experiment_config()
    return ExperimentConfig.load(path)


def cmd_train(args) -> int:
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    trainer = Trainer(cfg, args.data, args.out)
    result = trainer.run(max_steps=args.steps)
    print(f"trained {result.steps} steps; checkpoint: {result.checkpoint_path}")
    print(f"log: {result.log_path}")
    print(f"final metrics ({result.eval_split} split):")
    print(format_metric_table(result.final_metrics))
    return 0


def cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    records = load_annotations(args.data)
    dataset = SplitDataset(records, args.split)
    metrics = evaluate_model(ckpt.model, ckpt.tokenizer, dataset)
    print(json.dumps({"split": args.split, **metrics}))
    print(format_metric_table(metrics))
    if args.out:
        Path(args.out).write_text(json.dumps({"split": args.split, **metrics}, indent=2))
    return 0


def _ablation_cells(cfg: ExperimentConfig, axis: str):
    """Yield (cell name, per-cell config) pairs for one sweep axis."""
    if axis == "mask_ratio":
        for ratio in (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9):
            cell = ExperimentConfig.from_dict(cfg.to_dict())
            cell.mask_ratio = ratio
            yield f"mask_ratio={ratio}", cell
    elif axis == "decoder_depth":
        for depth in (1, 2, 3, 4):
            cell = ExperimentConfig.from_dict(cfg.to_dict())
            cell.decoder.depth = depth
            yield f"depth={depth}", cell
    elif axis == "decoder_variant":
        for variant in ("cross", "fuse", "concat"):
            cell = ExperimentConfig.from_dict(cfg.to_dict())
            cell.decoder.variant = variant
            yield f"variant={variant}", cell
    elif axis == "components":
        for name, cmt, irr, tir in COMPONENT_GRID:
            cell = ExperimentConfig.from_dict(cfg.to_dict())
            cell.cmt_enabled = cmt
            cell.irr_enabled = irr
            cell.tir_enabled = tir
            yield name, cell
    else:
        raise ValueError(f"unknown ablation axis {axis!r}; expected one of {ABLATION_AXES}")


def cmd_ablate(args) -> int:
    base = _load_config(args.config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for name, cell_cfg in _ablation_cells(base, args.axis):
        per_seed = []
        for seed in args.seeds:
            cell_cfg.seed = seed
            trainer = Trainer(cell_cfg, args.data, out_dir / f"{name.replace('=', '_')}_s{seed}")
            result = trainer.run(max_steps=args.steps)
            per_seed.append(result.final_metrics)
        mean = {k: float(np.mean([m[k] for m in per_seed])) for k in per_seed[0]}
        rows.append({"cell": name, "seeds": args.seeds, **mean})
        print(f"{name}: " + ", ".join(f"{k}={v:.4f}" for k, v in mean.items()))
    report_path = out_dir / f"ablation_{args.axis}.json"
    report_path.write_text(json.dumps(rows, indent=2))

    widths = [max(len(r["cell"]) for r in rows)] + [9] * 5
    cols = ["rank1", "rank5", "rank10", "mAP", "mINP"]
    print("cell".ljust(widths[0]) + "  " + "  ".join(c.rjust(9) for c in cols))
    for r in rows:
        print(r["cell"].ljust(widths[0]) + "  " + "  ".join(f"{r[c] * 100:9.2f}" for c in cols))
    print(f"report: {report_path}")
    return 0


def cmd_build_cache(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    records = load_annotations(args.data)
    dataset = SplitDataset(records, args.split)
    gallery = build_gallery(ckpt.model, dataset)
    save_gallery_cache(args.out, gallery)
    print(f"cached {len(gallery)} gallery features to {args.out}")
    return 0


def cmd_retrieve(args) -> int:
    cache_path = Path(args.cache)
    if not cache_path.is_file():
        print(
            f"gallery cache not found: {cache_path}\n"
            f"build it first: sen build-cache --ckpt {args.ckpt} --data DIR "
            f"--split test --out {cache_path}",
            file=sys.stderr,
        )
        return 1
    ckpt = load_checkpoint(args.ckpt)
    gallery = load_gallery_cache(cache_path)
    top_k = args.top_k
    if top_k > len(gallery):
        print(f"top-k {top_k} clamped to gallery size {len(gallery)}", file=sys.stderr)
        top_k = len(gallery)

    start = time.perf_counter()
    feature = encode_queries(ckpt.model, ckpt.tokenizer, [args.query])
    result = rank_all(feature, np.array([-1]), gallery)[0]
    latency = time.perf_counter() - start

    sims = {}
    feats = gallery.features / np.linalg.norm(gallery.features, axis=1, keepdims=True)
    q = feature[0] / np.linalg.norm(feature[0])
    for gid, s in zip(gallery.ids, feats @ q):
        sims[int(gid)] = float(s)
    print(f"query: {args.query!r}  ({latency * 1000:.1f} ms)")
    for rank, gid in enumerate(result.ordered_ids[:top_k], start=1):
        label = gallery.labels[np.flatnonzero(gallery.ids == gid)[0]]
        print(f"{rank:3d}. id={int(gid)} identity={int(label)} sim={sims[int(gid)]:.4f}")
    return 0


def cmd_gen_data(args) -> int:
    if args.spec:
        with open(args.spec, "r", encoding="utf-8") as f:
            spec = SyntheticSpec.from_dict(json.load(f))
    else:
        spec = SyntheticSpec()
    ann_path = generate_synthetic(spec, args.out)
    print(
        f"generated {spec.num_identities * spec.images_per_identity} images "
        f"({spec.num_identities} identities) under {args.out}"
    )
    print(f"annotations: {ann_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sen",
        description="Text-to-image person retrieval: training, evaluation and retrieval tools",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model on an annotation directory")
    p.add_argument("--config", help="ExperimentConfig JSON (defaults to the toy preset)")
    p.add_argument("--data", required=True, help="directory with annotations.json")
    p.add_argument("--out", default="runs/train", help="output directory")
    p.add_argument("--steps", type=int, default=None, help="override total training steps")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--out", help="optional JSON report path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="sweep one design axis and report per-cell metrics")
    p.add_argument("--axis", required=True, choices=ABLATION_AXES)
    p.add_argument("--config", help="base config (defaults to the toy preset)")
    p.add_argument("--data", required=True)
    p.add_argument("--out", default="runs/ablate")
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("build-cache", help="encode a split's images into a gallery cache")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_cache)

    p = sub.add_parser("retrieve", help="rank cached gallery images against a text query")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--cache", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--top-k", type=int, default=10)
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("gen-data", help="generate a synthetic dataset")
    p.add_argument("--spec", help="SyntheticSpec JSON (defaults used if omitted)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
