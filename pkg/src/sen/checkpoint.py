"""Checkpoint archive: every parameter as a named array plus a JSON header.

The header carries the full experiment configuration, the tokenizer
vocabulary and bookkeeping metadata, and is validated before any weight
array is trusted. A checkpoint is therefore self-describing: evaluation
and retrieval never need a separate config file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import torch

from .config import ExperimentConfig
from .model import SenModel
from .tokenizer import SimpleTokenizer

HEADER_KEY = "header_json"
PARAM_PREFIX = "param."
FORMAT_NAME = "sen-checkpoint"
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    model: SenModel
    config: ExperimentConfig
    tokenizer: SimpleTokenizer
    meta: dict


def save_checkpoint(
    path,
    model: SenModel,
    config: ExperimentConfig,
    tokenizer: SimpleTokenizer,
    meta: dict | None = None,
) -> None:
    header = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "config": config.to_dict(),
        "vocab": tokenizer.to_dict(),
        "num_classes": model.num_classes,
        "meta": dict(meta or {}),
    }
    arrays = {
        PARAM_PREFIX + name: tensor.detach().cpu().numpy()
        for name, tensor in model.state_dict().items()
    }
    np.savez(path, **{HEADER_KEY: np.array(json.dumps(header))}, **arrays)


def load_checkpoint(path, strict: bool = True) -> Checkpoint:
    """Rebuild the model a checkpoint describes and load its weights.

    The header is parsed and validated first; array contents are only read
    once the declared shape of the experiment is known. With ``strict`` the
    archive must contain exactly the parameter set of the rebuilt model.
    """
    with np.load(path, allow_pickle=False) as archive:
        if HEADER_KEY not in archive:
            raise ValueError(f"{path}: not a checkpoint archive (missing JSON header)")
        try:
            header = json.loads(str(archive[HEADER_KEY]))
        except json.JSONDecodeError as e:
            raise ValueError(f"{path}: corrupt checkpoint header: {e}") from e
        if header.get("format") != FORMAT_NAME:
            raise ValueError(f"{path}: unrecognized archive format {header.get('format')!r}")
        if header.get("version") != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {header.get('version')!r}")
        config = ExperimentConfig.from_dict(header["config"])
        tokenizer = SimpleTokenizer.from_dict(header["vocab"])
        model = SenModel(config, num_classes=header.get("num_classes"))

        stored = {
            name[len(PARAM_PREFIX):]: archive[name]
            for name in archive.files
            if name.startswith(PARAM_PREFIX)
        }
        expected = model.state_dict()
        missing = sorted(set(expected) - set(stored))
        unexpected = sorted(set(stored) - set(expected))
        if strict and (missing or unexpected):
            raise ValueError(
                f"{path}: parameter set mismatch (missing {missing[:5]}, unexpected {unexpected[:5]})"
            )
        state = {}
        for name, tensor in expected.items():
            if name not in stored:
                continue
            arr = stored[name]
            if tuple(arr.shape) != tuple(tensor.shape):
                raise ValueError(
                    f"{path}: shape mismatch for {name}: stored {arr.shape}, model {tuple(tensor.shape)}"
                )
            state[name] = torch.from_numpy(arr)
        model.load_state_dict(state, strict=strict)
    return Checkpoint(model=model, config=config, tokenizer=tokenizer, meta=header.get("meta", {}))
