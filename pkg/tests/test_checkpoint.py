"""Checkpoint archive round-trips and validation."""

import json

import numpy as np
import pytest
import torch

from sen import (
    ExperimentConfig,
    SenModel,
    SimpleTokenizer,
    load_checkpoint,
    save_checkpoint,
    toy_experiment_config,
)
from sen.checkpoint import FORMAT_NAME, HEADER_KEY, PARAM_PREFIX


@pytest.fixture(scope="module")
def setup():
    torch.manual_seed(0)
    cfg = toy_experiment_config(seed=0)
    tok = SimpleTokenizer.from_corpus(["a red shirt", "blue pants and shoes"])
    model = SenModel(cfg, num_classes=5)
    return cfg, tok, model


def forward_features(model, cfg, tok):
    torch.manual_seed(1)
    images = torch.rand(2, 3, cfg.encoder.image_height, cfg.encoder.image_width)
    ids, mask, eos = tok.pad_batch(["a red shirt", "blue pants"], cfg.encoder.max_text_len)
    with torch.no_grad():
        f_v = model.encode_images(images).global_feature
        f_t = model.encode_texts(ids, mask, eos).global_feature
    return f_v, f_t


class TestRoundTrip:
    def test_forwards_bit_identical(self, setup, tmp_path):
        cfg, tok, model = setup
        path = tmp_path / "ckpt.npz"
        save_checkpoint(path, model, cfg, tok, meta={"step": 12})
        loaded = load_checkpoint(path)
        a_v, a_t = forward_features(model, cfg, tok)
        b_v, b_t = forward_features(loaded.model, loaded.config, loaded.tokenizer)
        assert torch.equal(a_v, b_v)
        assert torch.equal(a_t, b_t)

    def test_config_survives(self, setup, tmp_path):
        cfg, tok, model = setup
        path = tmp_path / "ckpt.npz"
        save_checkpoint(path, model, cfg, tok)
        loaded = load_checkpoint(path)
        assert loaded.config == cfg
        assert loaded.config.to_json() == cfg.to_json()

    def test_tokenizer_and_meta_survive(self, setup, tmp_path):
        cfg, tok, model = setup
        path = tmp_path / "ckpt.npz"
        save_checkpoint(path, model, cfg, tok, meta={"step": 7, "note": "x"})
        loaded = load_checkpoint(path)
        assert loaded.tokenizer.vocab == tok.vocab
        assert loaded.meta == {"step": 7, "note": "x"}

    def test_every_parameter_stored(self, setup, tmp_path):
        cfg, tok, model = setup
        path = tmp_path / "ckpt.npz"
        save_checkpoint(path, model, cfg, tok)
        with np.load(path, allow_pickle=False) as archive:
            stored = {n[len(PARAM_PREFIX):] for n in archive.files if n.startswith(PARAM_PREFIX)}
        assert stored == set(model.state_dict())


class TestValidation:
    def make_path(self, setup, tmp_path):
        cfg, tok, model = setup
        path = tmp_path / "ckpt.npz"
        save_checkpoint(path, model, cfg, tok)
        return path

    def repack(self, path, mutate):
        """Load the archive, apply ``mutate`` to the payload dict, rewrite."""
        with np.load(path, allow_pickle=False) as archive:
            payload = {k: archive[k] for k in archive.files}
        mutate(payload)
        np.savez(path, **payload)

    def test_missing_header_rejected(self, setup, tmp_path):
        path = self.make_path(setup, tmp_path)
        self.repack(path, lambda p: p.pop(HEADER_KEY))
        with pytest.raises(ValueError, match="header"):
            load_checkpoint(path)

    def test_wrong_format_rejected(self, setup, tmp_path):
        path = self.make_path(setup, tmp_path)

        def swap(p):
            header = json.loads(str(p[HEADER_KEY]))
            header["format"] = "something-else"
            p[HEADER_KEY] = np.array(json.dumps(header))

        self.repack(path, swap)
        with pytest.raises(ValueError, match="format"):
            load_checkpoint(path)

    def test_shape_mismatch_names_parameter(self, setup, tmp_path):
        path = self.make_path(setup, tmp_path)
        victim = PARAM_PREFIX + "image_encoder.cls_token"

        def truncate(p):
            assert victim in p
            p[victim] = p[victim][..., :-1]

        self.repack(path, truncate)
        with pytest.raises(ValueError, match="image_encoder.cls_token"):
            load_checkpoint(path)

    def test_missing_parameter_strict_rejected(self, setup, tmp_path):
        path = self.make_path(setup, tmp_path)
        victim = PARAM_PREFIX + "image_encoder.cls_token"
        self.repack(path, lambda p: p.pop(victim))
        with pytest.raises(ValueError, match="mismatch"):
            load_checkpoint(path, strict=True)

    def test_missing_parameter_lenient_keeps_init(self, setup, tmp_path):
        cfg, tok, model = setup
        path = self.make_path(setup, tmp_path)
        victim = PARAM_PREFIX + "image_encoder.cls_token"
        self.repack(path, lambda p: p.pop(victim))
        loaded = load_checkpoint(path, strict=False)
        # the dropped tensor falls back to fresh init, everything else loads
        other = "image_encoder.patch_embed.weight"
        assert torch.equal(
            loaded.model.state_dict()[other], model.state_dict()[other]
        )

    def test_unexpected_parameter_strict_rejected(self, setup, tmp_path):
        path = self.make_path(setup, tmp_path)
        self.repack(path, lambda p: p.update({PARAM_PREFIX + "bogus.weight": np.zeros(3)}))
        with pytest.raises(ValueError, match="mismatch"):
            load_checkpoint(path, strict=True)

    def test_corrupt_header_json_rejected(self, setup, tmp_path):
        path = self.make_path(setup, tmp_path)
        self.repack(path, lambda p: p.update({HEADER_KEY: np.array("{not json")}))
        with pytest.raises(ValueError, match="corrupt"):
            load_checkpoint(path)


class TestConfigSerialization:
    def test_json_round_trip_byte_identical(self):
        cfg = toy_experiment_config(seed=3)
        text = cfg.to_json()
        again = ExperimentConfig.from_json(text).to_json()
        assert text == again

    def test_file_round_trip(self, tmp_path):
        cfg = toy_experiment_config(seed=1)
        path = tmp_path / "cfg.json"
        cfg.save(path)
        assert ExperimentConfig.load(path) == cfg
        assert ExperimentConfig.load(path).to_json() == cfg.to_json()

    def test_unknown_key_rejected(self):
        d = toy_experiment_config().to_dict()
        d["mystery_knob"] = 3
        with pytest.raises(ValueError, match="mystery_knob"):
            ExperimentConfig.from_dict(d)

    def test_nested_unknown_key_rejected(self):
        d = toy_experiment_config().to_dict()
        d["encoder"]["mystery"] = 1
        with pytest.raises(ValueError, match="mystery"):
            ExperimentConfig.from_dict(d)
