"""Command-line surface: every subcommand exercised in-process."""

import json

import numpy as np
import pytest

from sen import ExperimentConfig, SyntheticSpec, load_checkpoint, toy_experiment_config
from sen.cli import ABLATION_AXES, COMPONENT_GRID, _ablation_cells, build_parser, main

# tiny galleries clamp the rank-10 column; expected at this scale
pytestmark = pytest.mark.filterwarnings("ignore:rank_k k=")


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    """6 identities x 3 images with 1 val / 2 test identities held out."""
    out = tmp_path_factory.mktemp("cli_data")
    from sen import generate_synthetic

    spec = SyntheticSpec(
        num_identities=6, images_per_identity=3,
        val_identities=1, test_identities=2, seed=13,
    )
    generate_synthetic(spec, out)
    return out


@pytest.fixture(scope="module")
def config_path(tmp_path_factory):
    cfg = toy_experiment_config(seed=0)
    cfg.batch_size = 6
    path = tmp_path_factory.mktemp("cfg") / "cfg.json"
    cfg.save(path)
    return path


@pytest.fixture(scope="module")
def trained(data_dir, config_path, tmp_path_factory):
    """One short training run shared by the read-only command tests."""
    out = tmp_path_factory.mktemp("train_run")
    rc = main([
        "train", "--config", str(config_path), "--data", str(data_dir),
        "--out", str(out), "--steps", "3",
    ])
    assert rc == 0
    return out / "checkpoint.npz"


class TestGenData:
    def test_default_spec(self, tmp_path, capsys):
        rc = main(["gen-data", "--out", str(tmp_path / "d")])
        assert rc == 0
        assert (tmp_path / "d" / "annotations.json").is_file()
        assert "64 images" in capsys.readouterr().out  # 16 identities x 4

    def test_spec_file(self, tmp_path, capsys):
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(json.dumps({"num_identities": 4, "images_per_identity": 2, "seed": 5}))
        rc = main(["gen-data", "--spec", str(spec_path), "--out", str(tmp_path / "d")])
        assert rc == 0
        images = list((tmp_path / "d" / "images").glob("*.png"))
        assert len(images) == 8
        assert "8 images" in capsys.readouterr().out


class TestTrain:
    def test_writes_checkpoint_log_and_table(self, trained, capsys):
        assert trained.is_file()
        log = trained.parent / "train_log.jsonl"
        assert len(log.read_text().strip().split("\n")) == 3

    def test_checkpoint_config_round_trips_file(self, trained, config_path):
        ckpt = load_checkpoint(trained)
        assert ckpt.config.to_json() == config_path.read_text()

    def test_seed_override(self, data_dir, config_path, tmp_path, capsys):
        rc = main([
            "train", "--config", str(config_path), "--data", str(data_dir),
            "--out", str(tmp_path / "r"), "--steps", "1", "--seed", "9",
        ])
        assert rc == 0
        assert load_checkpoint(tmp_path / "r" / "checkpoint.npz").config.seed == 9


class TestEval:
    def test_reports_all_columns(self, trained, data_dir, capsys):
        rc = main(["eval", "--ckpt", str(trained), "--data", str(data_dir), "--split", "test"])
        assert rc == 0
        out = capsys.readouterr().out
        report = json.loads(out.strip().split("\n")[0])
        assert report["split"] == "test"
        for key in ("rank1", "rank5", "rank10", "mAP", "mINP"):
            assert key in report
            assert 0.0 <= report[key] <= 1.0

    def test_deterministic_repeat(self, trained, data_dir, capsys):
        main(["eval", "--ckpt", str(trained), "--data", str(data_dir), "--split", "test"])
        first = capsys.readouterr().out
        main(["eval", "--ckpt", str(trained), "--data", str(data_dir), "--split", "test"])
        assert capsys.readouterr().out == first

    def test_writes_json_report(self, trained, data_dir, tmp_path, capsys):
        report_path = tmp_path / "report.json"
        rc = main([
            "eval", "--ckpt", str(trained), "--data", str(data_dir),
            "--split", "train", "--out", str(report_path),
        ])
        assert rc == 0
        assert json.loads(report_path.read_text())["split"] == "train"


@pytest.fixture(scope="module")
def cache_path(trained, data_dir, tmp_path_factory):
    path = tmp_path_factory.mktemp("cache") / "gallery.npz"
    rc = main([
        "build-cache", "--ckpt", str(trained), "--data", str(data_dir),
        "--split", "test", "--out", str(path),
    ])
    assert rc == 0
    return path


class TestCacheAndRetrieve:
    def test_cache_loads(self, cache_path):
        from sen import load_gallery_cache

        gallery = load_gallery_cache(cache_path)
        assert len(gallery) == 6  # 2 test identities x 3 images

    def test_retrieve_ranks_gallery(self, trained, cache_path, capsys):
        rc = main([
            "retrieve", "--ckpt", str(trained), "--cache", str(cache_path),
            "--query", "a person wearing a red shirt, blue pants and green shoes",
            "--top-k", "3",
        ])
        assert rc == 0
        lines = capsys.readouterr().out.strip().split("\n")
        assert lines[0].startswith("query:")
        assert len(lines) == 4  # header + 3 ranked rows
        sims = [float(line.split("sim=")[1]) for line in lines[1:]]
        assert sims == sorted(sims, reverse=True)

    def test_top_k_clamped_with_notice(self, trained, cache_path, capsys):
        rc = main([
            "retrieve", "--ckpt", str(trained), "--cache", str(cache_path),
            "--query", "a person wearing a red shirt", "--top-k", "50",
        ])
        assert rc == 0
        captured = capsys.readouterr()
        assert "clamped to gallery size 6" in captured.err
        assert len(captured.out.strip().split("\n")) == 7  # header + all 6

    def test_repeated_query_identical(self, trained, cache_path, capsys):
        argv = [
            "retrieve", "--ckpt", str(trained), "--cache", str(cache_path),
            "--query", "a man dressed in a black shirt", "--top-k", "4",
        ]
        main(argv)
        first = capsys.readouterr().out
        main(argv)
        second = capsys.readouterr().out
        # strip the latency figure, everything else must match exactly
        strip = lambda s: [l.split("(")[0] for l in s.strip().split("\n")]
        assert strip(first) == strip(second)

    def test_missing_cache_names_build_command(self, trained, tmp_path, capsys):
        rc = main([
            "retrieve", "--ckpt", str(trained), "--cache", str(tmp_path / "none.npz"),
            "--query", "a person",
        ])
        assert rc == 1
        err = capsys.readouterr().err
        assert "sen build-cache" in err
        assert "not found" in err


class TestAblate:
    def test_cell_enumeration(self):
        cfg = toy_experiment_config()
        assert len(list(_ablation_cells(cfg, "mask_ratio"))) == 9
        assert len(list(_ablation_cells(cfg, "decoder_depth"))) == 4
        assert len(list(_ablation_cells(cfg, "decoder_variant"))) == 3
        names = [name for name, _ in _ablation_cells(cfg, "components")]
        assert names == [row[0] for row in COMPONENT_GRID]
        assert len(names) == 8

    def test_component_cells_toggle_flags(self):
        cfg = toy_experiment_config()
        cells = dict(_ablation_cells(cfg, "components"))
        assert not cells["baseline"].cmt_enabled and not cells["baseline"].tir_enabled
        assert cells["full"].cmt_enabled and cells["full"].tir_enabled
        assert cells["+tir"].tir_enabled and not cells["+tir"].cmt_enabled

    def test_unknown_axis_rejected_by_parser(self, data_dir):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["ablate", "--axis", "bogus", "--data", str(data_dir)])
        assert "bogus" not in ABLATION_AXES

    def test_variant_sweep_end_to_end(self, data_dir, config_path, tmp_path, capsys):
        rc = main([
            "ablate", "--axis", "decoder_variant", "--config", str(config_path),
            "--data", str(data_dir), "--out", str(tmp_path / "ab"),
            "--steps", "1", "--seeds", "0",
        ])
        assert rc == 0
        report = json.loads((tmp_path / "ab" / "ablation_decoder_variant.json").read_text())
        assert [r["cell"] for r in report] == ["variant=cross", "variant=fuse", "variant=concat"]
        for row in report:
            assert 0.0 <= row["rank1"] <= 1.0
        out = capsys.readouterr().out
        assert "variant=concat" in out

    def test_mask_ratio_cells_apply_ratio(self):
        cfg = toy_experiment_config()
        ratios = [cell.mask_ratio for _, cell in _ablation_cells(cfg, "mask_ratio")]
        np.testing.assert_allclose(ratios, np.arange(1, 10) / 10)


class TestParser:
    def test_missing_subcommand_rejected(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])

    def test_eval_split_choices(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["eval", "--ckpt", "x", "--data", "y", "--split", "weird"])

    def test_prog_name(self):
        assert build_parser().prog == "sen"
