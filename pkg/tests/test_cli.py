import json

import pytest

from styleforge.cli import main
from styleforge.config import RunConfig, save_config


@pytest.fixture(scope="module")
def cli_run(tmp_path_factory, toy_root):
    """A tiny CLI training run shared by the command tests."""
    base = tmp_path_factory.mktemp("cli")
    cfg = RunConfig.desk(iterations=3, log_interval=1,
                         extractor_pretrain_steps=5)
    cfg_path = base / "run.cfg"
    save_config(cfg, cfg_path)
    out = base / "run"
    code = main(["train", "--config", str(cfg_path), "--data", str(toy_root),
                 "--out", str(out), "--quiet"])
    assert code == 0
    ckpt = out / "checkpoint_0000003.bin"
    assert ckpt.is_file()
    return base, cfg_path, out, ckpt


class TestTrain:
    def test_outputs(self, cli_run):
        _, _, out, _ = cli_run
        assert (out / "losses.csv").is_file()
        assert (out / "losses.png").is_file()
        assert (out / "config.txt").is_file()

    def test_missing_config_exits_2(self, toy_root, tmp_path):
        code = main(["train", "--config", str(tmp_path / "none.cfg"),
                     "--data", str(toy_root), "--out", str(tmp_path / "o")])
        assert code == 2

    def test_bad_data_root_exits_3(self, cli_run, tmp_path):
        _, cfg_path, _, _ = cli_run
        code = main(["train", "--config", str(cfg_path),
                     "--data", str(tmp_path / "nodata"),
                     "--out", str(tmp_path / "o")])
        assert code == 3


class TestStylize:
    def test_roundtrip_and_idempotence(self, cli_run, toy_root, tmp_path):
        _, _, _, ckpt = cli_run
        content = sorted((toy_root / "content").iterdir())[0]
        style = sorted((toy_root / "styles" / "cobalt").iterdir())[0]
        out_a = tmp_path / "a.png"
        out_b = tmp_path / "b.png"
        for out in (out_a, out_b):
            code = main(["stylize", "--checkpoint", str(ckpt),
                         "--content", str(content), "--style", str(style),
                         "--domain", "cobalt", "--out", str(out)])
            assert code == 0
        assert out_a.read_bytes() == out_b.read_bytes()

    def test_unknown_domain_exits_3(self, cli_run, toy_root, tmp_path):
        _, _, _, ckpt = cli_run
        content = sorted((toy_root / "content").iterdir())[0]
        code = main(["stylize", "--checkpoint", str(ckpt),
                     "--content", str(content), "--style", str(content),
                     "--domain", "neon", "--out", str(tmp_path / "x.png")])
        assert code == 3

    def test_missing_checkpoint_exits_3(self, toy_root, tmp_path):
        content = sorted((toy_root / "content").iterdir())[0]
        code = main(["stylize", "--checkpoint", str(tmp_path / "no.bin"),
                     "--content", str(content), "--style", str(content),
                     "--domain", "cobalt", "--out", str(tmp_path / "x.png")])
        assert code == 3


class TestSample:
    def test_writes_n_samples_and_grid(self, cli_run, toy_root, tmp_path):
        _, _, _, ckpt = cli_run
        content = sorted((toy_root / "content").iterdir())[0]
        out = tmp_path / "samples"
        code = main(["sample", "--checkpoint", str(ckpt),
                     "--content", str(content), "--domain", "crimson",
                     "--n", "3", "--seed", "7", "--out", str(out)])
        assert code == 0
        assert sorted(p.name for p in out.iterdir()) == \
            ["grid.png", "sample_000.png", "sample_001.png",
             "sample_002.png"]

    def test_seeded_reproducibility(self, cli_run, toy_root, tmp_path):
        _, _, _, ckpt = cli_run
        content = sorted((toy_root / "content").iterdir())[0]
        outs = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            assert main(["sample", "--checkpoint", str(ckpt),
                         "--content", str(content), "--domain", "verdant",
                         "--n", "2", "--seed", "11",
                         "--out", str(out)]) == 0
            outs.append((out / "sample_000.png").read_bytes())
        assert outs[0] == outs[1]


class TestInterpolate:
    def test_frames_grid_and_stats(self, cli_run, toy_root, tmp_path):
        _, _, _, ckpt = cli_run
        content = sorted((toy_root / "content").iterdir())[0]
        out = tmp_path / "interp"
        code = main(["interpolate", "--checkpoint", str(ckpt),
                     "--content", str(content), "--domain", "cobalt",
                     "--steps", "5", "--out", str(out)])
        assert code == 0
        assert len(list(out.glob("interp_*.png"))) == 5
        stats = json.loads((out / "smoothness.json").read_text())
        assert len(stats["deltas"]) == 4

    def test_cross_domain_pair(self, cli_run, toy_root, tmp_path):
        _, _, _, ckpt = cli_run
        content = sorted((toy_root / "content").iterdir())[0]
        out = tmp_path / "xd"
        code = main(["interpolate", "--checkpoint", str(ckpt),
                     "--content", str(content),
                     "--domain", "cobalt,crimson",
                     "--steps", "3", "--out", str(out)])
        assert code == 0

    def test_three_domains_exits_2(self, cli_run, toy_root, tmp_path):
        _, _, _, ckpt = cli_run
        content = sorted((toy_root / "content").iterdir())[0]
        code = main(["interpolate", "--checkpoint", str(ckpt),
                     "--content", str(content),
                     "--domain", "a,b,c", "--steps", "3",
                     "--out", str(tmp_path / "bad")])
        assert code == 2


class TestEvaluateAndDiagnose:
    def test_evaluate_outputs(self, cli_run, toy_root, tmp_path):
        _, _, _, ckpt = cli_run
        out = tmp_path / "eval"
        code = main(["evaluate", "--checkpoint", str(ckpt),
                     "--data", str(toy_root), "--out", str(out),
                     "--n", "2"])
        assert code == 0
        for name in ("reclassification.csv", "confusion_matrix.csv",
                     "reclassification_summary.json",
                     "confusion_matrix.png"):
            assert (out / name).is_file(), name

    def test_diagnose_outputs(self, cli_run, toy_root, tmp_path):
        _, _, _, ckpt = cli_run
        out = tmp_path / "diag"
        code = main(["diagnose", "--checkpoint", str(ckpt),
                     "--data", str(toy_root), "--out", str(out),
                     "--n", "500"])
        assert code == 0
        for name in ("style_space_pca.csv", "style_space_l1_hist.csv",
                     "style_space_summary.json", "style_space.png"):
            assert (out / name).is_file(), name

    def test_domain_mismatch_exits_3(self, cli_run, tmp_path):
        from styleforge.toydata import make_toy_dataset

        _, _, _, ckpt = cli_run
        other = make_toy_dataset(tmp_path / "otherdata", resolution=64,
                                 n_content=2, n_style=2, seed=1)
        # same domain names but we need mismatch: rename one dir
        styles = other / "styles"
        (styles / "cobalt").rename(styles / "teal")
        code = main(["diagnose", "--checkpoint", str(ckpt),
                     "--data", str(other), "--out", str(tmp_path / "d")])
        assert code == 3
