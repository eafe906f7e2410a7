import numpy as np
import pytest
import torch

from styleforge.checkpoint import load_checkpoint, read_archive, \
    restore_optimizers, save_checkpoint, write_archive
from styleforge.config import RunConfig
from styleforge.data import batch_rng, sample_batch
from styleforge.errors import DataError
from styleforge.models import build_models
from styleforge.trainer import build_optimizers, train_step


class TestArchive:
    def test_roundtrip_exact(self, tmp_path):
        arrays = {
            "a/weight": np.random.default_rng(0).standard_normal(
                (3, 4)).astype(np.float32),
            "b/step": np.asarray(7, dtype=np.int64),
            "c/empty": np.zeros((0,), dtype=np.float32),
        }
        path = tmp_path / "arc.bin"
        write_archive(path, arrays)
        back = read_archive(path)
        assert set(back) == set(arrays)
        for name in arrays:
            assert back[name].dtype == arrays[name].dtype
            assert np.array_equal(back[name], arrays[name])

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            read_archive(tmp_path / "nope.bin")

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"NOTACKPT" + b"\x00" * 16)
        with pytest.raises(DataError, match="not a styleforge checkpoint"):
            read_archive(path)


@pytest.fixture(scope="module")
def saved(tmp_path_factory, toy_dataset):
    """A checkpoint written after two real training steps."""
    cfg = RunConfig.desk(iterations=2)
    models = build_models(cfg, 3, init_seed=cfg.seed)
    models.extractor.freeze()
    optims = build_optimizers(models, cfg)
    for step in range(2):
        batch = sample_batch(toy_dataset, cfg.batch_size,
                             batch_rng(cfg.seed, step))
        train_step(models, optims, batch, cfg, step)
    out = tmp_path_factory.mktemp("ckpt")
    path = save_checkpoint(out, 2, models, optims, cfg,
                           toy_dataset.registry.names)
    return path, models, optims, cfg


class TestCheckpoint:
    def test_manifest_written(self, saved):
        path, _, _, _ = saved
        manifest = path.with_suffix(".manifest.txt").read_text()
        assert "step = 2" in manifest
        assert "domains = cobalt,crimson,verdant" in manifest
        assert "resolution = 64" in manifest

    def test_forward_outputs_match_after_reload(self, saved, toy_dataset):
        path, models, _, cfg = saved
        ckpt = load_checkpoint(path)
        rebuilt = ckpt.build_models()
        x, y, labels = sample_batch(toy_dataset, 2, batch_rng(5, 0))
        z = torch.randn(2, cfg.style_dim,
                        generator=torch.Generator().manual_seed(3))
        models.eval()
        with torch.no_grad():
            a = models.generate(x, z, labels)
            b = rebuilt.generate(x, z, labels)
        models.train()
        assert float((a - b).abs().max()) < 1e-6

    def test_optimizer_state_roundtrip(self, saved):
        path, models, optims, cfg = saved
        ckpt = load_checkpoint(path)
        rebuilt = ckpt.build_models()
        fresh = build_optimizers(rebuilt, cfg)
        restore_optimizers(ckpt, fresh)
        for group in optims:
            orig_named = optims[group][1]
            new_named = dict(fresh[group][1])
            for pname, param in orig_named:
                state = optims[group][0].state.get(param)
                if not state:
                    continue
                restored = fresh[group][0].state[new_named[pname]]
                assert int(restored["step"]) == int(state["step"])
                assert torch.allclose(
                    restored["exp_avg"], state["exp_avg"], atol=1e-7)

    def test_domain_count_mismatch_detected(self, saved):
        path, _, _, _ = saved
        ckpt = load_checkpoint(path)
        ckpt.domain_names = ["a", "b"]  # wrong label width vs stored heads
        with pytest.raises(DataError, match="mismatch"):
            ckpt.build_models()

    def test_missing_manifest(self, saved, tmp_path):
        path, _, _, _ = saved
        orphan = tmp_path / "orphan.bin"
        orphan.write_bytes(path.read_bytes())
        with pytest.raises(DataError, match="manifest"):
            load_checkpoint(orphan)
