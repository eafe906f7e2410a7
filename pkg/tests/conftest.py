import numpy as np
import pytest
import torch

from styleforge.config import RunConfig
from styleforge.data import StyleDataset
from styleforge.toydata import make_toy_dataset

torch.set_num_threads(1)


@pytest.fixture(scope="session")
def toy_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("toyset")
    return make_toy_dataset(root, resolution=64, n_content=40, n_style=30,
                            seed=0)


@pytest.fixture(scope="session")
def desk_cfg():
    return RunConfig.desk()


@pytest.fixture(scope="session")
def toy_dataset(toy_root, desk_cfg):
    return StyleDataset.from_root(toy_root, desk_cfg.resolution)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
