import os
import sys

import numpy as np
import pytest

root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
sys.path.insert(0, root)

from labeldenoise.data import GeneratorConfig, NoiseConfig, generate_synthetic, make_folds


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False, help="run slow end-to-end tests")


def pytest_configure(config):
    config.addinivalue_line('markers', "slow: long end-to-end runs, deselected unless --runslow is given")


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return

    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


SMALL = GeneratorConfig(videos=60, vocabulary_size=8, video_dim=6, audio_dim=3, max_labels=2,
                        min_frames=3, max_frames=7, max_scenes=2, n_groups=3)


@pytest.fixture(scope='session')
def small_dataset():
    return generate_synthetic(SMALL, NoiseConfig(fn_rate=0.3, fp_rate=0.5), seed=7)


@pytest.fixture(scope='session')
def small_folds(small_dataset):
    return make_folds(small_dataset, 3, seed=7)
