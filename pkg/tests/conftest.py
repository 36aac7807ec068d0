"""Shared fixtures: miniature configurations small enough to train in a test."""

import numpy as np
import pytest

from data.dataset import SceneDataset, make_dataset
from models.backbone import EncoderConfig
from training.config import TrainConfig

TINY_CHANNELS = (2, 2, 2, 2)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_encoder_config() -> EncoderConfig:
    return EncoderConfig(stage_channels=TINY_CHANNELS, convs_per_stage=1)


@pytest.fixture
def tiny_config() -> TrainConfig:
    """Two steps on 32x32 inputs with three memory slots."""
    return TrainConfig(
        image_size=32,
        stage_channels=TINY_CHANNELS,
        convs_per_stage=1,
        memory_size=3,
        steps=2,
        n_train=4,
        n_val=2,
        log_every=1,
    )


@pytest.fixture
def tiny_splits(tiny_config: TrainConfig) -> tuple[SceneDataset, SceneDataset]:
    train, val = make_dataset(tiny_config.n_train, tiny_config.n_val, tiny_config.seed)
    size = tiny_config.image_size
    return SceneDataset(train, height=size, width=size), SceneDataset(val, height=size, width=size)
