"""Tests for run configuration loading."""

import pytest

from losses.objectives import LossSchedule
from models.network import ModelVariant
from training.config import (
    STAGE1_DEFAULT_STEPS,
    STAGE2_DEFAULT_STEPS,
    ConfigError,
    TrainConfig,
    load_config,
    parse_config_file,
)


def test_defaults():
    """Test the documented defaults."""
    config = TrainConfig()
    assert config.learning_rate == 1e-3
    assert config.lr_decay == 0.5 and config.decay_interval == 10
    assert config.weight_decay == 1e-6
    assert config.batch_size == 2
    assert config.variant is ModelVariant.SOM
    assert config.weights.lambda_cmrc == 2.0
    assert config.som_config.memory_size == 8
    assert config.steps_for(1) == STAGE1_DEFAULT_STEPS
    assert config.steps_for(2) == STAGE2_DEFAULT_STEPS


def test_config_file_parsing(tmp_path):
    """Test comments, types and blank lines."""
    path = tmp_path / 'run.cfg'
    path.write_text(
        '# tiny run\n'
        'learning_rate = 0.01\n'
        '\n'
        'variant = fpn   # baseline\n'
        'stage_channels = 4, 4, 8, 8\n'
        'augment = false\n'
        'gradient_on_step = none\n'
        'steps = 12\n'
    )
    values = parse_config_file(path)
    assert values == {
        'learning_rate': 0.01,
        'variant': ModelVariant.FPN,
        'stage_channels': (4, 4, 8, 8),
        'augment': False,
        'gradient_on_step': None,
        'steps': 12,
    }
    config = load_config(path)
    assert config.variant is ModelVariant.FPN
    assert config.encoder_config.stage_channels == (4, 4, 8, 8)


@pytest.mark.parametrize(
    'text, fragment',
    [
        ('seed = 1\nlearning_rate 0.1\n', ':2: expected "key = value"'),
        ('colour = red\n', ":1: unknown config key 'colour'"),
        ('seed = 1\n\nbatch_size = two\n', ':3: invalid value for batch_size'),
        ('augment = maybe\n', ':1: invalid value for augment'),
    ],
)
def test_config_file_errors_name_the_line(tmp_path, text, fragment):
    """Test that parse errors carry the file line."""
    path = tmp_path / 'bad.cfg'
    path.write_text(text)
    with pytest.raises(ConfigError) as excinfo:
        parse_config_file(path)
    assert fragment in str(excinfo.value)


def test_missing_file(tmp_path):
    """Test an unreadable config path."""
    with pytest.raises(ConfigError, match='cannot read'):
        load_config(tmp_path / 'missing.cfg')


def test_overrides_win_over_file(tmp_path):
    """Test the precedence: defaults, file, then flags; None flags are ignored."""
    path = tmp_path / 'run.cfg'
    path.write_text('seed = 4\nbatch_size = 3\n')
    config = load_config(path, {'seed': 9, 'batch_size': None})
    assert config.seed == 9
    assert config.batch_size == 3


@pytest.mark.parametrize(
    'changes',
    [
        {'learning_rate': -1.0},
        {'batch_size': 0},
        {'lr_decay': 0.0},
        {'image_size': 48},
        {'steps': 0},
        {'stage_channels': (8, 4, 8, 8)},
        {'memory_size': 0},
        {'lambda_cmrc': -2.0},
    ],
)
def test_validation(changes):
    """Test that invalid settings raise a config error."""
    with pytest.raises(ConfigError):
        TrainConfig(**changes)


def test_zero_learning_rate_allowed():
    """Test that a frozen run is a valid configuration."""
    assert TrainConfig(learning_rate=0.0).learning_rate == 0.0


def test_unknown_key_in_dict():
    """Test that from_dict rejects keys it does not know."""
    with pytest.raises(ConfigError, match='unknown config keys: bogus'):
        TrainConfig.from_dict({'bogus': 1})


def test_dict_round_trip():
    """Test the JSON-friendly form used by checkpoint sidecars."""
    config = TrainConfig(variant=ModelVariant.PURE, stage_channels=(4, 4, 8, 8), steps=5)
    data = config.to_dict()
    assert data['variant'] == 'pure' and data['stage_channels'] == [4, 4, 8, 8]
    assert TrainConfig.from_dict(data) == config


def test_schedule_resolution():
    """Test explicit and proportional loss activation steps."""
    assert TrainConfig().schedule(4000) == LossSchedule.scaled(4000)
    assert TrainConfig(gradient_on_step=1, normal_on_step=2).schedule(100) == LossSchedule(1, 2)
    with pytest.raises(ConfigError):
        TrainConfig(gradient_on_step=50, normal_on_step=10).schedule(100)
