"""Tests for the command-line interface."""

from pathlib import Path

import pytest
from click.testing import CliRunner

from cli.commands import cli
from data.formats import read_pfm, read_ppm

TINY_CONFIG = """\
# miniature run for tests
image_size = 32
stage_channels = 2, 2, 2, 2
convs_per_stage = 1
memory_size = 3
steps = 2
n_train = 4
n_val = 2
log_every = 1
"""


@pytest.fixture
def runner(monkeypatch) -> CliRunner:
    monkeypatch.delenv('SAMNET_RUNS_DB', raising=False)
    return CliRunner()


@pytest.fixture
def config_file(tmp_path) -> Path:
    path = tmp_path / 'tiny.cfg'
    path.write_text(TINY_CONFIG)
    return path


def _invoke(runner: CliRunner, *args: object):
    result = runner.invoke(cli, [str(a) for a in args])
    assert result.exit_code == 0, result.output
    return result


def test_gen_data_is_deterministic(runner, config_file, tmp_path):
    """Test that one seed renders byte-identical datasets."""
    for name in ('a', 'b'):
        _invoke(runner, 'gen-data', '--config', config_file, '--out', tmp_path / name, '--seed', 5)
    for manifest in ('train.manifest', 'val.manifest'):
        assert (tmp_path / 'a' / manifest).read_bytes() == (tmp_path / 'b' / manifest).read_bytes()
    first = sorted((tmp_path / 'a' / 'train').iterdir())
    assert len(first) == 8
    for path in first:
        assert path.read_bytes() == (tmp_path / 'b' / 'train' / path.name).read_bytes()


def test_train_eval_predict_pipeline(runner, config_file, tmp_path):
    """Test both stages, evaluation and prediction through the CLI."""
    data, runs = tmp_path / 'data', tmp_path / 'runs'
    _invoke(runner, 'gen-data', '--config', config_file, '--out', data)
    train = data / 'train.manifest'
    _invoke(runner, 'train-stage1', '--config', config_file, '--manifest', train, '--out', runs)
    assert (runs / 'stage1.ckpt').is_file() and (runs / 'stage1.ckpt.json').is_file()
    _invoke(
        runner,
        'train-stage2',
        '--config',
        config_file,
        '--manifest',
        train,
        '--stage1',
        runs / 'stage1.ckpt',
        '--out',
        runs,
    )
    assert (runs / 'stage2_som_attention.csv').is_file()

    result = _invoke(
        runner,
        'eval',
        '--manifest',
        data / 'val.manifest',
        '--checkpoint',
        runs / 'stage2_som.ckpt',
        '--out',
        runs,
    )
    assert 'RMSE_log' in result.output
    assert any(line.startswith('som') for line in result.output.splitlines())
    assert (runs / 'eval_som.csv').is_file()

    image = sorted((data / 'val').glob('*.ppm'))[0]
    output = tmp_path / 'pred' / 'depth.pfm'
    _invoke(runner, 'predict', '--checkpoint', runs / 'stage2_som.ckpt', '--output', output, image)
    assert read_pfm(output).shape == (32, 32)
    assert read_ppm(tmp_path / 'pred' / 'depth_vis.ppm').shape == (3, 32, 32)


def test_eval_ground_truth_predictions(runner, config_file, tmp_path):
    """Test that scoring ground-truth files as predictions gives a perfect row."""
    _invoke(runner, 'gen-data', '--config', config_file, '--out', tmp_path)
    result = _invoke(
        runner,
        'eval',
        '--manifest',
        tmp_path / 'val.manifest',
        '--predictions',
        tmp_path / 'val',
        '--label',
        'gt',
        '--out',
        tmp_path / 'reports',
    )
    row = next(line for line in result.output.splitlines() if line.startswith('gt'))
    assert row.count('0.0000') == 5
    assert row.count('1.0000') == 3
    assert (tmp_path / 'reports' / 'eval_gt.csv').is_file()


def test_eval_requires_exactly_one_source(runner, config_file, tmp_path):
    """Test the usage error for neither or both of --checkpoint and --predictions."""
    _invoke(runner, 'gen-data', '--config', config_file, '--out', tmp_path)
    result = runner.invoke(cli, ['eval', '--manifest', str(tmp_path / 'val.manifest')])
    assert result.exit_code == 2
    assert 'exactly one' in result.output


def test_bad_config_reports_line(runner, tmp_path):
    """Test that a malformed config exits 1 naming the line."""
    path = tmp_path / 'bad.cfg'
    path.write_text('seed = 1\nimage_size: 32\n')
    result = runner.invoke(cli, ['gen-data', '--config', str(path), '--out', str(tmp_path)])
    assert result.exit_code == 1
    assert 'Error:' in result.output
    assert 'bad.cfg:2' in result.output


def test_corrupt_checkpoint(runner, config_file, tmp_path):
    """Test that an unreadable checkpoint is a one-line error."""
    _invoke(runner, 'gen-data', '--config', config_file, '--out', tmp_path)
    bogus = tmp_path / 'bogus.ckpt'
    bogus.write_bytes(b'not a checkpoint')
    result = runner.invoke(
        cli, ['eval', '--manifest', str(tmp_path / 'val.manifest'), '--checkpoint', str(bogus)]
    )
    assert result.exit_code == 1
    assert 'magic' in result.output


def test_unknown_command(runner):
    """Test click's usage error for an unknown command."""
    result = runner.invoke(cli, ['fly'])
    assert result.exit_code == 2
