"""Tests for PPM/PFM encoding."""

import numpy as np
import pytest

from core.tensor import Tensor
from data.formats import (
    FormatError,
    decode_pfm,
    decode_ppm,
    encode_pfm,
    encode_ppm,
    read_ppm,
    read_sample,
    write_depth_visualization,
    write_pfm,
    write_ppm,
    write_sample,
)
from data.synth import SceneFamily, generate_scene


def test_pfm_constant_is_exact():
    """Test that a representable constant survives bit for bit."""
    depth = np.full((1, 1, 4, 6), 2.5)
    decoded = decode_pfm(encode_pfm(depth))
    assert decoded.shape == (4, 6)
    np.testing.assert_array_equal(decoded, 2.5)


def test_pfm_stores_bottom_row_first():
    """Test the PFM row order and the little-endian scale."""
    data = encode_pfm(np.array([[1.0, 2.0], [3.0, 4.0]]))
    assert data.startswith(b'Pf\n2 2\n-1.0\n')
    payload = np.frombuffer(data[len(b'Pf\n2 2\n-1.0\n') :], dtype='<f4')
    np.testing.assert_array_equal(payload, [3.0, 4.0, 1.0, 2.0])
    np.testing.assert_array_equal(decode_pfm(data), [[1.0, 2.0], [3.0, 4.0]])


def test_pfm_big_endian_and_comments():
    """Test a positive scale and a commented header."""
    body = np.array([[7.0]], dtype='>f4').tobytes()
    data = b'Pf\n# written elsewhere\n1 1\n1.0\n' + body
    np.testing.assert_array_equal(decode_pfm(data), [[7.0]])


def test_ppm_quantization():
    """Test that 0.5 maps to byte 128."""
    rgb = np.full((3, 2, 2), 0.5)
    data = encode_ppm(rgb)
    assert data.startswith(b'P6\n2 2\n255\n')
    assert data[-1] == 128
    np.testing.assert_array_equal(decode_ppm(data), 128 / 255)


def test_ppm_clips_out_of_range():
    """Test clipping before quantization."""
    rgb = np.stack([np.full((1, 1), -0.5), np.full((1, 1), 1.5), np.zeros((1, 1))])
    decoded = decode_ppm(encode_ppm(rgb))
    np.testing.assert_array_equal(decoded[:, 0, 0], [0.0, 1.0, 0.0])


@pytest.mark.parametrize(
    'data, message',
    [
        (b'P5\n1 1\n255\n\x00', 'wrong magic for PPM'),
        (b'P6\n1 x\n255\n\x00\x00\x00', 'malformed PPM header'),
        (b'P6\n1 1\n', 'malformed PPM header'),
        (b'P6\n2 2\n255\n\x00\x00\x00', 'truncated PPM payload'),
    ],
)
def test_ppm_errors(data, message):
    """Test distinct errors for each kind of bad PPM."""
    with pytest.raises(FormatError, match=message):
        decode_ppm(data)


@pytest.mark.parametrize(
    'data, message',
    [
        (b'PF\n1 1\n-1.0\n\x00\x00\x00\x00', 'wrong magic for PFM'),
        (b'Pf\n1 1\nabc\n\x00\x00\x00\x00', 'malformed PFM header'),
        (b'Pf\n1 1\n0.0\n\x00\x00\x00\x00', 'malformed PFM header'),
        (b'Pf\n2 1\n-1.0\n\x00\x00\x00\x00', 'truncated PFM payload'),
    ],
)
def test_pfm_errors(data, message):
    """Test distinct errors for each kind of bad PFM."""
    with pytest.raises(FormatError, match=message):
        decode_pfm(data)


def test_channel_count_checked():
    """Test that a depth map cannot be written as an image."""
    with pytest.raises(ValueError):
        encode_ppm(np.ones((1, 2, 2)))


def test_depth_visualization_stretches_range(tmp_path):
    """Test that the nearest pixel is black and the farthest white."""
    path = tmp_path / 'vis.ppm'
    write_depth_visualization(path, Tensor(np.array([[[[1.0, 3.0], [2.0, 5.0]]]])))
    grey = read_ppm(path)
    assert grey[0, 0, 0] == 0.0
    assert grey[0, 1, 1] == 1.0
    np.testing.assert_array_equal(grey[0], grey[1])
    write_depth_visualization(path, np.full((2, 2), 4.0))
    np.testing.assert_array_equal(read_ppm(path), 0.0)


def test_sample_files(tmp_path):
    """Test writing and reading one rendered sample."""
    sample = generate_scene(SceneFamily.STAIRS, 2, 32, 32)
    rgb_path, depth_path = tmp_path / 'a.ppm', tmp_path / 'a.pfm'
    write_sample(rgb_path, depth_path, sample)
    loaded = read_sample(rgb_path, depth_path, 'stairs', 2)
    assert loaded.family is SceneFamily.STAIRS and loaded.seed == 2
    np.testing.assert_allclose(loaded.depth.values, sample.depth.values, rtol=1e-6)
    assert np.max(np.abs(loaded.rgb.values - sample.rgb.values)) <= 0.5 / 255 + 1e-12

    write_pfm(depth_path, np.ones((2, 2)))
    write_ppm(rgb_path, np.ones((3, 4, 4)))
    with pytest.raises(FormatError):
        read_sample(rgb_path, depth_path, 'stairs', 2)
