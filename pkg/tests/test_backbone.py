"""Tests for the dense encoder, both decoders and the assembled networks."""

import math

import numpy as np
import pytest

from core.tensor import ShapeError, Tensor
from models.backbone import (
    LOG_DEPTH_LIMIT,
    DenseEncoder,
    EncoderConfig,
    FPNDecoder,
    PredictionHead,
    PureDecoder,
    PyramidFeatures,
    check_divisible,
    encode,
    fpn_decode,
    predict_depth,
    pure_decode,
)
from models.module import Conv2d
from models.network import DepthAutoEncoder, DepthPredictor, ModelVariant, level_sizes
from models.som import SOMConfig


def test_encoder_pyramid_shapes_default_widths(rng):
    """Test the four pyramid levels of a 64x64 image."""
    encoder = DenseEncoder(3, EncoderConfig(), rng)
    features = encode(encoder, Tensor(rng.uniform(size=(1, 3, 64, 64))))
    assert [f.dims for f in features.levels] == [
        (1, 16, 16, 16),
        (1, 32, 8, 8),
        (1, 64, 4, 4),
        (1, 128, 2, 2),
    ]


def test_depth_encoder_shapes(rng, tiny_encoder_config):
    """Test the depth encoder on a 32x32 map."""
    encoder = DenseEncoder(1, tiny_encoder_config, rng)
    features = encoder(Tensor.ones((2, 1, 32, 32)))
    assert [f.dims[2:] for f in features.levels] == [(8, 8), (4, 4), (2, 2), (1, 1)]
    assert all(f.dims[0] == 2 for f in features.levels)


def test_encoder_rejects_indivisible_and_wrong_channels(rng, tiny_encoder_config):
    """Test input validation."""
    encoder = DenseEncoder(3, tiny_encoder_config, rng)
    with pytest.raises(ShapeError, match='divisible by 32'):
        encode(encoder, Tensor.zeros((1, 3, 48, 64)))
    with pytest.raises(ShapeError, match='dimension 1'):
        encode(encoder, Tensor.zeros((1, 1, 32, 32)))
    with pytest.raises(ShapeError):
        check_divisible(33, 64)


def test_encoder_config_validation():
    """Test stage width rules."""
    with pytest.raises(ValueError):
        EncoderConfig(stage_channels=(8, 4, 8, 8))
    with pytest.raises(ValueError):
        EncoderConfig(stage_channels=(8, 8, 8))
    with pytest.raises(ValueError):
        EncoderConfig(convs_per_stage=0)


def test_decoders_predict_at_quarter_resolution(rng, tiny_encoder_config):
    """Test that both decoders return one channel at 1/4 resolution."""
    features = DenseEncoder(3, tiny_encoder_config, rng)(Tensor(rng.uniform(size=(1, 3, 64, 64))))
    assert fpn_decode(FPNDecoder(tiny_encoder_config, rng), features).dims == (1, 1, 16, 16)
    assert pure_decode(PureDecoder(tiny_encoder_config, rng), features.f4).dims == (1, 1, 16, 16)


@pytest.mark.parametrize('height', [32, 64, 96, 128])
@pytest.mark.parametrize('width', [32, 64, 96, 128])
def test_pyramid_and_decoder_shapes_over_sizes(tiny_encoder_config, height, width):
    """Test the shape law for every supported input size."""
    rng = np.random.default_rng(height * 1000 + width)
    image = Tensor(rng.uniform(size=(1, 3, height, width)))
    features = encode(DenseEncoder(3, tiny_encoder_config, rng), image)
    assert [f.dims[2:] for f in features.levels] == [
        (height // s, width // s) for s in (4, 8, 16, 32)
    ]
    assert [f.dims[2:] for f in features.levels] == list(level_sizes(height, width))
    quarter = (1, 1, height // 4, width // 4)
    assert fpn_decode(FPNDecoder(tiny_encoder_config, rng), features).dims == quarter
    assert pure_decode(PureDecoder(tiny_encoder_config, rng), features.f4).dims == quarter

    _, depth_features = DepthAutoEncoder(tiny_encoder_config, rng)(
        Tensor.ones((1, 1, height, width))
    )
    assert [f.dims for f in depth_features.levels] == [f.dims for f in features.levels]


def test_pyramid_features_requires_four_levels():
    """Test level count validation."""
    with pytest.raises(ShapeError):
        PyramidFeatures.from_levels([Tensor.zeros((1, 1, 1, 1))] * 3)


def test_head_on_zero_features_returns_bias(rng):
    """Test the affine degenerate case of the prediction head."""
    head = PredictionHead(4, rng)
    head.out.bias.values[...] = 0.3
    log_depth = head(Tensor.zeros((1, 4, 8, 8)))
    np.testing.assert_allclose(log_depth.values, 0.3)
    np.testing.assert_allclose(predict_depth(log_depth).values, math.exp(0.3))


def test_predict_depth_exponentiates():
    """Test the log-depth to depth mapping."""
    assert predict_depth(Tensor.scalar(0.0)).item() == 1.0
    assert predict_depth(Tensor.scalar(math.log(10.0))).item() == pytest.approx(10.0, rel=1e-15)


def test_predict_depth_finite_on_extreme_logits():
    """Test that huge log-depths neither overflow nor underflow."""
    depth = predict_depth(Tensor(np.array([-1e4, -800.0, 800.0, 1e4]).reshape(1, 1, 2, 2)))
    assert np.isfinite(depth.values).all()
    assert (depth.values > 0).all()
    assert depth.values[0, 0, 1, 1] == pytest.approx(math.exp(LOG_DEPTH_LIMIT), rel=1e-14)


def test_conv_layer_parameters(rng):
    """Test layer parameter naming and shapes."""
    conv = Conv2d(2, 3, 3, rng, stride=2)
    names = dict(conv.named_parameters('layer.'))
    assert set(names) == {'layer.weight', 'layer.bias'}
    assert names['layer.weight'].dims == (3, 2, 3, 3)
    assert not names['layer.bias'].values.any()


def test_identical_seed_gives_identical_output(tiny_encoder_config):
    """Test determinism of construction and forward pass."""
    image = Tensor(np.random.default_rng(0).uniform(size=(1, 3, 32, 32)))
    outputs = []
    for _ in range(2):
        model = DepthPredictor('fpn', tiny_encoder_config, SOMConfig(), (32, 32), np.random.default_rng(5))
        outputs.append(model(image).depth.values)
    np.testing.assert_array_equal(outputs[0], outputs[1])


@pytest.mark.parametrize('variant', list(ModelVariant))
def test_predictor_variants(rng, tiny_encoder_config, variant):
    """Test the wiring of every ablation variant."""
    model = DepthPredictor(variant, tiny_encoder_config, SOMConfig(memory_size=2), (32, 32), rng)
    output = model(Tensor(rng.uniform(size=(2, 3, 32, 32))))
    assert output.depth.dims == (2, 1, 8, 8)
    assert (output.depth.values > 0).all()
    if variant is ModelVariant.SOM:
        assert model.memory is not None
        assert len(output.attention) == 4
        assert [z.dims for z in output.aligned_features] == [f.dims for f in output.features.levels]
    else:
        assert model.memory is None
        assert output.attention == []
        assert output.aligned_features == list(output.features.levels)
    assert isinstance(model.decoder, PureDecoder if variant is ModelVariant.PURE else FPNDecoder)


def test_autoencoder_reconstructs_at_quarter_resolution(rng, tiny_encoder_config):
    """Test the stage-1 network."""
    model = DepthAutoEncoder(tiny_encoder_config, rng)
    depth, features = model(Tensor.ones((1, 1, 32, 32)))
    assert depth.dims == (1, 1, 8, 8)
    assert features.f4.dims == (1, 2, 1, 1)


def test_state_dict_round_trip_and_mismatch(rng, tiny_encoder_config):
    """Test parameter export, import and the diagnostics for stale state."""
    model = DepthAutoEncoder(tiny_encoder_config, rng)
    state = model.state_dict('autoencoder.')
    other = DepthAutoEncoder(tiny_encoder_config, np.random.default_rng(99))
    other.load_state_dict(state, prefix='autoencoder.')
    for name, p in other.named_parameters('autoencoder.'):
        np.testing.assert_array_equal(p.values, state[name])

    missing = dict(state)
    missing.pop('autoencoder.encoder.stages.0.transition.weight')
    with pytest.raises(KeyError):
        other.load_state_dict(missing, prefix='autoencoder.')
    wide = DepthAutoEncoder(EncoderConfig(stage_channels=(4, 4, 4, 4), convs_per_stage=1), rng)
    with pytest.raises(ShapeError):
        wide.load_state_dict(state, prefix='autoencoder.')


def test_level_sizes():
    """Test pyramid size arithmetic."""
    assert level_sizes(64, 64) == ((16, 16), (8, 8), (4, 4), (2, 2))
    with pytest.raises(ShapeError):
        level_sizes(40, 64)
