"""Encoder / decoder skeleton: a four-scale dense encoder, the pyramid
decoder, the plain symmetric decoder, and the depth head.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from core import ops
from core.tensor import ShapeError, Tensor
from models.module import Conv2d, Module

logger = logging.getLogger(__name__)

PYRAMID_STRIDES = (4, 8, 16, 32)
HEAD_WIDTH = 32
# exp stays finite and above zero inside this range
LOG_DEPTH_LIMIT = 50.0


class DecoderVariant(str, Enum):
    FPN = 'fpn'
    PURE = 'pure'


@dataclass(frozen=True)
class EncoderConfig:
    """Channel widths of the four stages and the dense convolutions per stage."""

    stage_channels: tuple[int, int, int, int] = (16, 32, 64, 128)
    convs_per_stage: int = 2

    def __post_init__(self) -> None:
        if len(self.stage_channels) != 4:
            raise ValueError(f'stage_channels needs exactly 4 entries, got {len(self.stage_channels)}')
        if any(c < 1 for c in self.stage_channels):
            raise ValueError(f'stage_channels must be positive, got {self.stage_channels}')
        if any(b < a for a, b in zip(self.stage_channels, self.stage_channels[1:])):
            raise ValueError(f'stage_channels must be non-decreasing, got {self.stage_channels}')
        if self.convs_per_stage < 1:
            raise ValueError(f'convs_per_stage must be >= 1, got {self.convs_per_stage}')


@dataclass(frozen=True)
class PyramidFeatures:
    """Feature maps at 1/4, 1/8, 1/16 and 1/32 of the input resolution."""

    f1: Tensor
    f2: Tensor
    f3: Tensor
    f4: Tensor

    @property
    def levels(self) -> tuple[Tensor, Tensor, Tensor, Tensor]:
        return (self.f1, self.f2, self.f3, self.f4)

    @classmethod
    def from_levels(cls, levels: list[Tensor] | tuple[Tensor, ...]) -> 'PyramidFeatures':
        if len(levels) != 4:
            raise ShapeError(f'expected 4 pyramid levels, got {len(levels)}')
        return cls(*levels)


def check_divisible(height: int, width: int) -> None:
    if height % 32 or width % 32:
        raise ShapeError(f'input {height}x{width} must have height and width divisible by 32')


class DenseStage(Module):
    """A strided transition followed by densely connected 3x3 convolutions.

    Convolution j sees the channel concatenation of the transition output and
    every earlier convolution output in the stage; the last one is the
    stage output.
    """

    def __init__(self, in_channels: int, channels: int, convs: int, rng: np.random.Generator, stem: bool = False):
        self.stem = Conv2d(in_channels, channels, 3, rng, stride=2) if stem else None
        self.transition = Conv2d(channels if stem else in_channels, channels, 3, rng, stride=2)
        self.dense = [Conv2d(channels * (j + 1), channels, 3, rng) for j in range(convs)]

    def __call__(self, x: Tensor) -> Tensor:
        if self.stem is not None:
            x = ops.elu(self.stem(x))
        outputs = [ops.elu(self.transition(x))]
        for conv in self.dense:
            joined = outputs[0] if len(outputs) == 1 else ops.concat_channels(outputs)
            outputs.append(ops.elu(conv(joined)))
        return outputs[-1]


class DenseEncoder(Module):
    """Four-stage encoder; the first stage reaches 1/4 resolution with two strided convolutions."""

    def __init__(self, in_channels: int, config: EncoderConfig, rng: np.random.Generator):
        self.config = config
        self.in_channels = in_channels
        widths = (in_channels,) + tuple(config.stage_channels)
        self.stages = [
            DenseStage(widths[i], widths[i + 1], config.convs_per_stage, rng, stem=(i == 0))
            for i in range(4)
        ]

    def __call__(self, image: Tensor) -> PyramidFeatures:
        return encode(self, image)


def encode(encoder: DenseEncoder, image: Tensor) -> PyramidFeatures:
    """Extract the four pyramid features of ``image``."""
    _, channels, height, width = image.dims
    if channels != encoder.in_channels:
        raise ShapeError(f'encoder expects {encoder.in_channels} input channels, got {channels} (dimension 1)')
    check_divisible(height, width)
    levels = []
    x = image
    for stage in encoder.stages:
        x = stage(x)
        levels.append(x)
    return PyramidFeatures.from_levels(levels)


class PredictionHead(Module):
    """Two 3x3 convolutions emitting one channel of log-depth."""

    def __init__(self, in_channels: int, rng: np.random.Generator, width: int = HEAD_WIDTH):
        self.hidden = Conv2d(in_channels, width, 3, rng)
        self.out = Conv2d(width, 1, 3, rng)

    def __call__(self, x: Tensor) -> Tensor:
        return self.out(ops.elu(self.hidden(x)))


class FPNDecoder(Module):
    """Top-down pyramid fusion followed by concatenation at 1/4 resolution."""

    def __init__(self, config: EncoderConfig, rng: np.random.Generator):
        c = config.stage_channels
        # lateral[i] maps level i+1's width to level i's width
        self.lateral = [Conv2d(c[i + 1], c[i], 1, rng) for i in range(3)]
        self.head = PredictionHead(sum(c), rng)

    def __call__(self, features: PyramidFeatures) -> Tensor:
        return fpn_decode(self, features)


def fpn_decode(decoder: FPNDecoder, features: PyramidFeatures) -> Tensor:
    """Fuse the pyramid top-down and predict log-depth at 1/4 resolution."""
    levels = features.levels
    fused = [levels[3]]
    for i in (2, 1, 0):
        top = decoder.lateral[i](ops.upsample2x(fused[0]))
        fused.insert(0, ops.add(levels[i], top))
    gathered = [fused[0]] + [ops.upsample(fused[i], 2**i) for i in (1, 2, 3)]
    return decoder.head(ops.concat_channels(gathered))


class PureDecoder(Module):
    """Symmetric decoder: three upsample + conv stages from the deepest feature only."""

    def __init__(self, config: EncoderConfig, rng: np.random.Generator):
        c = config.stage_channels
        self.stages = [Conv2d(c[i + 1], c[i], 3, rng) for i in (2, 1, 0)]
        self.head = PredictionHead(c[0], rng)

    def __call__(self, features: PyramidFeatures) -> Tensor:
        return pure_decode(self, features.f4)


def pure_decode(decoder: PureDecoder, deepest: Tensor) -> Tensor:
    x = deepest
    for conv in decoder.stages:
        x = ops.elu(conv(ops.upsample2x(x)))
    return decoder.head(x)


def build_decoder(
    variant: DecoderVariant | str, config: EncoderConfig, rng: np.random.Generator
) -> FPNDecoder | PureDecoder:
    variant = DecoderVariant(variant)
    if variant is DecoderVariant.FPN:
        return FPNDecoder(config, rng)
    return PureDecoder(config, rng)


def predict_depth(log_depth: Tensor) -> Tensor:
    """Exponentiate log-depth; finite and strictly positive for any finite input."""
    return ops.exp(ops.clamp(log_depth, -LOG_DEPTH_LIMIT, LOG_DEPTH_LIMIT))
