"""Assembled networks: the stage-1 depth auto-encoder and the stage-2 predictor.

The predictor's wiring depends on the ablation variant:

* ``pure``  image encoder + symmetric decoder on the deepest feature
* ``fpn``   image encoder + pyramid decoder
* ``align`` as ``fpn``; training adds the feature alignment loss on ``Z_i``
* ``som``   image encoder + per-level memory modules + pyramid decoder
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from core.tensor import Tensor
from models.backbone import (
    PYRAMID_STRIDES,
    DecoderVariant,
    DenseEncoder,
    EncoderConfig,
    FPNDecoder,
    PureDecoder,
    PyramidFeatures,
    build_decoder,
    check_divisible,
    encode,
    fpn_decode,
    predict_depth,
    pure_decode,
)
from models.module import Module
from models.som import AttentionWeights, SOMConfig, SOMStack, attention_scaled_update

logger = logging.getLogger(__name__)

AUTOENCODER_PREFIX = 'autoencoder.'
PREDICTOR_PREFIX = 'predictor.'
DEPTH_ENCODER_PREFIX = 'depth_encoder.'


class ModelVariant(str, Enum):
    PURE = 'pure'
    FPN = 'fpn'
    ALIGN = 'align'
    SOM = 'som'

    @property
    def decoder(self) -> DecoderVariant:
        return DecoderVariant.PURE if self is ModelVariant.PURE else DecoderVariant.FPN

    @property
    def uses_alignment(self) -> bool:
        return self in (ModelVariant.ALIGN, ModelVariant.SOM)

    @property
    def uses_memory(self) -> bool:
        return self is ModelVariant.SOM


def level_sizes(height: int, width: int) -> tuple[tuple[int, int], ...]:
    """Spatial sizes of the four pyramid levels for an input of ``height`` x ``width``."""
    check_divisible(height, width)
    return tuple((height // s, width // s) for s in PYRAMID_STRIDES)


class DepthAutoEncoder(Module):
    """``E_d`` + pyramid decoder ``D_d``: reconstructs depth at 1/4 resolution."""

    def __init__(self, config: EncoderConfig, rng: np.random.Generator):
        self.encoder = DenseEncoder(1, config, rng)
        self.decoder = FPNDecoder(config, rng)

    def __call__(self, depth: Tensor) -> tuple[Tensor, PyramidFeatures]:
        features = encode(self.encoder, depth)
        return predict_depth(fpn_decode(self.decoder, features)), features


@dataclass
class PredictorOutput:
    depth: Tensor
    features: PyramidFeatures
    transferred: list[Tensor] | None = None
    attention: list[AttentionWeights] = field(default_factory=list)

    @property
    def aligned_features(self) -> list[Tensor]:
        """Features compared against the depth encoder's: ``Z_id`` when memory is used, else ``Z_i``."""
        if self.transferred is not None:
            return list(self.transferred)
        return list(self.features.levels)


class DepthPredictor(Module):
    """Stage-2 network: ``E_i``, optional memory stack, and the depth predictor ``P_d``."""

    def __init__(
        self,
        variant: ModelVariant | str,
        config: EncoderConfig,
        som_config: SOMConfig,
        image_size: tuple[int, int],
        rng: np.random.Generator,
    ):
        self.variant = ModelVariant(variant)
        self.encoder = DenseEncoder(3, config, rng)
        self.memory = (
            SOMStack(tuple(config.stage_channels), level_sizes(*image_size), som_config, rng)
            if self.variant.uses_memory
            else None
        )
        self.decoder: FPNDecoder | PureDecoder = build_decoder(self.variant.decoder, config, rng)

    def __call__(self, image: Tensor) -> PredictorOutput:
        features = encode(self.encoder, image)
        transferred, attention = None, []
        decode_from = features
        if self.memory is not None:
            transferred, attention = self.memory(features.levels)
            decode_from = PyramidFeatures.from_levels(transferred)
        if isinstance(self.decoder, FPNDecoder):
            log_depth = fpn_decode(self.decoder, decode_from)
        else:
            log_depth = pure_decode(self.decoder, decode_from.f4)
        return PredictorOutput(predict_depth(log_depth), features, transferred, attention)

    def memory_step_scales(
        self, attention: list[AttentionWeights], prefix: str = PREDICTOR_PREFIX
    ) -> dict[str, float]:
        """Optimizer step scales for every memory slot parameter, from the latest read."""
        if self.memory is None:
            return {}
        scales: dict[str, float] = {}
        for k, (som, alpha) in enumerate(zip(self.memory.levels, attention)):
            scales.update(attention_scaled_update(som.bank, alpha, prefix=f'{prefix}memory.levels.{k}.bank.'))
        return scales
