"""Encoder, decoders, memory modules and the assembled networks."""

from .backbone import (
    DecoderVariant,
    DenseEncoder,
    EncoderConfig,
    FPNDecoder,
    PureDecoder,
    PyramidFeatures,
    build_decoder,
    encode,
    fpn_decode,
    predict_depth,
    pure_decode,
)
from .module import Conv2d, Module
from .network import DepthAutoEncoder, DepthPredictor, ModelVariant, PredictorOutput, level_sizes
from .som import (
    SOM,
    AttentionWeights,
    MemoryBank,
    ReadController,
    SOMConfig,
    SOMStack,
    StaleAttentionError,
    attention_scaled_update,
    convlstm_step,
    query_memory,
    read,
    transfer,
)

__all__ = [
    'AttentionWeights',
    'Conv2d',
    'DecoderVariant',
    'DenseEncoder',
    'DepthAutoEncoder',
    'DepthPredictor',
    'EncoderConfig',
    'FPNDecoder',
    'MemoryBank',
    'ModelVariant',
    'Module',
    'PredictorOutput',
    'PureDecoder',
    'PyramidFeatures',
    'ReadController',
    'SOM',
    'SOMConfig',
    'SOMStack',
    'StaleAttentionError',
    'attention_scaled_update',
    'build_decoder',
    'convlstm_step',
    'encode',
    'fpn_decode',
    'level_sizes',
    'predict_depth',
    'pure_decode',
    'query_memory',
    'read',
    'transfer',
]
