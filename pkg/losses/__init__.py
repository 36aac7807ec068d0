"""Depth, alignment, gradient and surface-normal objectives."""

from .objectives import (
    DEPTH_MAX,
    DEPTH_MIN,
    LossParts,
    LossSchedule,
    LossWeights,
    l_ae,
    l_cmrc,
    l_depth,
    l_gradient,
    l_normal,
    total_stage2,
)

__all__ = [
    'DEPTH_MAX',
    'DEPTH_MIN',
    'LossParts',
    'LossSchedule',
    'LossWeights',
    'l_ae',
    'l_cmrc',
    'l_depth',
    'l_gradient',
    'l_normal',
    'total_stage2',
]
