"""Depth evaluation statistics.

Relative errors divide by ``d_star``, the prediction. Most benchmarks divide by
ground truth, so abs_rel and sq_rel here are not comparable with those numbers.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, fields
from typing import Sequence

import numpy as np

from core import ops
from core.tensor import ShapeError, Tensor, no_grad
from losses.objectives import l_depth

logger = logging.getLogger(__name__)

THRESHOLD = 1.25


@dataclass(frozen=True)
class MetricsReport:
    abs_rel: float
    sq_rel: float
    rmse: float
    rmse_log: float
    avg_log10: float
    delta1: float
    delta2: float
    delta3: float

    def as_dict(self) -> dict[str, float]:
        return asdict(self)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    @classmethod
    def mean(cls, reports: Sequence['MetricsReport']) -> 'MetricsReport':
        """Aggregate by averaging per-sample statistics."""
        if not reports:
            raise ValueError('cannot average an empty list of reports')
        return cls(**{name: float(np.mean([getattr(r, name) for r in reports])) for name in cls.field_names()})


def _as_array(x: Tensor | np.ndarray) -> np.ndarray:
    return x.values if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def _rank4(arr: np.ndarray) -> np.ndarray:
    """View a 1-D, 2-D (H, W) or 3-D (C, H, W) map as NCHW."""
    if arr.ndim > 4:
        raise ShapeError(f'expected at most 4 dimensions, got {arr.ndim}')
    return arr.reshape((1,) * (4 - arr.ndim) + arr.shape)


def compute_metrics(d_star: Tensor | np.ndarray, d: Tensor | np.ndarray) -> MetricsReport:
    """Score prediction ``d_star`` against ground truth ``d`` over all pixels."""
    pred, gt = _as_array(d_star), _as_array(d)
    if pred.shape != gt.shape:
        raise ShapeError(f'prediction shape {pred.shape} != ground truth shape {gt.shape}')

    ratio = np.maximum(pred / gt, gt / pred)
    diff = gt - pred
    with no_grad():
        rmse_log = l_depth(Tensor(_rank4(pred), copy=False), Tensor(_rank4(gt), copy=False)).item()
    return MetricsReport(
        abs_rel=float(np.mean(np.abs(diff) / pred)),
        sq_rel=float(np.mean(diff**2 / pred)),
        rmse=float(np.sqrt(np.mean(diff**2))),
        rmse_log=rmse_log,
        avg_log10=float(np.mean(np.abs(np.log10(gt) - np.log10(pred)))),
        delta1=float(np.mean(ratio < THRESHOLD)),
        delta2=float(np.mean(ratio < THRESHOLD**2)),
        delta3=float(np.mean(ratio < THRESHOLD**3)),
    )


def upsample_prediction(d_star_lowres: Tensor, height: int, width: int) -> Tensor:
    """Nearest-neighbour enlargement of a low-resolution prediction to ``height`` x ``width``."""
    _, _, h, w = d_star_lowres.dims
    if height % h or width % w or height // h != width // w:
        raise ShapeError(f'cannot upsample {h}x{w} to {height}x{width} by one integral factor')
    with no_grad():
        return ops.upsample(d_star_lowres, height // h)
