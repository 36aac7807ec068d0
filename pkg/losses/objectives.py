"""Training objectives and the weighted, step-scheduled stage-2 total."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

from core import ops
from core.tensor import ShapeError, Tensor

logger = logging.getLogger(__name__)

DEPTH_MIN = 1e-3
DEPTH_MAX = 10.0

DEFAULT_GRADIENT_ON_STEP = 4000
DEFAULT_NORMAL_ON_STEP = 8000


@dataclass(frozen=True)
class LossWeights:
    lambda_depth: float = 1.0
    lambda_cmrc: float = 2.0
    lambda_gradient: float = 1.0
    lambda_normal: float = 1.0

    def __post_init__(self) -> None:
        for name in ('lambda_depth', 'lambda_cmrc', 'lambda_gradient', 'lambda_normal'):
            if getattr(self, name) < 0:
                raise ValueError(f'{name} must be non-negative, got {getattr(self, name)}')


@dataclass(frozen=True)
class LossSchedule:
    """Steps from which the gradient and surface-normal terms contribute."""

    gradient_on_step: int = DEFAULT_GRADIENT_ON_STEP
    normal_on_step: int = DEFAULT_NORMAL_ON_STEP

    def __post_init__(self) -> None:
        if self.gradient_on_step < 0 or self.normal_on_step < 0:
            raise ValueError('schedule steps must be non-negative')
        if self.gradient_on_step > self.normal_on_step:
            raise ValueError(
                f'gradient_on_step ({self.gradient_on_step}) must not exceed '
                f'normal_on_step ({self.normal_on_step})'
            )

    @classmethod
    def scaled(cls, steps: int) -> 'LossSchedule':
        """Gradient term from the halfway step, normal term from three quarters of ``steps``."""
        return cls(gradient_on_step=steps // 2, normal_on_step=(3 * steps) // 4)

    def gradient_active(self, step: int) -> bool:
        return step >= self.gradient_on_step

    def normal_active(self, step: int) -> bool:
        return step >= self.normal_on_step


@dataclass
class LossParts:
    """Component losses of one stage-2 step; ``None`` means not evaluated."""

    depth: Tensor
    cmrc: Tensor | None = None
    gradient: Tensor | None = None
    normal: Tensor | None = None


def _clamped_log(d: Tensor) -> Tensor:
    return ops.log(ops.clamp(d, DEPTH_MIN, DEPTH_MAX))


def _check_pair(name: str, a: Tensor, b: Tensor) -> None:
    if a.dims != b.dims:
        raise ShapeError(f'{name}: shapes {a.shape} and {b.shape} differ')


def l_depth(d_star: Tensor, d: Tensor) -> Tensor:
    """Root mean squared log error between prediction ``d_star`` and ground truth ``d``."""
    _check_pair('l_depth', d_star, d)
    diff = ops.sub(_clamped_log(d_star), _clamped_log(d))
    return ops.sqrt(ops.mean_all(ops.square(diff)))


def l_ae(d_hat: Tensor, d: Tensor) -> Tensor:
    """Reconstruction objective of the depth auto-encoder; same form as :func:`l_depth`."""
    return l_depth(d_hat, d)


def l_cmrc(z_id: Sequence[Tensor], z_d: Sequence[Tensor]) -> Tensor:
    """Sum over pyramid levels of the mean absolute difference to the (detached) depth features."""
    if len(z_id) != len(z_d):
        raise ShapeError(f'l_cmrc: {len(z_id)} transferred levels vs {len(z_d)} target levels')
    if not z_id:
        raise ShapeError('l_cmrc: no feature levels given')
    total: Tensor | None = None
    for level, (source, target) in enumerate(zip(z_id, z_d)):
        if source.dims != target.dims:
            raise ShapeError(f'l_cmrc: level {level} shapes {source.shape} and {target.shape} differ')
        term = ops.mean_all(ops.absolute(ops.sub(source, target.detach())))
        total = term if total is None else ops.add(total, term)
    return total  # type: ignore[return-value]


def l_gradient(d_star: Tensor, d: Tensor) -> Tensor:
    """Mean over pixels of the L1 distance between Sobel gradient vectors."""
    _check_pair('l_gradient', d_star, d)
    gx_star, gy_star = ops.sobel_gradients(d_star)
    gx, gy = ops.sobel_gradients(d)
    per_pixel = ops.add(ops.absolute(ops.sub(gx_star, gx)), ops.absolute(ops.sub(gy_star, gy)))
    return ops.mean_all(per_pixel)


def l_normal(d_star: Tensor, d: Tensor) -> Tensor:
    """Mean cosine dissimilarity of the surface normals ``(-gx, -gy, 1)``."""
    _check_pair('l_normal', d_star, d)
    gx_star, gy_star = ops.sobel_gradients(d_star)
    gx, gy = ops.sobel_gradients(d)
    # <(-a, -b, 1), (-c, -e, 1)> = ac + be + 1
    dot = ops.add_scalar(ops.add(ops.hadamard(gx_star, gx), ops.hadamard(gy_star, gy)), 1.0)
    norm_star = ops.sqrt(ops.add_scalar(ops.add(ops.square(gx_star), ops.square(gy_star)), 1.0))
    norm = ops.sqrt(ops.add_scalar(ops.add(ops.square(gx), ops.square(gy)), 1.0))
    cosine = ops.div(dot, ops.hadamard(norm_star, norm))
    return ops.add_scalar(ops.scale(ops.mean_all(cosine), -1.0), 1.0)


def total_stage2(parts: LossParts, weights: LossWeights, schedule: LossSchedule, step: int) -> Tensor:
    """Weighted stage-2 objective.

    Terms that are missing, inactive at ``step`` or carry a zero weight are
    left out of the sum entirely, so the total is bitwise equal to a run
    without them.
    """
    if step < 0:
        raise ValueError(f'step must be non-negative, got {step}')
    total = ops.scale(parts.depth, weights.lambda_depth)
    terms = [
        (parts.cmrc, weights.lambda_cmrc, True),
        (parts.gradient, weights.lambda_gradient, schedule.gradient_active(step)),
        (parts.normal, weights.lambda_normal, schedule.normal_active(step)),
    ]
    for value, lam, active in terms:
        if value is None or not active or lam == 0.0:
            continue
        total = ops.add(total, ops.scale(value, lam))
    return total
