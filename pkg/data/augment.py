"""Training-time augmentation of RGB-D pairs.

Geometric transforms (crop, zoom, flip, rotation) move rgb and depth
through the same source-coordinate grid with ``scipy.ndimage``; rgb is
sampled bilinearly and depth by nearest neighbour. Colour jitter touches
rgb only and goes through ``matplotlib.colors`` for the hsv round trip.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from matplotlib import colors
from scipy import ndimage

from core.tensor import Tensor
from data.synth import SceneSample
from losses.objectives import DEPTH_MAX, DEPTH_MIN

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AugmentConfig:
    crop_frac_max: float = 0.10
    scale_range: tuple[float, float] = (0.75, 1.25)
    flip_prob: float = 0.5
    rotate_deg: tuple[float, float] = (-10.0, 10.0)
    brightness_delta: tuple[float, float] = (-10 / 255, 10 / 255)
    contrast_range: tuple[float, float] = (0.5, 2.0)
    sat_hue_delta: tuple[float, float] = (-20 / 255, 20 / 255)

    def __post_init__(self) -> None:
        if not 0.0 <= self.crop_frac_max < 1.0:
            raise ValueError(f'crop_frac_max must lie in [0, 1), got {self.crop_frac_max}')
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ValueError(f'flip_prob must lie in [0, 1], got {self.flip_prob}')
        for name in ('scale_range', 'rotate_deg', 'brightness_delta', 'contrast_range', 'sat_hue_delta'):
            low, high = getattr(self, name)
            if low > high:
                raise ValueError(f'{name} must be ordered (low <= high), got {(low, high)}')
        if self.scale_range[0] <= 0 or self.contrast_range[0] <= 0:
            raise ValueError('scale_range and contrast_range must be positive')


@dataclass(frozen=True)
class AugmentParams:
    """One draw of every augmentation decision."""

    crop: tuple[int, int, int, int]  # top, left, height, width
    scale: float = 1.0
    flip: bool = False
    angle_deg: float = 0.0
    brightness: float = 0.0
    contrast: float = 1.0
    saturation: float = 0.0
    hue: float = 0.0

    @classmethod
    def identity(cls, height: int, width: int) -> 'AugmentParams':
        return cls(crop=(0, 0, height, width))


def sample_params(config: AugmentConfig, height: int, width: int, rng: np.random.Generator) -> AugmentParams:
    """Draw a parameter set; the number of draws is fixed so streams stay aligned."""
    frac = rng.uniform(0.0, config.crop_frac_max)
    crop_h = max(1, int(round(height * (1.0 - frac))))
    crop_w = max(1, int(round(width * (1.0 - frac))))
    top = int(rng.integers(0, height - crop_h + 1))
    left = int(rng.integers(0, width - crop_w + 1))
    return AugmentParams(
        crop=(top, left, crop_h, crop_w),
        scale=float(rng.uniform(*config.scale_range)),
        flip=bool(rng.random() < config.flip_prob),
        angle_deg=float(rng.uniform(*config.rotate_deg)),
        brightness=float(rng.uniform(*config.brightness_delta)),
        contrast=float(rng.uniform(*config.contrast_range)),
        saturation=float(rng.uniform(*config.sat_hue_delta)),
        hue=float(rng.uniform(*config.sat_hue_delta)),
    )


def _resample(
    rgb: np.ndarray, depth: np.ndarray, src_y: np.ndarray, src_x: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    # mode='nearest' replicates the edge pixel for coordinates outside the image
    coords = np.stack([src_y, src_x])
    sampled = np.stack(
        [ndimage.map_coordinates(channel, coords, order=1, mode='nearest') for channel in rgb]
    )
    nearest = np.stack(
        [ndimage.map_coordinates(channel, coords, order=0, mode='nearest') for channel in depth]
    )
    return sampled, nearest


def _grid(height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    return np.meshgrid(np.arange(height, dtype=np.float64), np.arange(width, dtype=np.float64), indexing='ij')


def crop_resize(
    rgb: np.ndarray, depth: np.ndarray, crop: tuple[int, int, int, int]
) -> tuple[np.ndarray, np.ndarray]:
    """Cut ``(top, left, height, width)`` and stretch it back to the full size."""
    top, left, crop_h, crop_w = crop
    height, width = depth.shape[-2:]
    yy, xx = _grid(height, width)
    src_y = top + (yy + 0.5) * crop_h / height - 0.5
    src_x = left + (xx + 0.5) * crop_w / width - 0.5
    return _resample(rgb, depth, src_y, src_x)


def zoom(rgb: np.ndarray, depth: np.ndarray, factor: float) -> tuple[np.ndarray, np.ndarray]:
    """Magnify about the centre by ``factor``; depth shrinks by the same factor."""
    height, width = depth.shape[-2:]
    yy, xx = _grid(height, width)
    cy, cx = (height - 1) / 2, (width - 1) / 2
    rgb, depth = _resample(rgb, depth, cy + (yy - cy) / factor, cx + (xx - cx) / factor)
    return rgb, depth / factor


def flip_horizontal(rgb: np.ndarray, depth: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return rgb[..., ::-1].copy(), depth[..., ::-1].copy()


def rotate(rgb: np.ndarray, depth: np.ndarray, angle_deg: float) -> tuple[np.ndarray, np.ndarray]:
    """Rotate about the centre; exposed corners replicate the nearest edge."""
    height, width = depth.shape[-2:]
    yy, xx = _grid(height, width)
    cy, cx = (height - 1) / 2, (width - 1) / 2
    theta = math.radians(angle_deg)
    cos, sin = math.cos(theta), math.sin(theta)
    dy, dx = yy - cy, xx - cx
    src_x = cx + cos * dx + sin * dy
    src_y = cy - sin * dx + cos * dy
    return _resample(rgb, depth, src_y, src_x)


def jitter(
    rgb: np.ndarray,
    brightness: float = 0.0,
    contrast: float = 1.0,
    saturation: float = 0.0,
    hue: float = 0.0,
) -> np.ndarray:
    out = rgb + brightness
    mean = out.mean()
    out = np.clip((out - mean) * contrast + mean, 0.0, 1.0)
    if saturation or hue:
        hsv = colors.rgb_to_hsv(np.moveaxis(out, 0, -1))
        hsv[..., 0] = (hsv[..., 0] + hue) % 1.0
        hsv[..., 1] = np.clip(hsv[..., 1] + saturation, 0.0, 1.0)
        out = np.moveaxis(colors.hsv_to_rgb(hsv), -1, 0)
    return np.clip(out, 0.0, 1.0)


def apply_params(sample: SceneSample, params: AugmentParams, color: bool = True) -> SceneSample:
    """Apply a fixed parameter set: crop, zoom, flip, rotate, then colour jitter."""
    rgb = sample.rgb.values[0]
    depth = sample.depth.values[0]
    height, width = depth.shape[-2:]
    if params.crop != (0, 0, height, width):
        rgb, depth = crop_resize(rgb, depth, params.crop)
    if params.scale != 1.0:
        rgb, depth = zoom(rgb, depth, params.scale)
    if params.flip:
        rgb, depth = flip_horizontal(rgb, depth)
    if params.angle_deg != 0.0:
        rgb, depth = rotate(rgb, depth, params.angle_deg)
    if color:
        rgb = jitter(rgb, params.brightness, params.contrast, params.saturation, params.hue)
    return replace(
        sample,
        rgb=Tensor(np.clip(rgb, 0.0, 1.0)[None]),
        depth=Tensor(np.clip(depth, DEPTH_MIN, DEPTH_MAX)[None]),
    )


def augment(
    sample: SceneSample,
    config: AugmentConfig,
    rng: np.random.Generator,
    color: bool = True,
) -> SceneSample:
    """Randomly augment one sample; identical ``rng`` state gives identical output."""
    height, width = sample.size
    return apply_params(sample, sample_params(config, height, width, rng), color=color)
