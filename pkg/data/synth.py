"""Procedural RGB-D scenes built from planes, boxes and steps.

Depth is analytic: each scene is a handful of (possibly bounded) planes hit
by pinhole rays with focal length ``W`` pixels and a centred principal
point; the closest hit wins. Colour is Lambertian shading of the
depth-derived normals times a repetitive per-surface albedo pattern plus a
little seeded noise.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from core.tensor import Tensor
from losses.objectives import DEPTH_MAX, DEPTH_MIN
from models.backbone import check_divisible
from utils.rng import derive_rng

logger = logging.getLogger(__name__)

NOISE_SIGMA = 0.01
LIGHT_DIRECTION = np.array([-0.4, -0.6, -1.0]) / np.linalg.norm([-0.4, -0.6, -1.0])
AMBIENT = 0.25


class SceneFamily(str, Enum):
    CORRIDOR = 'corridor'
    BOXES = 'boxes'
    STAIRS = 'stairs'
    FACADE = 'facade'


FAMILIES = tuple(SceneFamily)


@dataclass(frozen=True)
class SceneSample:
    """Paired image ``(1, 3, H, W)`` in [0, 1] and depth ``(1, 1, H, W)`` in metres."""

    rgb: Tensor
    depth: Tensor
    family: SceneFamily
    seed: int

    @property
    def size(self) -> tuple[int, int]:
        return self.depth.dims[2], self.depth.dims[3]


Pattern = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass
class Surface:
    depth: np.ndarray
    pattern: Pattern
    color: np.ndarray


def camera_rays(height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    """Ray slopes ``(x/z, y/z)`` through pixel centres; y points down."""
    u = (np.arange(width) + 0.5 - width / 2) / width
    v = (np.arange(height) + 0.5 - height / 2) / width
    return np.meshgrid(u, v)


def _plane_hit(slope: np.ndarray, offset: float) -> np.ndarray:
    """Depth at which rays meet the plane ``coord = offset`` (inf when behind or parallel)."""
    with np.errstate(divide='ignore', invalid='ignore'):
        z = offset / slope
    return np.where(np.isfinite(z) & (z > 0), z, np.inf)


def _within(z: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return np.where(mask, z, np.inf)


def _stripes(coord: np.ndarray, period: float) -> np.ndarray:
    return 0.55 + 0.35 * (np.sin(2 * np.pi * coord / period) > 0)


def _checker(a: np.ndarray, b: np.ndarray, cell: float) -> np.ndarray:
    return 0.5 + 0.4 * ((np.floor(a / cell) + np.floor(b / cell)) % 2)


def _corridor(rx: np.ndarray, ry: np.ndarray, rng: np.random.Generator) -> list[Surface]:
    left, right = rng.uniform(0.8, 1.5, size=2)
    floor, ceiling = rng.uniform(0.9, 1.4, size=2)
    back = rng.uniform(6.0, 9.5)
    period = rng.uniform(0.6, 1.2)
    colors = rng.uniform(0.4, 1.0, size=(5, 3))
    full = np.full_like(rx, back)
    return [
        Surface(_plane_hit(rx, -left), lambda X, Y, Z: _stripes(Z, period), colors[0]),
        Surface(_plane_hit(rx, right), lambda X, Y, Z: _stripes(Z, period), colors[1]),
        Surface(_plane_hit(ry, floor), lambda X, Y, Z: _checker(X, Z, 0.5), colors[2]),
        Surface(_plane_hit(ry, -ceiling), lambda X, Y, Z: np.full_like(X, 0.8), colors[3]),
        Surface(full, lambda X, Y, Z: _checker(X, Y, 0.4), colors[4]),
    ]


def _boxes(rx: np.ndarray, ry: np.ndarray, rng: np.random.Generator) -> list[Surface]:
    floor = rng.uniform(1.0, 1.5)
    back = rng.uniform(7.0, 9.5)
    colors = rng.uniform(0.4, 1.0, size=(2, 3))
    surfaces = [
        Surface(_plane_hit(ry, floor), lambda X, Y, Z: _checker(X, Z, 0.6), colors[0]),
        Surface(np.full_like(rx, back), lambda X, Y, Z: _stripes(X, 0.8), colors[1]),
    ]
    for _ in range(int(rng.integers(2, 5))):
        z_front = rng.uniform(2.5, 6.0)
        width = rng.uniform(0.5, 1.2)
        x0 = rng.uniform(-2.0, 2.0) - width / 2
        height = rng.uniform(0.4, 1.0)
        extent = rng.uniform(0.5, 1.0)
        top = floor - height
        color = rng.uniform(0.4, 1.0, size=3)
        fx, fy = z_front * rx, z_front * ry
        front = _within(np.full_like(rx, z_front), (fx >= x0) & (fx <= x0 + width) & (fy >= top) & (fy <= floor))
        z_top = _plane_hit(ry, top)
        tx = z_top * rx
        lid = _within(z_top, (tx >= x0) & (tx <= x0 + width) & (z_top >= z_front) & (z_top <= z_front + extent))
        surfaces.append(Surface(front, lambda X, Y, Z: _checker(X, Y, 0.2), color))
        surfaces.append(Surface(lid, lambda X, Y, Z: np.full_like(X, 0.9), color))
    return surfaces


def _stairs(rx: np.ndarray, ry: np.ndarray, rng: np.random.Generator) -> list[Surface]:
    camera_height = rng.uniform(1.2, 1.6)
    rise = rng.uniform(0.15, 0.25)
    run = rng.uniform(0.5, 0.8)
    start = rng.uniform(1.5, 2.5)
    steps = int(rng.integers(6, 11))
    tread_color, riser_color, wall_color = rng.uniform(0.4, 1.0, size=(3, 3))
    surfaces = []
    for k in range(steps):
        level = camera_height - k * rise
        z = _plane_hit(ry, level)
        near = 0.0 if k == 0 else start + k * run
        tread = _within(z, (z >= near) & (z <= start + (k + 1) * run))
        surfaces.append(Surface(tread, lambda X, Y, Z: _stripes(X, 0.3), tread_color))
        if k:
            z_riser = start + k * run
            y = z_riser * ry
            mask = (y >= level) & (y <= level + rise)
            riser = _within(np.full_like(rx, z_riser), mask)
            surfaces.append(Surface(riser, lambda X, Y, Z: np.full_like(X, 0.85), riser_color))
    back = np.full_like(rx, start + steps * run)
    surfaces.append(Surface(back, lambda X, Y, Z: _checker(X, Y, 0.5), wall_color))
    return surfaces


def _facade(rx: np.ndarray, ry: np.ndarray, rng: np.random.Generator) -> list[Surface]:
    distance = rng.uniform(3.0, 7.0)
    pitch = rng.uniform(-0.15, 0.15)
    recess = rng.uniform(0.15, 0.4)
    columns = int(rng.integers(1, 4))
    spacing = rng.uniform(0.9, 1.4)
    half_w = rng.uniform(0.2, 0.35) * spacing
    rows = int(rng.integers(2, 4))
    v_spacing = rng.uniform(0.8, 1.2)
    half_h = rng.uniform(0.2, 0.35) * v_spacing
    wall_color, glass_color = rng.uniform(0.4, 1.0, size=(2, 3))

    denom = ry * np.sin(pitch) + np.cos(pitch)
    z_wall = distance / denom
    # |X| keeps the window layout mirror-symmetric about the centre column
    ax, y = np.abs(z_wall * rx), z_wall * ry
    in_window = np.zeros_like(rx, dtype=bool)
    for j in range(columns):
        cx = (j + 0.5) * spacing
        for r in range(rows):
            cy = (r - (rows - 1) / 2) * v_spacing
            in_window |= (np.abs(ax - cx) < half_w) & (np.abs(y - cy) < half_h)
    glass = _within((distance + recess) / denom, in_window)
    return [
        Surface(_within(z_wall, ~in_window), lambda X, Y, Z: _stripes(Y, 0.25), wall_color),
        Surface(glass, lambda X, Y, Z: np.full_like(X, 0.35), glass_color),
    ]


_BUILDERS = {
    SceneFamily.CORRIDOR: _corridor,
    SceneFamily.BOXES: _boxes,
    SceneFamily.STAIRS: _stairs,
    SceneFamily.FACADE: _facade,
}


def _compose(surfaces: list[Surface], rx: np.ndarray, ry: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    depths = np.stack([s.depth for s in surfaces])
    nearest = np.argmin(depths, axis=0)
    depth = np.take_along_axis(depths, nearest[None], axis=0)[0]
    depth = np.where(np.isfinite(depth), depth, DEPTH_MAX)
    X, Y, Z = depth * rx, depth * ry, depth
    albedo = np.zeros(rx.shape + (3,))
    for k, surface in enumerate(surfaces):
        mask = nearest == k
        if mask.any():
            albedo[mask] = surface.pattern(X, Y, Z)[mask, None] * surface.color
    return depth, albedo


def shading(depth: np.ndarray, rx: np.ndarray, ry: np.ndarray) -> np.ndarray:
    """Lambertian shading from normals of the back-projected depth map."""
    points = np.stack([depth * rx, depth * ry, depth], axis=-1)
    du = np.gradient(points, axis=1)
    dv = np.gradient(points, axis=0)
    normals = np.cross(du, dv)
    length = np.linalg.norm(normals, axis=-1, keepdims=True)
    normals = normals / np.where(length > 0, length, 1.0)
    view = np.stack([rx, ry, np.ones_like(rx)], axis=-1)
    facing = np.sign(np.sum(normals * view, axis=-1, keepdims=True))
    normals = normals * np.where(facing > 0, -1.0, 1.0)
    lambert = np.clip(np.sum(normals * LIGHT_DIRECTION, axis=-1), 0.0, 1.0)
    return AMBIENT + (1.0 - AMBIENT) * lambert


def generate_scene(family: SceneFamily | str, seed: int, height: int, width: int) -> SceneSample:
    """Render one scene; ``(family, seed, height, width)`` fully determines the result."""
    family = SceneFamily(family)
    check_divisible(height, width)
    rng = derive_rng(seed, 'scene', family.value)
    rx, ry = camera_rays(height, width)
    depth, albedo = _compose(_BUILDERS[family](rx, ry, rng), rx, ry)
    depth = np.clip(depth, DEPTH_MIN, DEPTH_MAX)
    rgb = albedo * shading(depth, rx, ry)[..., None]
    rgb = np.clip(rgb + rng.normal(0.0, NOISE_SIGMA, size=rgb.shape), 0.0, 1.0)
    return SceneSample(
        rgb=Tensor(rgb.transpose(2, 0, 1)[None], copy=True),
        depth=Tensor(depth[None, None], copy=True),
        family=family,
        seed=int(seed),
    )
