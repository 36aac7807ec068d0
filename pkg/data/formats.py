"""Binary PPM (P6) images and little-endian PFM depth maps."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from core.tensor import Tensor
from data.synth import SceneFamily, SceneSample

logger = logging.getLogger(__name__)

PPM_MAGIC = b'P6'
PFM_MAGIC = b'Pf'
PPM_MAXVAL = 255


class FormatError(ValueError):
    """Raised for unreadable PPM/PFM content."""


def _as_map(x: Tensor | np.ndarray, channels: int) -> np.ndarray:
    arr = x.values if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
    if arr.ndim == 4:
        arr = arr[0]
    if arr.ndim == 2:
        arr = arr[None]
    if arr.shape[0] != channels:
        raise ValueError(f'expected {channels} channel(s), got array of shape {arr.shape}')
    return arr


def _header_tokens(data: bytes, count: int, kind: str) -> tuple[list[bytes], int]:
    """Split ``count`` whitespace-separated header tokens, skipping ``#`` comments."""
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < count:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise FormatError(f'malformed {kind} header: expected {count} fields, found {len(tokens)}')
        if data[pos : pos + 1] == b'#':
            end = data.find(b'\n', pos)
            pos = len(data) if end < 0 else end + 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates the header from the payload
    return tokens, pos + 1


def _positive_int(token: bytes, field: str, kind: str) -> int:
    try:
        value = int(token)
    except ValueError:
        raise FormatError(f'malformed {kind} header: {field} {token!r} is not an integer') from None
    if value < 1:
        raise FormatError(f'malformed {kind} header: {field} must be positive, got {value}')
    return value


def encode_ppm(rgb: Tensor | np.ndarray) -> bytes:
    """Quantize ``(3, H, W)`` values in [0, 1] to bytes ``floor(v * 255 + 0.5)``."""
    arr = _as_map(rgb, 3)
    _, height, width = arr.shape
    quantized = np.floor(np.clip(arr, 0.0, 1.0) * PPM_MAXVAL + 0.5).astype(np.uint8)
    header = f'P6\n{width} {height}\n{PPM_MAXVAL}\n'.encode('ascii')
    return header + quantized.transpose(1, 2, 0).tobytes()


def decode_ppm(data: bytes) -> np.ndarray:
    if data[:2] != PPM_MAGIC:
        raise FormatError(f'wrong magic for PPM: expected {PPM_MAGIC!r}, got {data[:2]!r}')
    tokens, offset = _header_tokens(data, 4, 'PPM')
    width = _positive_int(tokens[1], 'width', 'PPM')
    height = _positive_int(tokens[2], 'height', 'PPM')
    maxval = _positive_int(tokens[3], 'maxval', 'PPM')
    if maxval != PPM_MAXVAL:
        raise FormatError(f'malformed PPM header: only maxval {PPM_MAXVAL} is supported, got {maxval}')
    expected = width * height * 3
    payload = data[offset : offset + expected]
    if len(payload) < expected:
        raise FormatError(f'truncated PPM payload: expected {expected} bytes, got {len(payload)}')
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3)
    return pixels.transpose(2, 0, 1).astype(np.float64) / PPM_MAXVAL


def encode_pfm(depth: Tensor | np.ndarray) -> bytes:
    """Single-channel PFM, scale -1.0 (little-endian), rows stored bottom to top."""
    arr = _as_map(depth, 1)[0]
    height, width = arr.shape
    header = f'Pf\n{width} {height}\n-1.0\n'.encode('ascii')
    return header + np.ascontiguousarray(arr[::-1], dtype='<f4').tobytes()


def decode_pfm(data: bytes) -> np.ndarray:
    if data[:2] != PFM_MAGIC:
        raise FormatError(f'wrong magic for PFM: expected {PFM_MAGIC!r}, got {data[:2]!r}')
    tokens, offset = _header_tokens(data, 4, 'PFM')
    width = _positive_int(tokens[1], 'width', 'PFM')
    height = _positive_int(tokens[2], 'height', 'PFM')
    try:
        scale = float(tokens[3])
    except ValueError:
        raise FormatError(f'malformed PFM header: scale {tokens[3]!r} is not a number') from None
    if scale == 0.0:
        raise FormatError('malformed PFM header: scale must be non-zero')
    dtype = '<f4' if scale < 0 else '>f4'
    expected = width * height * 4
    payload = data[offset : offset + expected]
    if len(payload) < expected:
        raise FormatError(f'truncated PFM payload: expected {expected} bytes, got {len(payload)}')
    rows = np.frombuffer(payload, dtype=dtype).reshape(height, width)
    return rows[::-1].astype(np.float64)


def write_ppm(path: str | Path, rgb: Tensor | np.ndarray) -> None:
    Path(path).write_bytes(encode_ppm(rgb))


def read_ppm(path: str | Path) -> np.ndarray:
    """Read ``(3, H, W)`` values in [0, 1]."""
    return decode_ppm(Path(path).read_bytes())


def write_pfm(path: str | Path, depth: Tensor | np.ndarray) -> None:
    Path(path).write_bytes(encode_pfm(depth))


def read_pfm(path: str | Path) -> np.ndarray:
    """Read an ``(H, W)`` float map."""
    return decode_pfm(Path(path).read_bytes())


def write_depth_visualization(path: str | Path, depth: Tensor | np.ndarray) -> None:
    """Grayscale PPM of ``depth`` stretched linearly from its own [min, max] to [0, 1]."""
    arr = _as_map(depth, 1)[0]
    low, high = float(arr.min()), float(arr.max())
    span = high - low
    grey = (arr - low) / span if span > 0 else np.zeros_like(arr)
    write_ppm(path, np.stack([grey, grey, grey]))


def write_sample(rgb_path: str | Path, depth_path: str | Path, sample: SceneSample) -> None:
    write_ppm(rgb_path, sample.rgb)
    write_pfm(depth_path, sample.depth)


def read_sample(rgb_path: str | Path, depth_path: str | Path, family: SceneFamily | str, seed: int) -> SceneSample:
    rgb = read_ppm(rgb_path)
    depth = read_pfm(depth_path)
    if rgb.shape[1:] != depth.shape:
        raise FormatError(
            f'{rgb_path} is {rgb.shape[1]}x{rgb.shape[2]} '
            f'but {depth_path} is {depth.shape[0]}x{depth.shape[1]}'
        )
    return SceneSample(
        rgb=Tensor(rgb[None], copy=False),
        depth=Tensor(depth[None, None], copy=False),
        family=SceneFamily(family),
        seed=int(seed),
    )
