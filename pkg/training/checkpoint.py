"""Binary checkpoint container with a JSON config echo beside it.

Layout (all integers little-endian)::

    b'SAMN'  u32 version  u32 count
    count x ( u16 name_len  name(utf-8)  u8 rank  rank x u32 dim  float64 payload )
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

logger = logging.getLogger(__name__)

MAGIC = b'SAMN'
VERSION = 1
HEADER = struct.Struct('<4sII')
MAX_NAME_BYTES = 2**16 - 1
MAX_RANK = 2**8 - 1


class CheckpointError(ValueError):
    """Raised for unreadable or incompatible checkpoints."""


@dataclass
class Checkpoint:
    """Named float64 tensors plus the config echo of the run that produced them."""

    tensors: dict[str, np.ndarray]
    config: dict[str, Any] = field(default_factory=dict)

    @property
    def stage(self) -> int | None:
        return self.config.get('stage')

    def subset(self, prefix: str) -> dict[str, np.ndarray]:
        """Tensors under ``prefix`` with the prefix kept."""
        return {name: arr for name, arr in self.tensors.items() if name.startswith(prefix)}


def encode_checkpoint(tensors: Mapping[str, np.ndarray]) -> bytes:
    parts = [HEADER.pack(MAGIC, VERSION, len(tensors))]
    for name, arr in tensors.items():
        encoded = name.encode('utf-8')
        if len(encoded) > MAX_NAME_BYTES:
            raise CheckpointError(f'tensor name {name[:40]!r}... exceeds {MAX_NAME_BYTES} bytes')
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim > MAX_RANK:
            raise CheckpointError(f'tensor {name!r} has rank {arr.ndim} > {MAX_RANK}')
        parts.append(struct.pack('<H', len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack(f'<B{arr.ndim}I', arr.ndim, *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype='<f8').tobytes())
    return b''.join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, size: int, what: str) -> bytes:
        end = self.pos + size
        if end > len(self.data):
            raise CheckpointError(
                f'truncated checkpoint: {what} needs {size} bytes at offset {self.pos}, '
                f'file has {len(self.data)}'
            )
        chunk = self.data[self.pos : end]
        self.pos = end
        return chunk

    def unpack(self, fmt: str, what: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def decode_checkpoint(data: bytes) -> dict[str, np.ndarray]:
    if data[:4] != MAGIC:
        raise CheckpointError(f'bad checkpoint magic: expected {MAGIC!r}, got {data[:4]!r}')
    reader = _Reader(data)
    _, version, count = reader.unpack(HEADER.format, 'header')
    if version != VERSION:
        raise CheckpointError(f'unsupported checkpoint version {version} (this build reads version {VERSION})')
    tensors: dict[str, np.ndarray] = {}
    for index in range(count):
        (name_len,) = reader.unpack('<H', f'name length of tensor {index}')
        try:
            name = reader.take(name_len, f'name of tensor {index}').decode('utf-8')
        except UnicodeDecodeError as exc:
            raise CheckpointError(f'tensor {index} name is not valid UTF-8') from exc
        if name in tensors:
            raise CheckpointError(f'duplicate tensor name {name!r}')
        (rank,) = reader.unpack('<B', f'rank of {name!r}')
        dims = reader.unpack(f'<{rank}I', f'dims of {name!r}')
        size = int(np.prod(dims, dtype=np.int64)) if rank else 1
        payload = reader.take(size * 8, f'payload of {name!r}')
        tensors[name] = np.frombuffer(payload, dtype='<f8').astype(np.float64).reshape(dims)
    if reader.pos != len(data):
        raise CheckpointError(f'{len(data) - reader.pos} trailing bytes after {count} tensors')
    return tensors


def config_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + '.json')


def save_checkpoint(path: str | Path, checkpoint: Checkpoint) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(checkpoint.tensors))
    config_path(path).write_text(json.dumps(checkpoint.config, indent=2, sort_keys=True) + '\n')
    logger.info('Saved checkpoint with %d tensors to %s', len(checkpoint.tensors), path)
    return path


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise CheckpointError(f'cannot read checkpoint {path}: {exc}') from exc
    tensors = decode_checkpoint(data)
    sidecar = config_path(path)
    config: dict[str, Any] = {}
    if sidecar.is_file():
        try:
            config = json.loads(sidecar.read_text())
        except json.JSONDecodeError as exc:
            raise CheckpointError(f'config echo {sidecar} is not valid JSON: {exc}') from exc
    return Checkpoint(tensors=tensors, config=config)
