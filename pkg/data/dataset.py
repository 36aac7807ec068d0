"""Dataset splits, manifests and on-demand sample materialization."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from core.tensor import Tensor
from data.formats import FormatError, read_sample, write_sample
from data.synth import FAMILIES, SceneFamily, SceneSample, generate_scene
from utils.rng import derive_rng

logger = logging.getLogger(__name__)

SEED_SPACE = 2**62


class DatasetError(RuntimeError):
    """Raised when a sample cannot be produced or read."""


@dataclass(frozen=True)
class SceneSpec:
    family: SceneFamily
    seed: int


@dataclass(frozen=True)
class ManifestEntry:
    family: SceneFamily
    seed: int
    rgb_path: Path
    depth_path: Path


def _family_order(n: int, rng: np.random.Generator) -> list[SceneFamily]:
    families = [FAMILIES[i % len(FAMILIES)] for i in range(n)]
    return [families[i] for i in rng.permutation(n)]


def make_dataset(n_train: int, n_val: int, seed: int) -> tuple[list[SceneSpec], list[SceneSpec]]:
    """Deterministic train/validation splits with disjoint seeds and balanced families."""
    if n_train < 1 or n_val < 1:
        raise ValueError(f'n_train and n_val must be >= 1, got {n_train} and {n_val}')
    rng = derive_rng(seed, 'dataset')
    seeds: list[int] = []
    seen: set[int] = set()
    while len(seeds) < n_train + n_val:
        candidate = int(rng.integers(0, SEED_SPACE))
        if candidate not in seen:
            seen.add(candidate)
            seeds.append(candidate)
    train = [SceneSpec(f, s) for f, s in zip(_family_order(n_train, rng), seeds[:n_train])]
    val = [SceneSpec(f, s) for f, s in zip(_family_order(n_val, rng), seeds[n_train:])]
    return train, val


def write_manifest(path: str | Path, entries: Sequence[ManifestEntry]) -> None:
    """One ``family,seed,rgb_path,depth_path`` line per sample; paths relative to the manifest."""
    path = Path(path)
    root = path.parent.resolve()
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        for entry in entries:
            writer.writerow(
                [
                    entry.family.value,
                    entry.seed,
                    Path(entry.rgb_path).resolve().relative_to(root).as_posix(),
                    Path(entry.depth_path).resolve().relative_to(root).as_posix(),
                ]
            )


def read_manifest(path: str | Path) -> list[ManifestEntry]:
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f'manifest {path} does not exist')
    root = path.parent
    entries = []
    with open(path, newline='') as f:
        for lineno, row in enumerate(csv.reader(f), start=1):
            if not row:
                continue
            if len(row) != 4:
                raise DatasetError(f'{path}:{lineno}: expected 4 fields, got {len(row)}')
            family, seed, rgb, depth = row
            try:
                entries.append(ManifestEntry(SceneFamily(family), int(seed), root / rgb, root / depth))
            except ValueError as exc:
                raise DatasetError(f'{path}:{lineno}: {exc}') from exc
    return entries


def generate_dataset_files(
    specs: Sequence[SceneSpec],
    out_dir: str | Path,
    split: str,
    height: int,
    width: int,
) -> Path:
    """Render ``specs`` to ``out_dir/split/`` and write ``out_dir/split.manifest``."""
    out_dir = Path(out_dir)
    sample_dir = out_dir / split
    sample_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for index, spec in enumerate(specs):
        stem = sample_dir / f'{index:05d}_{spec.family.value}'
        sample = generate_scene(spec.family, spec.seed, height, width)
        entry = ManifestEntry(spec.family, spec.seed, stem.with_suffix('.ppm'), stem.with_suffix('.pfm'))
        write_sample(entry.rgb_path, entry.depth_path, sample)
        entries.append(entry)
    manifest = out_dir / f'{split}.manifest'
    write_manifest(manifest, entries)
    logger.info('Wrote %d %s samples to %s', len(entries), split, sample_dir)
    return manifest


class SceneDataset:
    """Indexable samples, rendered from specs or read from a manifest on access."""

    def __init__(
        self,
        specs: Sequence[SceneSpec] | None = None,
        entries: Sequence[ManifestEntry] | None = None,
        height: int = 64,
        width: int = 64,
    ):
        if (specs is None) == (entries is None):
            raise ValueError('give exactly one of specs or entries')
        self.specs = list(specs) if specs is not None else None
        self.entries = list(entries) if entries is not None else None
        self.height = height
        self.width = width

    @classmethod
    def from_manifest(cls, path: str | Path) -> 'SceneDataset':
        entries = read_manifest(path)
        if not entries:
            raise DatasetError(f'manifest {path} lists no samples')
        return cls(entries=entries)

    def __len__(self) -> int:
        return len(self.specs if self.specs is not None else self.entries)  # type: ignore[arg-type]

    def __getitem__(self, index: int) -> SceneSample:
        if self.specs is not None:
            spec = self.specs[index]
            return generate_scene(spec.family, spec.seed, self.height, self.width)
        entry = self.entries[index]  # type: ignore[index]
        try:
            return read_sample(entry.rgb_path, entry.depth_path, entry.family, entry.seed)
        except (OSError, FormatError) as exc:
            raise DatasetError(f'sample {index} ({entry.rgb_path.name}): {exc}') from exc

    def __iter__(self) -> Iterator[SceneSample]:
        for index in range(len(self)):
            yield self[index]

    def name(self, index: int) -> str:
        if self.entries is not None:
            return self.entries[index].depth_path.stem
        spec = self.specs[index]  # type: ignore[index]
        return f'{index:05d}_{spec.family.value}'


def collate(samples: Sequence[SceneSample]) -> tuple[Tensor, Tensor]:
    """Stack samples into ``(B, 3, H, W)`` images and ``(B, 1, H, W)`` depths."""
    if not samples:
        raise DatasetError('cannot collate an empty batch')
    rgb = np.concatenate([s.rgb.values for s in samples], axis=0)
    depth = np.concatenate([s.depth.values for s in samples], axis=0)
    return Tensor(rgb, copy=False), Tensor(depth, copy=False)
