"""Synthetic RGB-D scenes, augmentation, file formats and dataset splits."""

from .augment import AugmentConfig, AugmentParams, apply_params, augment, sample_params
from .dataset import (
    DatasetError,
    ManifestEntry,
    SceneDataset,
    SceneSpec,
    collate,
    generate_dataset_files,
    make_dataset,
    read_manifest,
    write_manifest,
)
from .formats import (
    FormatError,
    read_pfm,
    read_ppm,
    read_sample,
    write_depth_visualization,
    write_pfm,
    write_ppm,
    write_sample,
)
from .synth import FAMILIES, SceneFamily, SceneSample, generate_scene

__all__ = [
    'AugmentConfig',
    'AugmentParams',
    'DatasetError',
    'FAMILIES',
    'FormatError',
    'ManifestEntry',
    'SceneDataset',
    'SceneFamily',
    'SceneSample',
    'SceneSpec',
    'apply_params',
    'augment',
    'collate',
    'generate_dataset_files',
    'generate_scene',
    'make_dataset',
    'read_manifest',
    'read_pfm',
    'read_ppm',
    'read_sample',
    'sample_params',
    'write_depth_visualization',
    'write_manifest',
    'write_pfm',
    'write_ppm',
    'write_sample',
]
