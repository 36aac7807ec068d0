"""Shared helpers."""

from .rng import derive_rng

__all__ = ['derive_rng']
