"""Command-line entry point."""

from .commands import cli

__all__ = ['cli']
