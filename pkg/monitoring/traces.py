"""Append-only CSV records of training progress and memory attention."""

from __future__ import annotations

import csv
import logging
from pathlib import Path
from typing import IO, Sequence

logger = logging.getLogger(__name__)

TRAINING_LOG_FIELDS = ['step', 'l_depth', 'l_cmrc', 'l_gradient', 'l_normal', 'total']


class _CsvWriter:
    """Single writer per file; the header is written when the file is new or empty."""

    def __init__(self, path: str | Path, fieldnames: list[str], append: bool = False):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.fieldnames = fieldnames
        fresh = not append or not self.path.exists() or self.path.stat().st_size == 0
        self._file: IO[str] = open(self.path, 'w' if not append else 'a', newline='')
        self._writer = csv.DictWriter(self._file, fieldnames=fieldnames, lineterminator='\n')
        if fresh:
            self._writer.writeheader()

    def _write(self, row: dict[str, object]) -> None:
        self._writer.writerow(row)
        self._file.flush()

    def close(self) -> None:
        if not self._file.closed:
            self._file.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()


class TrainingLogWriter(_CsvWriter):
    """``step,l_depth,l_cmrc,l_gradient,l_normal,total``; terms not evaluated are 0."""

    def __init__(self, path: str | Path, append: bool = False):
        super().__init__(path, TRAINING_LOG_FIELDS, append=append)

    def write(
        self,
        step: int,
        total: float,
        l_depth: float = 0.0,
        l_cmrc: float = 0.0,
        l_gradient: float = 0.0,
        l_normal: float = 0.0,
    ) -> None:
        self._write(
            {
                'step': step,
                'l_depth': repr(float(l_depth)),
                'l_cmrc': repr(float(l_cmrc)),
                'l_gradient': repr(float(l_gradient)),
                'l_normal': repr(float(l_normal)),
                'total': repr(float(total)),
            }
        )


class AttentionTraceWriter(_CsvWriter):
    """``step,level,alpha_1..alpha_n``: one line per memory read, batch-averaged."""

    def __init__(self, path: str | Path, memory_size: int, append: bool = False):
        self.memory_size = memory_size
        super().__init__(path, ['step', 'level'] + [f'alpha_{t + 1}' for t in range(memory_size)], append=append)

    def write(self, step: int, level: int, alpha: Sequence[float]) -> None:
        if len(alpha) != self.memory_size:
            raise ValueError(f'expected {self.memory_size} attention weights, got {len(alpha)}')
        row: dict[str, object] = {'step': step, 'level': level}
        row.update({f'alpha_{t + 1}': repr(float(a)) for t, a in enumerate(alpha)})
        self._write(row)


def read_training_log(path: str | Path) -> list[dict[str, float]]:
    with open(path, newline='') as f:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(f)]


def read_attention_trace(path: str | Path) -> list[tuple[int, int, list[float]]]:
    rows = []
    with open(path, newline='') as f:
        for row in csv.DictReader(f):
            alphas = [float(v) for k, v in row.items() if k.startswith('alpha_')]
            rows.append((int(row['step']), int(row['level']), alphas))
    return rows
