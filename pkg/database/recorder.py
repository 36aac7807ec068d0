"""Buffered mirror of a training run into the ledger."""

import logging
from typing import Any, Sequence

from database.connection import get_db, init_database
from database.models import AttentionRecord
from database.services import RunService, StepService

logger = logging.getLogger(__name__)


class RunRecorder:
    """Collects step and attention rows and writes them in batches of ``flush_every``."""

    def __init__(
        self,
        url: str,
        stage: int,
        seed: int,
        config: dict[str, Any],
        variant: str | None = None,
        flush_every: int = 50,
    ):
        self.url = url
        self.flush_every = max(1, flush_every)
        self._steps: list[dict[str, float]] = []
        self._attention: list[tuple[int, int, list[float]]] = []
        init_database(url)
        with get_db(url) as db:
            self.run_id = RunService.start_run(db, stage=stage, seed=seed, config=config, variant=variant).run_id
        logger.info('Recording stage-%d run %s to %s', stage, self.run_id, url)

    def log_step(self, step: int, row: dict[str, float]) -> None:
        self._steps.append({'step': step, **row})
        if len(self._steps) >= self.flush_every:
            self.flush()

    def log_attention(self, step: int, level: int, weights: Sequence[float]) -> None:
        self._attention.append((step, level, [float(w) for w in weights]))

    def flush(self) -> None:
        if not self._steps and not self._attention:
            return
        with get_db(self.url) as db:
            if self._steps:
                StepService.record_steps(db, self.run_id, self._steps)
            if self._attention:
                db.add_all(
                    [
                        AttentionRecord(run_id=self.run_id, step=step, level=level, weights=weights)
                        for step, level, weights in self._attention
                    ]
                )
        self._steps.clear()
        self._attention.clear()

    def finish(
        self,
        status: str = 'completed',
        checkpoint_path: str | None = None,
        error: str | None = None,
    ) -> None:
        self.flush()
        with get_db(self.url) as db:
            RunService.finish_run(
                db,
                self.run_id,
                status=status,
                checkpoint_path=checkpoint_path,
                error_message=error,
            )
