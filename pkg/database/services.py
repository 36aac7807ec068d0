"""Service layer for run ledger operations."""

from datetime import datetime
from typing import Any, Sequence
from uuid import uuid4

from sqlalchemy.orm import Session

from database.models import AttentionRecord, EvaluationRecord, StepRecord, TrainingRun


class RunService:
    """Service for training run bookkeeping."""

    @staticmethod
    def start_run(
        db: Session,
        stage: int,
        seed: int,
        config: dict[str, Any],
        variant: str | None = None,
    ) -> TrainingRun:
        """Register a run in the 'running' state."""
        run = TrainingRun(
            run_id=str(uuid4()),
            stage=stage,
            variant=variant,
            seed=seed,
            config=config,
            status='running',
        )
        db.add(run)
        db.commit()
        db.refresh(run)
        return run

    @staticmethod
    def finish_run(
        db: Session,
        run_id: str,
        status: str = 'completed',
        checkpoint_path: str | None = None,
        error_message: str | None = None,
    ) -> TrainingRun | None:
        """Mark a run finished with its final status."""
        run = db.query(TrainingRun).filter(TrainingRun.run_id == run_id).first()
        if run:
            run.status = status
            run.checkpoint_path = checkpoint_path
            run.error_message = error_message
            run.completed_at = datetime.utcnow()
            db.commit()
            db.refresh(run)
        return run

    @staticmethod
    def get_run(db: Session, run_id: str) -> TrainingRun | None:
        """Get run by ID."""
        return db.query(TrainingRun).filter(TrainingRun.run_id == run_id).first()

    @staticmethod
    def list_runs(db: Session, stage: int | None = None, limit: int = 100) -> list[TrainingRun]:
        query = db.query(TrainingRun)
        if stage is not None:
            query = query.filter(TrainingRun.stage == stage)
        return query.order_by(TrainingRun.created_at.desc()).limit(limit).all()


class StepService:
    """Service for per-step loss records."""

    @staticmethod
    def record_step(
        db: Session,
        run_id: str,
        step: int,
        total: float,
        l_depth: float = 0.0,
        l_cmrc: float = 0.0,
        l_gradient: float = 0.0,
        l_normal: float = 0.0,
    ) -> StepRecord:
        record = StepRecord(
            run_id=run_id,
            step=step,
            l_depth=l_depth,
            l_cmrc=l_cmrc,
            l_gradient=l_gradient,
            l_normal=l_normal,
            total=total,
        )
        db.add(record)
        db.commit()
        return record

    @staticmethod
    def record_steps(db: Session, run_id: str, rows: Sequence[dict[str, float]]) -> int:
        """Bulk insert rows shaped like the training log; returns the count."""
        db.add_all([StepRecord(run_id=run_id, **{k: row[k] for k in row}) for row in rows])
        db.commit()
        return len(rows)

    @staticmethod
    def list_steps(db: Session, run_id: str) -> list[StepRecord]:
        return db.query(StepRecord).filter(StepRecord.run_id == run_id).order_by(StepRecord.step).all()


class AttentionService:
    """Service for attention trace records."""

    @staticmethod
    def record(db: Session, run_id: str, step: int, level: int, weights: Sequence[float]) -> AttentionRecord:
        record = AttentionRecord(run_id=run_id, step=step, level=level, weights=[float(w) for w in weights])
        db.add(record)
        db.commit()
        return record

    @staticmethod
    def list_for_run(db: Session, run_id: str, level: int | None = None) -> list[AttentionRecord]:
        query = db.query(AttentionRecord).filter(AttentionRecord.run_id == run_id)
        if level is not None:
            query = query.filter(AttentionRecord.level == level)
        return query.order_by(AttentionRecord.step, AttentionRecord.level).all()


class EvaluationService:
    """Service for evaluation results."""

    @staticmethod
    def record(
        db: Session,
        label: str,
        metrics: dict[str, float],
        samples: int,
        failures: int = 0,
        run_id: str | None = None,
    ) -> EvaluationRecord:
        record = EvaluationRecord(
            run_id=run_id,
            label=label,
            metrics=metrics,
            samples=samples,
            failures=failures,
        )
        db.add(record)
        db.commit()
        db.refresh(record)
        return record

    @staticmethod
    def list_for_label(db: Session, label: str, limit: int = 100) -> list[EvaluationRecord]:
        return (
            db.query(EvaluationRecord)
            .filter(EvaluationRecord.label == label)
            .order_by(EvaluationRecord.created_at.desc())
            .limit(limit)
            .all()
        )
