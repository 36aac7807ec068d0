"""SQLAlchemy models for the run ledger."""

from datetime import datetime

from sqlalchemy import (
    JSON,
    Column,
    DateTime,
    Float,
    ForeignKey,
    Index,
    Integer,
    String,
    Text,
)
from sqlalchemy.orm import declarative_base, relationship

Base = declarative_base()


class TrainingRun(Base):
    """One invocation of stage-1 or stage-2 training."""

    __tablename__ = 'training_runs'

    run_id = Column(String(64), primary_key=True)
    stage = Column(Integer, nullable=False)  # 1 or 2
    variant = Column(String(16), nullable=True)  # 'pure', 'fpn', 'align', 'som'; None for stage 1
    seed = Column(Integer, nullable=False)
    config = Column(JSON, nullable=False)
    status = Column(String(20), nullable=False, default='running')  # 'running', 'completed', 'diverged', 'failed'
    checkpoint_path = Column(Text, nullable=True)
    error_message = Column(Text, nullable=True)
    created_at = Column(DateTime, default=datetime.utcnow, nullable=False)
    completed_at = Column(DateTime, nullable=True)

    steps = relationship('StepRecord', back_populates='run', cascade='all, delete-orphan')
    attention = relationship('AttentionRecord', back_populates='run', cascade='all, delete-orphan')
    evaluations = relationship('EvaluationRecord', back_populates='run')

    __table_args__ = (
        Index('idx_run_stage', 'stage'),
        Index('idx_run_variant', 'variant'),
        Index('idx_run_status', 'status'),
    )

    def __repr__(self) -> str:
        return (
            f'<TrainingRun(run_id={self.run_id}, stage={self.stage}, '
            f'variant={self.variant}, status={self.status})>'
        )


class StepRecord(Base):
    """Loss components of one optimizer step."""

    __tablename__ = 'step_records'

    id = Column(Integer, primary_key=True, autoincrement=True)
    run_id = Column(String(64), ForeignKey('training_runs.run_id'), nullable=False)
    step = Column(Integer, nullable=False)
    l_depth = Column(Float, nullable=False, default=0.0)
    l_cmrc = Column(Float, nullable=False, default=0.0)
    l_gradient = Column(Float, nullable=False, default=0.0)
    l_normal = Column(Float, nullable=False, default=0.0)
    total = Column(Float, nullable=False)

    run = relationship('TrainingRun', back_populates='steps')

    __table_args__ = (Index('idx_step_run_step', 'run_id', 'step'),)

    def __repr__(self) -> str:
        return f'<StepRecord(run_id={self.run_id}, step={self.step}, total={self.total})>'


class AttentionRecord(Base):
    """Batch-averaged attention over memory slots for one level at one step."""

    __tablename__ = 'attention_records'

    id = Column(Integer, primary_key=True, autoincrement=True)
    run_id = Column(String(64), ForeignKey('training_runs.run_id'), nullable=False)
    step = Column(Integer, nullable=False)
    level = Column(Integer, nullable=False)
    weights = Column(JSON, nullable=False)

    run = relationship('TrainingRun', back_populates='attention')

    __table_args__ = (Index('idx_attention_run_step', 'run_id', 'step'),)

    def __repr__(self) -> str:
        return f'<AttentionRecord(run_id={self.run_id}, step={self.step}, level={self.level})>'


class EvaluationRecord(Base):
    """Averaged metrics of one evaluation."""

    __tablename__ = 'evaluation_records'

    id = Column(Integer, primary_key=True, autoincrement=True)
    run_id = Column(String(64), ForeignKey('training_runs.run_id'), nullable=True)
    label = Column(String(100), nullable=False)
    metrics = Column(JSON, nullable=False)
    samples = Column(Integer, nullable=False, default=0)
    failures = Column(Integer, nullable=False, default=0)
    created_at = Column(DateTime, default=datetime.utcnow, nullable=False)

    run = relationship('TrainingRun', back_populates='evaluations')

    __table_args__ = (
        Index('idx_evaluation_label', 'label'),
        Index('idx_evaluation_created_at', 'created_at'),
    )

    def __repr__(self) -> str:
        return f'<EvaluationRecord(label={self.label}, samples={self.samples})>'
