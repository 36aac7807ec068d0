"""Run ledger: SQLAlchemy models, connections and services."""

from .connection import drop_database, get_db, get_engine, init_database, ledger_url
from .models import AttentionRecord, Base, EvaluationRecord, StepRecord, TrainingRun
from .recorder import RunRecorder
from .services import AttentionService, EvaluationService, RunService, StepService

__all__ = [
    'AttentionRecord',
    'AttentionService',
    'Base',
    'EvaluationRecord',
    'EvaluationService',
    'RunRecorder',
    'RunService',
    'StepRecord',
    'StepService',
    'TrainingRun',
    'drop_database',
    'get_db',
    'get_engine',
    'init_database',
    'ledger_url',
]
