"""Training log and attention trace writers."""

from .traces import (
    TRAINING_LOG_FIELDS,
    AttentionTraceWriter,
    TrainingLogWriter,
    read_attention_trace,
    read_training_log,
)

__all__ = [
    'AttentionTraceWriter',
    'TRAINING_LOG_FIELDS',
    'TrainingLogWriter',
    'read_attention_trace',
    'read_training_log',
]
