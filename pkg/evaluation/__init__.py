"""Evaluation statistics and report rendering."""

from .metrics import MetricsReport, compute_metrics, upsample_prediction
from .report import format_report, write_report_csv

__all__ = [
    'MetricsReport',
    'compute_metrics',
    'format_report',
    'upsample_prediction',
    'write_report_csv',
]
