"""Text and CSV renderings of metric reports."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

from evaluation.metrics import MetricsReport

COLUMNS = ('Rel', 'Sq Rel', 'RMSE', 'RMSE_log', 'log10', 'δ1', 'δ2', 'δ3')
COLUMN_WIDTH = 8
LABEL_HEADER = 'Model'


def format_report(reports: Sequence[MetricsReport], labels: Sequence[str]) -> str:
    """Aligned table, one row per label in input order, four decimals."""
    if len(reports) != len(labels):
        raise ValueError(f'{len(reports)} reports but {len(labels)} labels')
    label_width = max([len(LABEL_HEADER)] + [len(label) for label in labels])
    header = f'{LABEL_HEADER:<{label_width}} | ' + ' | '.join(f'{c:>{COLUMN_WIDTH}}' for c in COLUMNS)
    lines = [header, '-' * len(header)]
    for label, report in zip(labels, reports):
        cells = ' | '.join(f'{v:>{COLUMN_WIDTH}.4f}' for v in report.as_dict().values())
        lines.append(f'{label:<{label_width}} | {cells}')
    return '\n'.join(lines) + '\n'


def write_report_csv(path: str | Path, reports: Sequence[MetricsReport], labels: Sequence[str]) -> None:
    if len(reports) != len(labels):
        raise ValueError(f'{len(reports)} reports but {len(labels)} labels')
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(['label'] + MetricsReport.field_names())
        for label, report in zip(labels, reports):
            writer.writerow([label] + [repr(v) for v in report.as_dict().values()])
