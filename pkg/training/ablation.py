"""Variant ladder: stage 1 once per seed, stage 2 for each variant, compared on validation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from data.dataset import SceneDataset, make_dataset
from evaluation.metrics import MetricsReport
from evaluation.report import format_report
from models.network import ModelVariant
from training.config import TrainConfig
from training.evaluate import evaluate, median_baseline, validation_l_ae
from training.trainer import train_stage1, train_stage2

logger = logging.getLogger(__name__)

ABLATION_VARIANTS = (ModelVariant.PURE, ModelVariant.FPN, ModelVariant.ALIGN, ModelVariant.SOM)
ORDERED_VARIANTS = (ModelVariant.SOM, ModelVariant.ALIGN, ModelVariant.FPN)


@dataclass
class AblationResult:
    seeds: list[int]
    reports: dict[str, list[MetricsReport]] = field(default_factory=dict)
    stage1_l_ae: list[float] = field(default_factory=list)
    baselines: list[float] = field(default_factory=list)

    def values(self, variant: ModelVariant | str, metric: str) -> np.ndarray:
        return np.array([getattr(r, metric) for r in self.reports[ModelVariant(variant).value]])

    def median(self, variant: ModelVariant | str, metric: str) -> float:
        return float(np.median(self.values(variant, metric)))

    def iqr(self, variant: ModelVariant | str, metric: str) -> float:
        q1, q3 = np.percentile(self.values(variant, metric), [25, 75])
        return float(q3 - q1)

    def ordering_holds(self, metric: str = 'rmse_log') -> bool:
        """``som < align < fpn`` on the median, each gap wider than both neighbours' IQR."""
        for better, worse in zip(ORDERED_VARIANTS, ORDERED_VARIANTS[1:]):
            if better.value not in self.reports or worse.value not in self.reports:
                return False
            gap = self.median(worse, metric) - self.median(better, metric)
            if gap <= max(self.iqr(better, metric), self.iqr(worse, metric)):
                return False
        return True

    def stage1_converged(self) -> bool:
        """Every seed's auto-encoder beats half the constant-median baseline."""
        pairs = zip(self.stage1_l_ae, self.baselines)
        return bool(self.stage1_l_ae) and all(loss < 0.5 * base for loss, base in pairs)

    def median_reports(self) -> tuple[list[MetricsReport], list[str]]:
        labels = [v for v in (m.value for m in ABLATION_VARIANTS) if v in self.reports]
        reports = [
            MetricsReport(**{name: self.median(v, name) for name in MetricsReport.field_names()}) for v in labels
        ]
        return reports, labels

    def table(self) -> str:
        return format_report(*self.median_reports())


def run_ablation(
    config: TrainConfig,
    seeds: Sequence[int],
    stage1_steps: int | None = None,
    stage2_steps: int | None = None,
    variants: Sequence[ModelVariant] = ABLATION_VARIANTS,
    out_dir: str | Path | None = None,
) -> AblationResult:
    result = AblationResult(seeds=list(seeds))
    height, width = config.image_dims
    for seed in seeds:
        seed_dir = Path(out_dir) / f'seed_{seed}' if out_dir is not None else None
        train_specs, val_specs = make_dataset(config.n_train, config.n_val, seed)
        train = SceneDataset(train_specs, height=height, width=width)
        val = SceneDataset(val_specs, height=height, width=width)

        stage1_config = config.replace(seed=seed, steps=stage1_steps or config.steps_for(1))
        stage1 = train_stage1(stage1_config, train, out_dir=seed_dir)
        result.stage1_l_ae.append(validation_l_ae(stage1.checkpoint, val))
        result.baselines.append(median_baseline(train, val))
        logger.info(
            'seed %d: stage-1 l_ae %.4f vs median baseline %.4f',
            seed,
            result.stage1_l_ae[-1],
            result.baselines[-1],
        )

        for variant in variants:
            variant = ModelVariant(variant)
            stage2_config = config.replace(seed=seed, variant=variant, steps=stage2_steps or config.steps_for(2))
            stage2 = train_stage2(stage2_config, train, stage1.checkpoint, out_dir=seed_dir)
            evaluation = evaluate(stage2.checkpoint, val, label=variant.value)
            result.reports.setdefault(variant.value, []).append(evaluation.report)
            logger.info('seed %d %s: rmse_log %.4f', seed, variant.value, evaluation.report.rmse_log)
    return result
