"""
Experiment services for the ICF inverse-estimation toolkit.

This module runs the data-scaling and pretraining-comparison studies and
renders stored run outputs into static charts.
"""
import dataclasses
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from celery import group

from apps.core import charts
from apps.core.exceptions import ConfigError, DataFormatError, DataIOError, NumericalError, ParameterError
from apps.datasets.services import DatasetService
from apps.datasets.splits import ALLOWED_FRACTIONS
from apps.experiments.config import RunConfig, config_diff
from apps.experiments.tasks import run_study_arm
from apps.sensitivity.metrics import r2_score, relative_l2
from apps.training.checkpoint import HEADER_NAME
from apps.training.metrics import FLOAT_FORMAT, MetricsLog
from apps.training.services import TrainingService

logger = logging.getLogger('icf_inverse')

LOSS_COLUMNS = ('backbone_train_mse', 'backbone_val_mse', 'tsh_train_mse', 'tsh_val_mse')
LOSS_TITLES = {
    'backbone_train_mse': 'Backbone train (reconstruction)',
    'backbone_val_mse': 'Backbone val (reconstruction)',
    'tsh_train_mse': 'TSH train (regression)',
    'tsh_val_mse': 'TSH val (regression)',
}
SCALE_COLUMNS = (
    'fraction', 'seed', 'train_samples', 'best_epoch', *LOSS_COLUMNS, 'test_recon_mse', 'test_reg_mse',
)
COMPARE_COLUMNS = ('fraction', 'seed', 'arm', 'train_samples', 'best_epoch', 'test_recon_mse', 'test_reg_mse')
COMPARE_ARMS = ('scratch', 'finetune')
# Config paths allowed to differ between the two arms of a comparison.
INIT_PATHS = frozenset({'train.init', 'train.checkpoint'})


@dataclass(frozen=True)
class StudyArm:
    """One training run of a study."""

    arm: str
    fraction: float
    seed: int
    config: RunConfig
    out_dir: Path


def validate_fractions(fractions: list[float]) -> list[float]:
    """
    Raises:
        ParameterError: If a fraction is not one of the supported values.
    """
    for fraction in fractions:
        if not any(math.isclose(fraction, allowed) for allowed in ALLOWED_FRACTIONS):
            raise ParameterError(f'fraction {fraction} is not one of {list(ALLOWED_FRACTIONS)}')
    return sorted(set(fractions))


def arm_config(base: RunConfig, fraction: float, replicate: int, **train_changes: Any) -> RunConfig:
    """Config of one arm: replicate ``r`` offsets both the split and train seeds by ``r``."""
    return base.replace(
        split=dataclasses.replace(base.split, train_fraction=fraction, seed=base.split.seed + replicate).validate(),
        train=dataclasses.replace(base.train, seed=base.train.seed + replicate, **train_changes).validate(),
    )


def _arm_dir(root: Path, fraction: float, seed: int) -> Path:
    return root / f'frac_{fraction:.2f}' / f'seed_{seed}'


def _write_csv(frame: pd.DataFrame, path: Path, **kwargs: Any) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, float_format=FLOAT_FORMAT, **kwargs)
    except OSError as exc:
        raise DataIOError(f'cannot write {path}: {exc}') from exc


def _write_text(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise DataIOError(f'cannot write {path}: {exc}') from exc
    return path


def _read_csv(path: Path, **kwargs: Any) -> pd.DataFrame:
    try:
        return pd.read_csv(path, **kwargs)
    except FileNotFoundError as exc:
        raise DataIOError(f'{path} does not exist') from exc
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DataFormatError(f'cannot parse {path}: {exc}') from exc


def loss_curve_panels(curves: dict[str, list[pd.DataFrame]]) -> list[charts.Panel]:
    """
    Four panels (backbone/TSH x train/val) of per-epoch losses.

    Each entry of ``curves`` becomes one series per panel; several frames
    under one label are reduced to their per-epoch median.
    """
    panels = []
    for column in LOSS_COLUMNS:
        panel = charts.Panel(title=LOSS_TITLES[column], x_label='epoch', y_label='MSE')
        for label, frames in curves.items():
            epochs = min(len(frame) for frame in frames)
            stacked = np.stack([frame[column].to_numpy()[:epochs] for frame in frames])
            panel.series.append(
                charts.Series(
                    label=label,
                    x=[float(e + 1) for e in range(epochs)],
                    y=[float(v) for v in np.median(stacked, axis=0)],
                )
            )
        panels.append(panel)
    return panels


class ExperimentService:
    """
    Service class for experiment studies and reports.

    Provides methods for single study arms, the data-scaling and
    pretraining-comparison studies and run-directory reports.
    """

    @staticmethod
    def run_arm(data_dir: str | Path, config: dict[str, Any], out_dir: str | Path) -> dict[str, Any]:
        """Train one arm from a RunConfig document and return its outcome."""
        out_dir = Path(out_dir)
        dataset = DatasetService.load_dataset(Path(data_dir))
        run_config = RunConfig.from_dict(config)
        run_config = run_config.replace(
            backbone=TrainingService.fit_backbone_config(run_config.backbone, dataset)
        )
        run_config.write(out_dir)
        outcome = TrainingService.train_run(
            dataset,
            run_config.train,
            run_config.backbone,
            run_config.tsh,
            run_config.split,
            out_dir,
            run_config.to_dict(),
        )
        return outcome.to_dict()

    @staticmethod
    def dispatch(arms: list[StudyArm], data_dir: Path, parallel: bool = False) -> list[dict[str, Any]]:
        """
        Run every arm and return the outcomes in arm order.

        With ``parallel`` the arms go to the Celery broker as one group;
        otherwise they run one after another in this process.
        """
        signatures = [(str(data_dir), arm.config.to_dict(), str(arm.out_dir)) for arm in arms]
        if parallel:
            logger.info(f'Dispatching {len(arms)} study arms to Celery')
            result = group(run_study_arm.s(*args) for args in signatures).apply_async()
            return result.get()
        return [run_study_arm(*args) for args in signatures]

    @staticmethod
    def scale_study(
        data_dir: Path,
        base: RunConfig,
        fractions: list[float],
        seeds: int,
        out_dir: Path,
        parallel: bool = False,
    ) -> pd.DataFrame:
        """
        Train every fraction x seed combination on nested training subsets.

        Writes ``scale_summary.csv`` (one row per arm), ``scale_medians.csv``
        and ``loss_curves.svg`` (per-epoch medians over seeds, one series
        per fraction, log-log).
        """
        fractions = validate_fractions(fractions)
        if seeds < 1:
            raise ParameterError(f'seeds must be at least 1, got {seeds}')
        out_dir = Path(out_dir)
        arms = [
            StudyArm('scale', fraction, seed, arm_config(base, fraction, seed), _arm_dir(out_dir, fraction, seed))
            for fraction in fractions
            for seed in range(seeds)
        ]
        outcomes = ExperimentService.dispatch(arms, data_dir, parallel)

        rows = []
        for arm, outcome in zip(arms, outcomes):
            final = outcome['final_row']
            rows.append({
                'fraction': arm.fraction,
                'seed': arm.seed,
                'train_samples': outcome['train_samples'],
                'best_epoch': outcome['best_epoch'],
                **{column: final[column] for column in LOSS_COLUMNS},
                'test_recon_mse': outcome['test_metrics']['recon_mse'],
                'test_reg_mse': outcome['test_metrics']['reg_mse'],
            })
        frame = pd.DataFrame(rows, columns=list(SCALE_COLUMNS))
        _write_csv(frame, out_dir / 'scale_summary.csv', index=False)

        medians = frame.groupby('fraction')[['test_recon_mse', 'test_reg_mse']].median()
        _write_csv(medians, out_dir / 'scale_medians.csv')

        curves = {
            f'{fraction:.0%}': [MetricsLog.read_csv(arm.out_dir / 'metrics.csv').to_frame()
                                for arm in arms if arm.fraction == fraction]
            for fraction in fractions
        }
        _write_text(
            out_dir / 'loss_curves.svg',
            charts.line_panels(loss_curve_panels(curves), title='Loss curves by training fraction'),
        )
        for fraction, row in medians.iterrows():
            logger.info(
                f'fraction {fraction:.2f}: median test recon {row.test_recon_mse:.4e}, reg {row.test_reg_mse:.4e}'
            )
        return frame

    @staticmethod
    def compare_study(
        data_dir: Path,
        base: RunConfig,
        checkpoint: Path,
        fractions: list[float],
        seeds: int,
        out_dir: Path,
        parallel: bool = False,
    ) -> pd.DataFrame:
        """
        Train scratch and finetune arms with identical configs and seeds.

        The two arms of a (fraction, seed) pair differ only in their
        initialization. Writes ``compare.csv``, ``compare_medians.csv`` and
        ``compare.svg`` (median test regression loss against fraction).

        Raises:
            ConfigError: If the pretrained checkpoint does not exist.
        """
        fractions = validate_fractions(fractions)
        if seeds < 1:
            raise ParameterError(f'seeds must be at least 1, got {seeds}')
        checkpoint = Path(checkpoint)
        if not (checkpoint / HEADER_NAME).is_file():
            raise ConfigError(f'pretrained checkpoint {checkpoint} does not exist')
        out_dir = Path(out_dir)
        init = {
            'scratch': {'init': 'scratch', 'checkpoint': None},
            'finetune': {'init': 'checkpoint', 'checkpoint': str(checkpoint)},
        }

        arms = []
        for fraction in fractions:
            for seed in range(seeds):
                configs = {arm: arm_config(base, fraction, seed, **init[arm]) for arm in COMPARE_ARMS}
                differing = set(config_diff(configs['scratch'].to_dict(), configs['finetune'].to_dict()))
                if not differing <= INIT_PATHS:
                    raise ConfigError(f'comparison arms differ beyond initialization: {sorted(differing)}')
                for arm in COMPARE_ARMS:
                    arms.append(StudyArm(arm, fraction, seed, configs[arm], _arm_dir(out_dir / arm, fraction, seed)))
        outcomes = ExperimentService.dispatch(arms, data_dir, parallel)

        frame = pd.DataFrame(
            [
                {
                    'fraction': arm.fraction,
                    'seed': arm.seed,
                    'arm': arm.arm,
                    'train_samples': outcome['train_samples'],
                    'best_epoch': outcome['best_epoch'],
                    'test_recon_mse': outcome['test_metrics']['recon_mse'],
                    'test_reg_mse': outcome['test_metrics']['reg_mse'],
                }
                for arm, outcome in zip(arms, outcomes)
            ],
            columns=list(COMPARE_COLUMNS),
        )
        _write_csv(frame, out_dir / 'compare.csv', index=False)

        medians = frame.pivot_table(index='fraction', columns='arm', values='test_reg_mse', aggfunc='median')
        medians = medians[list(COMPARE_ARMS)]
        medians['gap'] = medians['finetune'] - medians['scratch']
        _write_csv(medians, out_dir / 'compare_medians.csv')

        panel = charts.Panel(title='Test regression loss', x_label='training fraction', y_label='MSE')
        for arm in COMPARE_ARMS:
            panel.series.append(
                charts.Series(arm, [float(f) for f in medians.index], [float(v) for v in medians[arm]])
            )
        _write_text(out_dir / 'compare.svg', charts.line_panels([panel], title='Finetune vs scratch'))
        for fraction, row in medians.iterrows():
            logger.info(
                f'fraction {fraction:.2f}: scratch {row.scratch:.4e}, finetune {row.finetune:.4e}, gap {row.gap:+.4e}'
            )
        return frame

    @staticmethod
    def _scatter_annotation(truth: np.ndarray, predicted: np.ndarray) -> str:
        try:
            return f'R2={r2_score(truth, predicted):.4f}  relL2={relative_l2(truth, predicted):.4f}'
        except (NumericalError, ParameterError):
            return 'R2 undefined'

    @staticmethod
    def _gallery(frame: pd.DataFrame) -> tuple[np.ndarray, np.ndarray]:
        """Rebuild (S, H, W, C) truth and reconstruction arrays from the long-format CSV."""
        shape = tuple(int(frame[c].max()) + 1 for c in ('sample', 'row', 'col', 'band'))
        arrays = {}
        for kind in ('truth', 'reconstruction'):
            part = frame[frame['kind'] == kind]
            array = np.zeros(shape)
            index = tuple(part[c].to_numpy() for c in ('sample', 'row', 'col', 'band'))
            array[index] = part['value'].to_numpy()
            arrays[kind] = array
        return arrays['truth'], arrays['reconstruction']

    @staticmethod
    def report(run_dir: Path, out_dir: Path) -> list[Path]:
        """
        Render a run directory's CSVs into SVGs; nothing is recomputed.

        ``metrics.csv`` is required. ``pred_vs_true.csv``,
        ``reconstructions.csv`` and ``sensitivity.csv`` are rendered when
        present.

        Raises:
            DataIOError: If ``metrics.csv`` is missing.
        """
        run_dir, out_dir = Path(run_dir), Path(out_dir)
        log = MetricsLog.read_csv(run_dir / 'metrics.csv')
        if not len(log):
            raise DataFormatError(f'{run_dir / "metrics.csv"} has no epochs')
        written = [
            _write_text(
                out_dir / 'loss_curves.svg',
                charts.line_panels(loss_curve_panels({'run': [log.to_frame()]}), title='Loss curves'),
            )
        ]

        predictions = run_dir / 'pred_vs_true.csv'
        if predictions.is_file():
            frame = _read_csv(predictions)
            indices = sorted(int(c[len('true_param'):]) for c in frame.columns if c.startswith('true_param'))
            for index in indices:
                truth = frame[f'true_param{index}'].to_numpy()
                predicted = frame[f'pred_param{index}'].to_numpy()
                written.append(
                    _write_text(
                        out_dir / f'scatter_param{index}.svg',
                        charts.scatter(
                            truth,
                            predicted,
                            title=f'param{index}: predicted vs true',
                            annotation=ExperimentService._scatter_annotation(truth, predicted),
                        ),
                    )
                )

        reconstructions = run_dir / 'reconstructions.csv'
        if reconstructions.is_file():
            truth, recon = ExperimentService._gallery(_read_csv(reconstructions))
            written.append(
                _write_text(out_dir / 'reconstructions.svg', charts.image_gallery(truth, recon, 'Reconstructions'))
            )

        sensitivity = run_dir / 'sensitivity.csv'
        if sensitivity.is_file():
            frame = _read_csv(sensitivity, index_col='feature').drop(index='r2', errors='ignore')
            k = sum(1 for label in frame.index if str(label).startswith('PC'))
            written.append(
                _write_text(
                    out_dir / 'sensitivity.svg',
                    charts.heatmap(
                        frame.to_numpy().T,
                        column_labels=[str(label) for label in frame.index],
                        row_labels=[str(label) for label in frame.columns],
                        title='Ridge sensitivity',
                        separator_after=k,
                    ),
                )
            )

        logger.info(f'Report for {run_dir}: {len(written)} charts written to {out_dir}')
        return written


