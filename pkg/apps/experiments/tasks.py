"""
Celery tasks for study fan-out.

One task trains one study arm into its own run directory.
"""
import logging
from typing import Any

from celery import shared_task

logger = logging.getLogger('icf_inverse')


@shared_task
def run_study_arm(data_dir: str, config: dict[str, Any], out_dir: str) -> dict[str, Any]:
    """
    Train and evaluate one (arm, fraction, seed) combination.

    Args:
        data_dir: Dataset container directory, read only.
        config: A RunConfig document.
        out_dir: Run directory owned by this task.

    Returns:
        The run outcome as a JSON-friendly dict.
    """
    from apps.experiments.services import ExperimentService

    outcome = ExperimentService.run_arm(data_dir, config, out_dir)
    logger.info(f'Study arm finished: {out_dir}')
    return outcome
