"""
In-process experiment runner.

Executes the same activities the MonteCarloExperiment workflow schedules,
directly on an asyncio event loop, for runs without a Temporal server.
Trials run in worker threads, at most `workers` at a time; outputs are
assembled in trial-index order, so the bytes written don't depend on the
concurrency.
"""

import asyncio
import logging
import tempfile
import uuid
from typing import Optional

from temporalio.exceptions import ApplicationError

from pattern_extrapolation.activities import STORAGE_FAILURE, run_trial, write_experiment_outputs
from pattern_extrapolation.models import (
    ExperimentConfig,
    ExperimentOutputs,
    TrialInput,
    WriteOutputsInput,
)
from pattern_extrapolation.storage import write_partial_marker

logger = logging.getLogger(__name__)


async def run_experiment_async(
    config: ExperimentConfig,
    staging_dir: Optional[str] = None,
) -> ExperimentOutputs:
    """
    Run every trial of `config` and write its outputs.

    Args:
        config: Experiment configuration
        staging_dir: Directory for per-trial staging files; a private
            temporary directory when None

    Raises:
        temporalio.exceptions.ApplicationError: from the first failing trial
            or from output assembly
    """
    if staging_dir is None:
        with tempfile.TemporaryDirectory(prefix="pattern-extrapolation-") as tmp:
            return await run_experiment_async(config, tmp)

    run_id = str(uuid.uuid4())
    semaphore = asyncio.Semaphore(config.workers)

    async def trial(index: int) -> None:
        async with semaphore:
            summary = await run_trial(TrialInput(
                run_id=run_id,
                experiment=config,
                trial_index=index,
                staging_dir=staging_dir,
            ))
            logger.debug("trial %d done, best residual %.6g", index, summary.best_residual)

    logger.info("running %d trials with %d workers", config.trials, config.workers)
    try:
        await asyncio.gather(*(trial(index) for index in config.trial_indices))
    except ApplicationError as e:
        if e.type == STORAGE_FAILURE:
            write_partial_marker(config.out_dir, str(e))
        raise

    return await write_experiment_outputs(WriteOutputsInput(
        run_id=run_id,
        experiment=config,
        staging_dir=staging_dir,
    ))


def run_experiment(config: ExperimentConfig, staging_dir: Optional[str] = None) -> ExperimentOutputs:
    """Synchronous wrapper around run_experiment_async."""
    return asyncio.run(run_experiment_async(config, staging_dir))
