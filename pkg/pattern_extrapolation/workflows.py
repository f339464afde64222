"""
Temporal workflow for Monte Carlo extrapolation experiments.

Workflows are the orchestration layer in Temporal: they schedule
activities, keep state durably and survive worker restarts. Workflow code
must be deterministic (no random numbers, current time or direct I/O); all
randomness lives in the activities and is seeded from the trial index.
"""

import asyncio
from datetime import timedelta
from typing import List, Optional

from temporalio import workflow
from temporalio.common import RetryPolicy

with workflow.unsafe.imports_passed_through():
    from pattern_extrapolation.activities import run_trial, write_experiment_outputs
    from pattern_extrapolation.models import (
        ExperimentInput,
        ExperimentOutputs,
        TrialInput,
        TrialSummary,
        WriteOutputsInput,
    )


@workflow.defn
class MonteCarloExperiment:
    """
    Runs every trial of an experiment, then assembles the outputs.

    Trials are scheduled in batches of `experiment.workers` concurrent
    activities, which bounds the load on the worker pool. Only trial
    metadata passes through the workflow; rows travel through staging files.

    Supports runtime control via signals:
    - pause: finish the current batch, then wait
    - resume: continue with the next batch
    - Request cancellation via Temporal's standard cancel mechanism
    """

    def __init__(self) -> None:
        self._trials_total = 0
        self._trials_completed = 0
        self._best_residual: Optional[float] = None
        self._residual_sum = 0.0
        self._is_paused = False

    @workflow.signal
    def pause(self) -> None:
        self._is_paused = True
        workflow.logger.info("Experiment paused by signal")

    @workflow.signal
    def resume(self) -> None:
        self._is_paused = False
        workflow.logger.info("Experiment resumed by signal")

    @workflow.query
    def get_progress(self) -> dict:
        """
        Returns:
            Dictionary with current progress:
                - trials_completed: Trials finished so far
                - trials_total: Trials in the experiment
                - mean_best_residual: Mean over finished trials of each
                  trial's best residual (None before the first trial)
                - best_residual: Smallest residual seen so far
                - paused: Whether a pause signal is in effect
        """
        return {
            "trials_completed": self._trials_completed,
            "trials_total": self._trials_total,
            "mean_best_residual": (
                self._residual_sum / self._trials_completed
                if self._trials_completed > 0
                else None
            ),
            "best_residual": self._best_residual,
            "paused": self._is_paused,
        }

    def _record(self, summary: TrialSummary) -> None:
        self._trials_completed += 1
        self._residual_sum += summary.best_residual
        if self._best_residual is None or summary.best_residual < self._best_residual:
            self._best_residual = summary.best_residual

    @workflow.run
    async def run(self, input: ExperimentInput) -> ExperimentOutputs:
        experiment = input.experiment

        # Trials are deterministic; retries only cover lost workers
        trial_retry_policy = RetryPolicy(
            initial_interval=timedelta(seconds=1),
            maximum_interval=timedelta(seconds=30),
            backoff_coefficient=2.0,
            maximum_attempts=3,
        )
        outputs_retry_policy = RetryPolicy(
            initial_interval=timedelta(milliseconds=500),
            maximum_interval=timedelta(seconds=10),
            backoff_coefficient=2.0,
            maximum_attempts=5,
        )

        indices: List[int] = list(experiment.trial_indices)
        self._trials_total = len(indices)
        batch_size = experiment.workers

        for start in range(0, len(indices), batch_size):
            await workflow.wait_condition(lambda: not self._is_paused)

            batch = indices[start:start + batch_size]
            summaries = await asyncio.gather(*(
                workflow.execute_activity(
                    run_trial,
                    TrialInput(
                        run_id=input.run_id,
                        experiment=experiment,
                        trial_index=index,
                        staging_dir=input.staging_dir,
                    ),
                    start_to_close_timeout=timedelta(hours=1),
                    retry_policy=trial_retry_policy,
                )
                for index in batch
            ))
            for summary in summaries:
                self._record(summary)
            workflow.logger.info(f"Finished {self._trials_completed}/{self._trials_total} trials")

        return await workflow.execute_activity(
            write_experiment_outputs,
            WriteOutputsInput(
                run_id=input.run_id,
                experiment=experiment,
                staging_dir=input.staging_dir,
            ),
            start_to_close_timeout=timedelta(minutes=5),
            retry_policy=outputs_retry_policy,
        )
