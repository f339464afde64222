"""
Temporal worker process for Monte Carlo extrapolation experiments.

Workers poll the Temporal server for tasks and execute workflow and
activity code. This worker handles the MonteCarloExperiment workflow and
its activities (run_trial, write_experiment_outputs).

To run:
    python -m pattern_extrapolation.run_worker

Prerequisites:
    - Temporal server reachable at TEMPORAL_HOST (default localhost:7233)
    - Optional settings in .env (TEMPORAL_TASK_QUEUE, EXPERIMENT_WORKERS)
    - EXPERIMENT_STAGING_DIR shared with every worker of the task queue
"""

import asyncio
import logging

from temporalio.client import Client
from temporalio.worker import Worker

from pattern_extrapolation.activities import run_trial, write_experiment_outputs
from pattern_extrapolation.config import TASK_QUEUE, TEMPORAL_HOST, default_workers
from pattern_extrapolation.workflows import MonteCarloExperiment


async def main() -> None:
    """
    Start the Temporal worker and begin polling for tasks.

    Runs until interrupted (Ctrl+C) or the process is terminated.
    """
    logging.basicConfig(level=logging.INFO)
    client = await Client.connect(TEMPORAL_HOST)

    worker = Worker(
        client,
        task_queue=TASK_QUEUE,
        workflows=[MonteCarloExperiment],
        activities=[run_trial, write_experiment_outputs],
        # trials run in threads; this bounds concurrent CPU-bound trials
        max_concurrent_activities=default_workers(),
    )

    await worker.run()


if __name__ == "__main__":
    asyncio.run(main())
