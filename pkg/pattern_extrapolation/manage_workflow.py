"""
Management CLI for running experiment workflows.

Usage:
    python -m pattern_extrapolation.manage_workflow progress <workflow_id>
    python -m pattern_extrapolation.manage_workflow list [--limit 10]
    python -m pattern_extrapolation.manage_workflow pause <workflow_id>
    python -m pattern_extrapolation.manage_workflow resume <workflow_id>
    python -m pattern_extrapolation.manage_workflow cancel <workflow_id>

A paused experiment finishes its current batch of trials and then waits.
"""

import argparse
import asyncio
import sys
from typing import Any, Dict, List, Optional

from temporalio.client import Client, WorkflowHandle

from pattern_extrapolation.config import TEMPORAL_HOST
from pattern_extrapolation.workflows import MonteCarloExperiment


def format_progress(workflow_id: str, progress: Dict[str, Any]) -> str:
    lines = [
        "=" * 60,
        f"Experiment Progress: {workflow_id}",
        "=" * 60,
        f"Trials Completed   : {progress['trials_completed']} / {progress['trials_total']}",
    ]
    if progress["mean_best_residual"] is not None:
        lines.append(f"Mean Best Residual : {progress['mean_best_residual']:.6g}")
        lines.append(f"Best Residual      : {progress['best_residual']:.6g}")
    else:
        lines.append("Mean Best Residual : N/A (no trials yet)")
    lines.append(f"Paused             : {'yes' if progress['paused'] else 'no'}")
    lines.append("=" * 60)
    return "\n".join(lines)


async def query_progress(client: Client, workflow_id: str) -> int:
    try:
        handle: WorkflowHandle = client.get_workflow_handle(workflow_id)
        progress = await handle.query(MonteCarloExperiment.get_progress)
    except Exception as e:
        print(f"Error querying workflow: {e}", file=sys.stderr)
        print("Workflow ID may be invalid or workflow may have completed.", file=sys.stderr)
        return 1
    print(format_progress(workflow_id, progress) + "\n")
    return 0


async def list_workflows(client: Client, limit: int = 10) -> int:
    try:
        print("=" * 100)
        print(f"{'Workflow ID':<40} {'Status':<15} {'Start Time':<25}")
        print("=" * 100)
        count = 0
        async for execution in client.list_workflows("WorkflowType = 'MonteCarloExperiment'"):
            if count >= limit:
                break
            start_time = execution.start_time.strftime("%Y-%m-%d %H:%M:%S") if execution.start_time else "N/A"
            status = execution.status.name if execution.status else "UNKNOWN"
            print(f"{execution.id:<40} {status:<15} {start_time:<25}")
            count += 1
        print("=" * 100)
        print(f"\nShowing {count} workflow(s)")
    except Exception as e:
        print(f"Error listing workflows: {e}", file=sys.stderr)
        return 1
    return 0


async def send_signal(client: Client, workflow_id: str, signal: str) -> int:
    """Send the pause or resume signal."""
    try:
        handle: WorkflowHandle = client.get_workflow_handle(workflow_id)
        await handle.signal(signal)
    except Exception as e:
        print(f"Error sending {signal} to workflow: {e}", file=sys.stderr)
        return 1
    print(f"✓ {signal.capitalize()} signal sent to workflow: {workflow_id}")
    return 0


async def cancel_workflow(client: Client, workflow_id: str) -> int:
    try:
        handle: WorkflowHandle = client.get_workflow_handle(workflow_id)
        await handle.cancel()
    except Exception as e:
        print(f"Error cancelling workflow: {e}", file=sys.stderr)
        return 1
    print(f"✓ Cancellation requested for workflow: {workflow_id}")
    print("  Running trials finish; no further trials are scheduled.")
    return 0


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        description="Manage and monitor experiment workflows",
        epilog="Example: python -m pattern_extrapolation.manage_workflow progress <workflow_id>",
    )
    subparsers = parser.add_subparsers(dest="command", required=True, help="Command to execute")

    for name, help_text in (
        ("progress", "Query experiment progress"),
        ("pause", "Pause after the current batch of trials"),
        ("resume", "Resume a paused experiment"),
        ("cancel", "Cancel a running experiment"),
    ):
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument("workflow_id", help="Workflow execution ID")

    list_parser = subparsers.add_parser("list", help="List recent experiments")
    list_parser.add_argument(
        "--limit",
        type=int,
        default=10,
        help="Maximum number of workflows to display (default: 10)",
    )
    return parser.parse_args(argv)


async def main(argv: Optional[List[str]] = None) -> int:
    args = parse_args(argv)
    client = await Client.connect(TEMPORAL_HOST)

    if args.command == "progress":
        return await query_progress(client, args.workflow_id)
    if args.command == "list":
        return await list_workflows(client, args.limit)
    if args.command == "cancel":
        return await cancel_workflow(client, args.workflow_id)
    return await send_signal(client, args.workflow_id, args.command)


if __name__ == "__main__":
    sys.exit(asyncio.run(main()))
