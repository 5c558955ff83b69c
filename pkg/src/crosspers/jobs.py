"""Ordered execution of independent jobs.

Jobs run on worker threads behind an :class:`asyncio.Semaphore`; results are
always returned in job-index order so seeded runs do not depend on scheduling.
"""

from __future__ import annotations

import asyncio
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

from crosspers.progress import JobStats
from crosspers.utils import alog_call, resolve_n_jobs

logger = logging.getLogger(__name__)

T = TypeVar("T")


@alog_call
async def gather_ordered(
    jobs: Sequence[Callable[[], T]],
    n_jobs: int = 1,
    label: str = "jobs",
) -> list[T]:
    """Run callables concurrently and return their results in input order.

    Args:
        jobs: Zero-argument callables.
        n_jobs: Maximum number of concurrent workers, 0 means all CPUs.
        label: Name used in log messages and statistics.

    Returns:
        list[T]: Results, ``results[i]`` belongs to ``jobs[i]``.
    """
    n_workers = resolve_n_jobs(n_jobs)
    stats = JobStats(label=label, n_jobs=len(jobs), n_workers=n_workers)
    semaphore = asyncio.Semaphore(n_workers)

    async def run(job: Callable[[], T]) -> T:
        async with semaphore:
            result = await asyncio.to_thread(job)
        stats.done()
        return result

    results = await asyncio.gather(*(run(job) for job in jobs))
    logger.debug(
        "%s: %d jobs on %d workers in %.2f s",
        label,
        len(jobs),
        n_workers,
        stats.elapsed_seconds,
    )
    return list(results)


def map_ordered(
    jobs: Sequence[Callable[[], T]],
    n_jobs: int = 1,
    label: str = "jobs",
) -> list[T]:
    """Synchronous facade of :func:`gather_ordered`, serial for ``n_jobs == 1``.

    Called from inside a running event loop, the jobs get their own loop on a
    helper thread.
    """
    if n_jobs == 1 or len(jobs) <= 1:
        stats = JobStats(label=label, n_jobs=len(jobs))
        results = []
        for job in jobs:
            results.append(job())
            stats.done()
        return results
    coro = gather_ordered(jobs, n_jobs=n_jobs, label=label)
    try:
        asyncio.get_running_loop()
    except RuntimeError:
        return asyncio.run(coro)
    logger.debug("%s: event loop is running, gathering on a helper thread", label)
    with ThreadPoolExecutor(max_workers=1) as executor:
        return executor.submit(asyncio.run, coro).result()
