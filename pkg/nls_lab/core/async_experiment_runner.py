"""
Async fan-out of independent, CPU-bound jobs (experiment runs, branch samples) onto a bounded
thread pool.
"""

import asyncio
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, Hashable, List, Optional, Sequence, Tuple, TypeVar

from .boundstate import DELTA_MAX, BranchRow, bound_state_branch
from .spectral import SpectralDecomposition

logger = logging.getLogger(__name__)

K = TypeVar("K", bound=Hashable)
R = TypeVar("R")


class AsyncExperimentRunner:
    """Runs independent jobs concurrently, at most ``max_concurrent`` at a time."""

    def __init__(self, max_concurrent: int = 1):
        if max_concurrent < 1:
            raise ValueError(f"max_concurrent must be >= 1, got {max_concurrent}")
        self.max_concurrent = max_concurrent

    async def map_concurrent(
        self,
        jobs: Sequence[Tuple[K, Callable[[], R]]],
        show_progress: bool = False,
    ) -> Tuple[Dict[K, R], Dict[K, BaseException]]:
        """
        Run (key, thunk) jobs in a thread pool.

        Args:
            jobs: Pairs of a result key and a zero-argument callable
            show_progress: Log one line per finished job

        Returns:
            (results by key, exceptions by key); one failing job does not cancel the others
        """
        semaphore = asyncio.Semaphore(self.max_concurrent)
        loop = asyncio.get_running_loop()

        with ThreadPoolExecutor(max_workers=self.max_concurrent) as pool:

            async def run_single(key: K, job: Callable[[], R]) -> Tuple[K, R]:
                async with semaphore:
                    result = await loop.run_in_executor(pool, job)
                    if show_progress:
                        logger.info(f"Finished job {key!r}")
                    return key, result

            logger.info(f"Starting {len(jobs)} jobs with max {self.max_concurrent} concurrent")
            outcomes = await asyncio.gather(*(run_single(key, job) for key, job in jobs),
                                            return_exceptions=True)

        results: Dict[K, R] = {}
        failures: Dict[K, BaseException] = {}
        for (key, _), outcome in zip(jobs, outcomes):
            if isinstance(outcome, BaseException):
                logger.error(f"Job {key!r} failed: {outcome}")
                failures[key] = outcome
            else:
                results[key] = outcome[1]
        logger.info(f"Batch complete: {len(results)}/{len(jobs)} successful")
        return results, failures

    async def bound_state_branch(self, moduli: Sequence[float], dec: SpectralDecomposition,
                                 delta_max: float = DELTA_MAX) -> List[BranchRow]:
        """Concurrent version of ``bound_state_branch``; rows come back in input order."""

        def sample(r: float) -> Callable[[], BranchRow]:
            return lambda: bound_state_branch([r], dec, delta_max)[0]

        values = [float(r) for r in moduli]
        results, failures = await self.map_concurrent([(i, sample(r)) for i, r in enumerate(values)])
        if failures:
            first = min(failures)
            raise failures[first]
        return [results[i] for i in range(len(values))]


def run_sync(coro):  # type: ignore[no-untyped-def]
    """Run a coroutine from synchronous code (the command line)."""
    return asyncio.run(coro)


def default_runner(threads: Optional[int]) -> AsyncExperimentRunner:
    """Runner with ``threads`` workers; None or 0 means one."""
    return AsyncExperimentRunner(max(1, threads or 1))
