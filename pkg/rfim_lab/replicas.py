"""
replicas.py - Parallel replica execution

Every disorder average in the lab is a loop over replica indices. Each task
gets only its index, derives its own seed from it, and returns a value; the
pool hands results back in index order, so reductions never depend on which
worker finished first or how many workers there were.

A replica that raises is recorded with its error and index instead of
aborting the whole run.

Usage:
    from functools import partial
    from rfim_lab.replicas import run_replicas

    batch = run_replicas(partial(my_task, params=params), count=1000, threads=8)
    values = batch.values          # successful results, index order
    batch.failed                   # [(index, "DomainError: ...")]
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Generic, List, Optional, Tuple, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")


@dataclass(frozen=True)
class ReplicaOutcome(Generic[T]):
    """Result or error of one replica."""
    index: int
    value: Optional[T] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class ReplicaBatch(Generic[T]):
    """
    Outcomes of a replica run, in index order.

    Attributes:
        outcomes: One entry per requested index.
    """
    outcomes: List[ReplicaOutcome] = field(default_factory=list)

    @property
    def values(self) -> List[T]:
        return [o.value for o in self.outcomes if o.ok]

    @property
    def indices(self) -> List[int]:
        return [o.index for o in self.outcomes if o.ok]

    @property
    def failed(self) -> List[Tuple[int, str]]:
        return [(o.index, o.error) for o in self.outcomes if not o.ok]

    def __len__(self) -> int:
        return len(self.outcomes)


def _guarded(task: Callable[[int], Any], index: int) -> ReplicaOutcome:
    try:
        return ReplicaOutcome(index=index, value=task(index))
    except Exception as e:
        return ReplicaOutcome(index=index, error=f"{type(e).__name__}: {e}")


class _Bound:
    """Picklable pairing of a task with _guarded for Executor.map."""

    def __init__(self, task: Callable[[int], Any]):
        self.task = task

    def __call__(self, index: int) -> ReplicaOutcome:
        return _guarded(self.task, index)


def run_replicas(
    task: Callable[[int], T],
    count: int,
    threads: int = 1,
    start: int = 0,
) -> ReplicaBatch:
    """
    Run task(index) for index in [start, start + count).

    Args:
        task: Picklable callable (module-level function or functools.partial).
        count: Number of replicas.
        threads: Worker processes; 1 runs inline.
        start: First replica index.

    Returns:
        ReplicaBatch: Outcomes in index order.
    """
    indices = range(start, start + count)
    runner = _Bound(task)
    if threads <= 1 or count <= 1:
        outcomes = [runner(i) for i in indices]
    else:
        chunksize = max(1, count // (threads * 8))
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(runner, indices, chunksize=chunksize))
    batch = ReplicaBatch(outcomes)
    if batch.failed:
        first_index, first_error = batch.failed[0]
        logger.warning(
            f"{len(batch.failed)} of {count} replicas failed "
            f"(first: replica {first_index}: {first_error})"
        )
    return batch
