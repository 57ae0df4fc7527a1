"""
Parallel Processor for independent verification trials

Runs trials on a thread pool. Every trial receives its own generator spawned
from the run seed, so results never depend on the schedule.
"""
import logging
import threading
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from src.utils.config import MAX_WORKERS

logger = logging.getLogger(__name__)


@dataclass
class Task:
    """One trial: func(*args, **kwargs) keyed by id"""
    id: str
    func: Callable
    args: tuple = ()
    kwargs: Dict[str, Any] = field(default_factory=dict)
    priority: int = 0


class TaskError(RuntimeError):
    """A task failed inside the pool"""


class ParallelProcessor:
    """Fans independent trials out over a thread pool"""

    def __init__(self, max_workers: Optional[int] = None):
        self.max_workers = max(1, int(MAX_WORKERS if max_workers is None else max_workers))
        self.progress_callback = None
        self.cancel_flag = threading.Event()
        self.failures: Dict[str, Exception] = {}

    def set_progress_callback(self, callback: Callable):
        """callback(done, total, task_id) after each finished trial"""
        self.progress_callback = callback

    def cancel(self):
        self.cancel_flag.set()

    def is_cancelled(self) -> bool:
        return self.cancel_flag.is_set()

    def run_parallel(self, tasks: List[Task]) -> Dict[str, Any]:
        """
        Run trials, highest priority first

        Args:
            tasks: trials to run; a single worker runs them inline

        Returns:
            Results keyed by task id. A failed trial maps to {"error": message}
        """
        results = {}
        self.failures = {}
        self.cancel_flag.clear()

        # Higher priority first
        tasks = sorted(tasks, key=lambda t: t.priority, reverse=True)

        if self.max_workers == 1 or len(tasks) <= 1:
            for task in tasks:
                if self.is_cancelled():
                    break
                try:
                    results[task.id] = task.func(*task.args, **task.kwargs)
                except Exception as e:
                    logger.warning(f"Task {task.id} failed: {e}")
                    self.failures[task.id] = e
                    results[task.id] = {"error": str(e)}
            return results

        with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
            future_to_task = {
                executor.submit(task.func, *task.args, **task.kwargs): task
                for task in tasks
            }

            completed = 0
            total = len(tasks)

            for future in as_completed(future_to_task):
                if self.is_cancelled():
                    for f in future_to_task:
                        f.cancel()
                    break

                task = future_to_task[future]
                try:
                    results[task.id] = future.result()
                    completed += 1
                    if self.progress_callback:
                        self.progress_callback(completed, total, task.id)
                except Exception as e:
                    logger.warning(f"Task {task.id} failed: {e}")
                    self.failures[task.id] = e
                    results[task.id] = {"error": str(e)}

        return results

    def run_ordered(self, tasks: List[Task]) -> List[Any]:
        """
        Execute tasks in parallel and return results in task order

        Raises:
            TaskError: if any task failed (the first failure in task order),
                chained to the exception the task raised
        """
        results = self.run_parallel(tasks)
        ordered = []
        for task in tasks:
            if task.id not in results:
                raise TaskError(f"task {task.id} was cancelled")
            result = results[task.id]
            if isinstance(result, dict) and set(result) == {"error"}:
                raise TaskError(f"task {task.id} failed: {result['error']}") from self.failures.get(task.id)
            ordered.append(result)
        return ordered

    def map_trials(self, func: Callable, seed: int, count: int, prefix: str = "trial") -> List[Any]:
        """Run func(rng) for `count` seed-partitioned generators, in trial order"""
        tasks = [
            Task(id=f"{prefix}_{i}", func=func, args=(rng,))
            for i, rng in enumerate(spawn_generators(seed, count))
        ]
        return self.run_ordered(tasks)


def spawn_generators(seed: int, count: int) -> List[np.random.Generator]:
    """Independent generators, one per trial, derived from a single seed"""
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.default_rng(child) for child in children]
