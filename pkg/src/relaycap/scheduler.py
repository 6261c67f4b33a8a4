from concurrent.futures import ThreadPoolExecutor, wait
from typing import Any, Callable, Iterable

from .schemas import Task, TaskResult
from .trace import log_event


class Scheduler:
    """Runs independent tasks on a thread pool; results come back in task order."""

    def __init__(
        self,
        workers: int | None = None,
    ):
        self.workers = workers

    def schedule_tasks(
        self,
        tasks: Iterable[Task],
        handlers: dict[str, Callable[..., Any]],
        execution_start: float,
    ):
        log_event(execution_start, "🚀", "SCHEDULER", "Started scheduling tasks")
        task_results: dict[int, TaskResult] = {}
        processed_tasks: list[Task] = []

        futures = []
        with ThreadPoolExecutor(max_workers=self.workers) as executor:
            for task in tasks:
                processed_tasks.append(task)
                futures.append(
                    executor.submit(
                        self._start_task,
                        task=task,
                        task_results=task_results,
                        handlers=handlers,
                        execution_start=execution_start,
                    )
                )

            wait(futures)
        log_event(
            execution_start,
            "✅",
            "SCHEDULER",
            f"All {len(processed_tasks)} tasks completed",
        )

        return [task_results[task.idx] for task in sorted(processed_tasks, key=lambda t: t.idx)]

    def _start_task(
        self,
        task: Task,
        task_results: dict[int, TaskResult],
        handlers: dict[str, Callable[..., Any]],
        execution_start: float,
    ):
        try:
            handler = handlers[task.name]
            value = handler(**task.args)
        except Exception as e:
            error_msg = f"ERROR: {e}"
            task_results[task.idx] = TaskResult(
                idx=task.idx,
                name=task.name,
                ok=False,
                error=error_msg,
            )
            log_event(
                execution_start,
                "❌",
                "SCHEDULER",
                f"FAILED task {task.idx}: {task.name} - {error_msg}",
            )
            return

        task_results[task.idx] = TaskResult(
            idx=task.idx,
            name=task.name,
            ok=True,
            value=value,
        )
        log_event(
            execution_start,
            "📦",
            "SCHEDULER",
            f"Completed task {task.idx}: {task.name}",
        )
