"""In-process job store for long-running batch runs."""

from __future__ import annotations

import threading
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable


@dataclass
class Job:
    job_id: str
    mode: str
    label: str
    out_dir: str
    state: str = "queued"  # queued | running | done | failed
    summary: dict | None = None
    error: str | None = None
    n_failed: int = 0


@dataclass
class JobStore:
    max_workers: int = 2
    _jobs: dict[str, Job] = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock)
    _counter: int = 0
    _pool: ThreadPoolExecutor | None = None

    def _executor(self) -> ThreadPoolExecutor:
        if self._pool is None:
            self._pool = ThreadPoolExecutor(max_workers=self.max_workers)
        return self._pool

    def create(self, mode: str, label: str, out_dir: str) -> Job:
        with self._lock:
            self._counter += 1
            job = Job(job_id=f"job-{self._counter:05d}", mode=mode, label=label, out_dir=out_dir)
            self._jobs[job.job_id] = job
            return job

    def get(self, job_id: str) -> Job | None:
        with self._lock:
            return self._jobs.get(job_id)

    def run_sync(self, job: Job, fn: Callable[[], dict]) -> Job:
        self._execute(job, fn)
        return job

    def submit(self, job: Job, fn: Callable[[], dict]) -> Job:
        self._executor().submit(self._execute, job, fn)
        return job

    def _execute(self, job: Job, fn: Callable[[], dict]) -> None:
        with self._lock:
            job.state = "running"
        try:
            summary = fn()
        except Exception as exc:  # noqa: BLE001 - job isolation
            with self._lock:
                job.state = "failed"
                job.error = f"{type(exc).__name__}: {exc}\n{traceback.format_exc(limit=4)}"
            return
        with self._lock:
            job.summary = summary
            job.n_failed = _count_failed(summary)
            job.state = "done"


def _count_failed(summary: dict) -> int:
    total = 0
    for section in ("closed_loop", "open_loop", "baseline"):
        if section in summary:
            total += int(summary[section].get("n_failed", 0))
    return total
