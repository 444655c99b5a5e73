"""Persistent job queue.

Jobs on the same scene run strictly in submission order; jobs on
different scenes may run in parallel.  Failed jobs retry once before
landing in the failed state.  Queue state persists to JSON on every
mutation; on reload, jobs that were running when the process died go
back to queued (crash recovery).  All mutations append to an event log
that clients can long-poll with a cursor.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import JobStateError, NotFoundError

JOB_KINDS = ("objects", "train", "render", "sweep")
DEFAULT_MAX_ATTEMPTS = 2  # one retry


class JobStatus(str, Enum):
    QUEUED = "queued"
    RUNNING = "running"
    SUCCEEDED = "succeeded"
    FAILED = "failed"
    CANCELLED = "cancelled"


@dataclass(slots=True)
class Job:
    job_id: str
    scene_id: str
    kind: str
    params: dict
    status: JobStatus = JobStatus.QUEUED
    attempts: int = 0
    max_attempts: int = DEFAULT_MAX_ATTEMPTS
    seq: int = 0
    idempotency_key: str | None = None
    cancel_requested: bool = False
    result: dict | None = None
    error: dict | None = None

    def to_document(self) -> dict:
        return {
            "job_id": self.job_id,
            "scene_id": self.scene_id,
            "kind": self.kind,
            "params": self.params,
            "status": self.status.value,
            "attempts": self.attempts,
            "max_attempts": self.max_attempts,
            "seq": self.seq,
            "idempotency_key": self.idempotency_key,
            "cancel_requested": self.cancel_requested,
            "result": self.result,
            "error": self.error,
        }

    @staticmethod
    def from_document(doc: dict) -> "Job":
        return Job(
            job_id=doc["job_id"],
            scene_id=doc["scene_id"],
            kind=doc["kind"],
            params=doc["params"],
            status=JobStatus(doc["status"]),
            attempts=doc["attempts"],
            max_attempts=doc["max_attempts"],
            seq=doc["seq"],
            idempotency_key=doc.get("idempotency_key"),
            cancel_requested=doc.get("cancel_requested", False),
            result=doc.get("result"),
            error=doc.get("error"),
        )


class JobQueue:
    """Thread-safe queue with JSON persistence and an event log."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._lock = threading.Condition()
        self._jobs: dict[str, Job] = {}
        self._by_key: dict[str, str] = {}
        self._next_seq = 1
        self._events: list[dict] = []
        self._next_event = 1
        if self.path is not None and self.path.exists():
            self._load()
            self.recover()

    # -- persistence ---------------------------------------------------------

    def _load(self) -> None:
        doc = json.loads(self.path.read_text())
        self._jobs = {j["job_id"]: Job.from_document(j) for j in doc["jobs"]}
        self._by_key = {
            j.idempotency_key: j.job_id
            for j in self._jobs.values()
            if j.idempotency_key
        }
        self._next_seq = doc["next_seq"]
        self._events = doc.get("events", [])
        self._next_event = doc.get("next_event", len(self._events) + 1)

    def _persist_locked(self) -> None:
        if self.path is None:
            return
        doc = {
            "jobs": [j.to_document() for j in self._jobs.values()],
            "next_seq": self._next_seq,
            "events": self._events[-1000:],
            "next_event": self._next_event,
        }
        self.path.parent.mkdir(parents=True, exist_ok=True)
        tmp = self.path.with_name(self.path.name + ".part")
        tmp.write_text(json.dumps(doc, indent=2))
        os.replace(tmp, self.path)

    def _emit_locked(self, kind: str, job: Job, **data) -> None:
        self._events.append(
            {
                "event_seq": self._next_event,
                "type": kind,
                "job_id": job.job_id,
                "scene_id": job.scene_id,
                "status": job.status.value,
                **data,
            }
        )
        self._next_event += 1
        self._lock.notify_all()

    # -- queue operations ------------------------------------------------------

    def submit(
        self,
        scene_id: str,
        kind: str,
        params: dict,
        idempotency_key: str | None = None,
    ) -> tuple[Job, bool]:
        """Enqueue a job; an already-seen idempotency key returns the
        original job.  Returns (job, created)."""
        if kind not in JOB_KINDS:
            raise JobStateError(f"unknown job kind {kind!r}")
        with self._lock:
            if idempotency_key and idempotency_key in self._by_key:
                return self._jobs[self._by_key[idempotency_key]], False
            seq = self._next_seq
            self._next_seq += 1
            job = Job(
                job_id=f"j-{seq:06d}",
                scene_id=scene_id,
                kind=kind,
                params=params,
                seq=seq,
                idempotency_key=idempotency_key,
            )
            self._jobs[job.job_id] = job
            if idempotency_key:
                self._by_key[idempotency_key] = job.job_id
            self._emit_locked("job_queued", job)
            self._persist_locked()
            return job, True

    def get(self, job_id: str) -> Job:
        with self._lock:
            job = self._jobs.get(job_id)
            if job is None:
                raise NotFoundError(f"job {job_id!r} not found")
            return job

    def list_jobs(self, scene_id: str | None = None) -> list[Job]:
        with self._lock:
            jobs = sorted(self._jobs.values(), key=lambda j: j.seq)
            if scene_id is not None:
                jobs = [j for j in jobs if j.scene_id == scene_id]
            return jobs

    def claim_next(self) -> Job | None:
        """Oldest queued job whose scene has nothing running; marks it
        running.  Returns None when nothing is claimable."""
        with self._lock:
            busy = {
                j.scene_id for j in self._jobs.values() if j.status == JobStatus.RUNNING
            }
            for job in sorted(self._jobs.values(), key=lambda j: j.seq):
                if job.status is not JobStatus.QUEUED or job.scene_id in busy:
                    continue
                job.status = JobStatus.RUNNING
                job.attempts += 1
                self._emit_locked("job_started", job, attempt=job.attempts)
                self._persist_locked()
                return job
            return None

    def mark_succeeded(self, job_id: str, result: dict) -> Job:
        with self._lock:
            job = self._require_running(job_id)
            job.status = JobStatus.SUCCEEDED
            job.result = result
            job.error = None
            self._emit_locked("job_succeeded", job)
            self._persist_locked()
            return job

    def mark_failed(self, job_id: str, error: dict) -> Job:
        """Failure requeues until attempts reach max_attempts."""
        with self._lock:
            job = self._require_running(job_id)
            job.error = error
            if job.cancel_requested:
                job.status = JobStatus.CANCELLED
                self._emit_locked("job_cancelled", job)
            elif job.attempts < job.max_attempts:
                job.status = JobStatus.QUEUED
                self._emit_locked("job_retried", job, error=error)
            else:
                job.status = JobStatus.FAILED
                self._emit_locked("job_failed", job, error=error)
            self._persist_locked()
            return job

    def cancel(self, job_id: str) -> Job:
        with self._lock:
            job = self.get(job_id)
            if job.status is JobStatus.QUEUED:
                job.status = JobStatus.CANCELLED
                self._emit_locked("job_cancelled", job)
                self._persist_locked()
            elif job.status is JobStatus.RUNNING:
                job.cancel_requested = True
                self._emit_locked("job_cancel_requested", job)
                self._persist_locked()
            elif job.status in (JobStatus.SUCCEEDED, JobStatus.FAILED):
                raise JobStateError(f"job {job_id} already {job.status.value}")
            return job

    def recover(self) -> None:
        """Crash recovery: anything running when state was saved goes
        back to queued (its attempt already counted)."""
        with self._lock:
            for job in self._jobs.values():
                if job.status is JobStatus.RUNNING:
                    job.status = JobStatus.QUEUED
                    self._emit_locked("job_recovered", job)
            self._persist_locked()

    def _require_running(self, job_id: str) -> Job:
        job = self.get(job_id)
        if job.status is not JobStatus.RUNNING:
            raise JobStateError(f"job {job_id} is {job.status.value}, not running")
        return job

    # -- events ---------------------------------------------------------------

    def events_after(self, after: int) -> list[dict]:
        with self._lock:
            return [e for e in self._events if e["event_seq"] > after]

    def wait_events(self, after: int, timeout: float) -> list[dict]:
        """Long-poll: block until events beyond the cursor exist (or the
        timeout passes); returns whatever is available."""
        deadline = None if timeout <= 0 else timeout
        with self._lock:
            if deadline is not None:
                self._lock.wait_for(
                    lambda: self._next_event - 1 > after, timeout=deadline
                )
            return [e for e in self._events if e["event_seq"] > after]

    def notify_all(self) -> None:
        with self._lock:
            self._lock.notify_all()
