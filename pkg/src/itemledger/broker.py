"""Deterministic simulated job executor.

Stands in for a Grid/Cloud pipeline service: jobs are queued by
submission order and drained synchronously by advance(). Every result is
a pure function of the broker config and the submission sequence, which
is what makes provenance tests reproducible. Randomness comes from a
64-bit linear congruential generator with fixed constants, drawn in the
order (resource, duration, success) per job.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from . import canonical
from .clock import parse_ts, format_ts
from .errors import UnknownJob
from datetime import timedelta

LCG_MULTIPLIER = 6364136223846793005
LCG_INCREMENT = 1442695040888963407
LCG_MODULUS = 1 << 64


@dataclass
class BrokerConfig:
    seed: int = 42
    nodes: tuple[str, ...] = ("node-1", "node-2")
    base_duration_ms: int = 100
    jitter_ms: int = 50
    failure_rate: float = 0.0

    def __post_init__(self):
        self.nodes = tuple(self.nodes)
        if not self.nodes:
            raise ValueError("broker needs at least one node")
        if not 0 <= self.seed < LCG_MODULUS:
            raise ValueError("seed must fit in 64 bits")
        if self.base_duration_ms < 0:
            raise ValueError("base_duration_ms must be non-negative")
        if self.jitter_ms <= 0:
            raise ValueError("jitter_ms must be positive")
        if not 0.0 <= self.failure_rate <= 1.0:
            raise ValueError("failure_rate must lie in [0, 1]")

    def to_payload(self) -> dict:
        return {
            "seed": self.seed,
            "nodes": list(self.nodes),
            "base_duration_ms": self.base_duration_ms,
            "jitter_ms": self.jitter_ms,
            "failure_rate": self.failure_rate,
        }


@dataclass
class Job:
    id: int
    activity: str
    element: str
    script: str
    params: dict
    state: str = "Queued"  # Queued | Running | Done


@dataclass
class JobResult:
    job: int
    resource: str
    started_at: str
    finished_at: str
    duration_ms: int
    success: bool
    output_ref: str

    def to_payload(self) -> dict:
        return {
            "job": self.job,
            "resource": self.resource,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "duration_ms": self.duration_ms,
            "success": self.success,
            "output_ref": self.output_ref,
        }


def output_reference(script: str, params: dict, element: str) -> str:
    """Content-hash stand-in for the files a job would produce."""
    digest = hashlib.sha256(
        canonical.dumps({"script": script, "params": params, "element": element}).encode("utf-8")
    ).hexdigest()
    return f"sha256:{digest}"


class SimBroker:
    """Synchronous broker: submit queues, advance() completes everything."""

    def __init__(self, config: BrokerConfig | None = None, clock=None):
        from .clock import SystemClock

        self.config = config or BrokerConfig()
        self.clock = clock or SystemClock()
        self._state = self.config.seed
        self._jobs: dict[int, Job] = {}
        self._results: dict[int, JobResult] = {}
        self._queued: list[int] = []
        self._next_id = 1

    def _draw(self) -> int:
        self._state = (LCG_MULTIPLIER * self._state + LCG_INCREMENT) % LCG_MODULUS
        return self._state

    def submit_job(self, activity: str, element: str, script: str, params: dict) -> int:
        job = Job(
            id=self._next_id,
            activity=activity,
            element=element,
            script=script,
            params=dict(params),
        )
        self._next_id += 1
        self._jobs[job.id] = job
        self._queued.append(job.id)
        return job.id

    def advance(self) -> list[JobResult]:
        """Complete every queued job deterministically, in JobId order."""
        results = []
        for job_id in sorted(self._queued):
            job = self._jobs[job_id]
            job.state = "Running"
            resource = self.config.nodes[self._draw() % len(self.config.nodes)]
            duration_ms = self.config.base_duration_ms + self._draw() % self.config.jitter_ms
            success = self._draw() / LCG_MODULUS >= self.config.failure_rate
            started = self.clock.now()
            finished = format_ts(parse_ts(started) + timedelta(milliseconds=duration_ms))
            result = JobResult(
                job=job_id,
                resource=resource,
                started_at=started,
                finished_at=finished,
                duration_ms=duration_ms,
                success=success,
                output_ref=output_reference(job.script, job.params, job.element),
            )
            job.state = "Done"
            self._results[job_id] = result
            results.append(result)
        self._queued.clear()
        return results

    def job(self, job_id: int) -> Job:
        job = self._jobs.get(job_id)
        if job is None:
            raise UnknownJob(f"no job {job_id}")
        return job

    def job_status(self, job_id: int) -> tuple[str, JobResult | None]:
        return self.job(job_id).state, self._results.get(job_id)
