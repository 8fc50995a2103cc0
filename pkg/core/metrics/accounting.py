# spotsim - Spot market provisioning simulator
# Copyright (C) 2025 The spotsim contributors
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU Affero General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU Affero General Public License for more details.
#
# You should have received a copy of the GNU Affero General Public License
# along with this program.  If not, see <https://www.gnu.org/licenses/>.

"""
Per-run accounting of costs, completions, deadline outcomes and failures
"""
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Dict, Optional, Set

from config import logger
from core.errors import SimulationError
from core.market.money import to_usd


class RunEventKind(Enum):
    SUBMISSION = "submission"
    BILLING = "billing"
    COMPLETION = "completion"
    VIOLATION = "violation"
    FAILURE = "failure"
    SNAPSHOT = "snapshot"
    MIGRATION = "migration"
    REPLICA = "replica"


@dataclass
class RunEvent:
    kind: RunEventKind
    time: int
    job_id: Optional[int] = None
    deadline: Optional[int] = None
    instance_id: Optional[int] = None
    amount: int = 0  # micro-dollars for billing events
    hours: int = 0
    lost_work_s: int = 0


@dataclass
class RunMetrics:
    total_cost: float = 0.0
    jobs_submitted: int = 0
    jobs_completed: int = 0
    deadline_violations: int = 0
    jobs_within_deadline: int = 0
    dollars_per_useful_computation: Optional[float] = None
    failures_out_of_bid: int = 0
    vm_hours_charged: int = 0
    jobs_censored: int = 0
    snapshots_taken: int = 0
    migrations: int = 0
    replicas_created: int = 0
    max_lost_work_s: int = 0
    total_cost_micros: int = 0

    def to_dict(self) -> Dict:
        return asdict(self)


class MetricsRecorder:
    """Counts every event exactly once and checks conservation at the end"""

    def __init__(self):
        self.total_micros = 0
        self.counts = {kind: 0 for kind in RunEventKind}
        self.within = 0
        self.completed_jobs: Set[int] = set()
        self.violated_jobs: Set[int] = set()
        self.billed_instances: Set[int] = set()
        self.vm_hours = 0
        self.max_lost_work_s = 0

    def record_event(self, event: RunEvent):
        """
        Update counters for one event

        Raises:
            SimulationError: If an instance's final bill or a job outcome is recorded twice
        """
        kind = event.kind
        if kind == RunEventKind.BILLING:
            if event.instance_id in self.billed_instances:
                raise SimulationError(f"Instance {event.instance_id} billed twice")
            self.billed_instances.add(event.instance_id)
            self.total_micros += event.amount
            self.vm_hours += event.hours
        elif kind == RunEventKind.COMPLETION:
            self._check_outcome(event.job_id)
            self.completed_jobs.add(event.job_id)
            if event.time <= event.deadline:
                self.within += 1
            else:
                self.violated_jobs.add(event.job_id)
        elif kind == RunEventKind.VIOLATION:
            self._check_outcome(event.job_id)
            self.violated_jobs.add(event.job_id)
        elif kind == RunEventKind.FAILURE:
            self.max_lost_work_s = max(self.max_lost_work_s, event.lost_work_s)
        self.counts[kind] += 1

    def _check_outcome(self, job_id: int):
        if job_id in self.completed_jobs or job_id in self.violated_jobs:
            raise SimulationError(f"Job {job_id} outcome recorded twice")

    def finalize(self, provider=None, censored: int = 0) -> RunMetrics:
        """
        Compute the run's metrics

        Raises:
            SimulationError: If instances are still alive or bills do not add up
                to the provider's revenue
        """
        if provider is not None:
            alive = provider.live_instances()
            if alive:
                raise SimulationError(f"{len(alive)} instances were not terminated before finalize")
            unbilled = [i for i in provider.instances if i not in self.billed_instances]
            if unbilled:
                raise SimulationError(f"Instances {unbilled[:5]} were never billed")
            revenue = provider.total_revenue()
            if revenue != self.total_micros:
                raise SimulationError(f"Recorded cost {self.total_micros} != provider revenue {revenue}")

        metrics = RunMetrics(
            total_cost=to_usd(self.total_micros),
            total_cost_micros=self.total_micros,
            jobs_submitted=self.counts[RunEventKind.SUBMISSION],
            jobs_completed=len(self.completed_jobs),
            deadline_violations=len(self.violated_jobs),
            jobs_within_deadline=self.within,
            failures_out_of_bid=self.counts[RunEventKind.FAILURE],
            vm_hours_charged=self.vm_hours,
            jobs_censored=censored,
            snapshots_taken=self.counts[RunEventKind.SNAPSHOT],
            migrations=self.counts[RunEventKind.MIGRATION],
            replicas_created=self.counts[RunEventKind.REPLICA],
            max_lost_work_s=self.max_lost_work_s,
        )
        if metrics.jobs_within_deadline > 0:
            metrics.dollars_per_useful_computation = metrics.total_cost / metrics.jobs_within_deadline
        if metrics.jobs_within_deadline + metrics.deadline_violations > metrics.jobs_submitted:
            raise SimulationError("More job outcomes than submitted jobs")
        logger.info(f"Run cost ${metrics.total_cost:.3f}, {metrics.jobs_within_deadline} jobs within deadline, "
                    f"{metrics.deadline_violations} violations, {metrics.failures_out_of_bid} failures")
        return metrics
