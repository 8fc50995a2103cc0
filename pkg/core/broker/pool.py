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
Job runs and the broker's VM pool
"""
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Deque, Optional, Tuple

from config import HOUR_S
from core.market.catalog import MarketKey
from core.market.provider import Instance, InstanceState, SpotRequest
from core.sim.engine import EventHandle
from core.workload.jobs import Job


class JobState(Enum):
    UNSCHEDULED = "unscheduled"
    ASSIGNED = "assigned"  # queued on a VM, not started
    RUNNING = "running"
    RECOVERING = "recovering"  # waiting for a replacement or re-fulfilled VM
    COMPLETED = "completed"
    CANCELLED = "cancelled"


@dataclass(eq=False)
class JobRun:
    """
    One copy of a job as the broker sees it. progress is in reference seconds
    and is exact as of seg_start; work accrues at factor reference seconds per
    wall second after that.
    """
    job: Job
    replica: bool = False
    sibling: Optional["JobRun"] = None
    state: JobState = JobState.UNSCHEDULED
    progress: float = 0.0
    seg_start: int = 0
    factor: float = 1.0
    vm: Optional["VmPoolEntry"] = None
    snapshot: Optional[object] = None
    pending_snapshot: Optional[object] = None
    resume_delay_s: int = 0
    completion_handle: Optional[EventHandle] = None
    recheck_handle: Optional[EventHandle] = None
    recheck_at: Optional[int] = None
    excluded_market: Optional[MarketKey] = None
    failures: int = 0

    @property
    def key(self) -> Tuple[int, bool]:
        return (self.job.id, self.replica)

    @property
    def remaining_work(self) -> float:
        return max(0.0, self.job.base_runtime_s - self.progress)

    @property
    def market(self) -> Optional[MarketKey]:
        return self.vm.market if self.vm is not None else None

    @property
    def finished(self) -> bool:
        return self.state in (JobState.COMPLETED, JobState.CANCELLED)

    def progress_at(self, t: int) -> float:
        if self.state != JobState.RUNNING:
            return self.progress
        done = self.progress + max(0, t - self.seg_start) * self.factor
        return min(done, float(self.job.base_runtime_s))


@dataclass(eq=False)
class VmPoolEntry:
    """A leased (or requested) VM and the work the broker placed on it"""
    request: SpotRequest
    memory_mb: int
    current: Optional[JobRun] = None
    queue: Deque[JobRun] = field(default_factory=deque)
    recovering: Optional[JobRun] = None
    boundary_handle: Optional[EventHandle] = None
    hours_since_checkpoint: int = 0

    @property
    def instance(self) -> Optional[Instance]:
        return self.request.instance

    @property
    def market(self) -> MarketKey:
        return self.request.market

    @property
    def running(self) -> bool:
        return self.instance is not None and self.instance.state == InstanceState.RUNNING

    @property
    def pending(self) -> bool:
        return self.instance is not None and self.instance.state == InstanceState.PENDING

    @property
    def idle(self) -> bool:
        return self.current is None and not self.queue and self.recovering is None

    @property
    def accepts_work(self) -> bool:
        return self.recovering is None and (self.running or self.pending)

    def next_boundary(self, t: int) -> int:
        return self.instance.next_boundary(t)

    def paid_remainder(self, t: int) -> int:
        """Seconds left in the billing hour that is already paid for"""
        return self.next_boundary(t) - t

    def committed_until(self, t: int) -> int:
        """End of the last billing hour that will be charged if the VM runs until t"""
        elapsed = max(0, t - self.instance.lease_start)
        return self.instance.lease_start + -(-elapsed // HOUR_S) * HOUR_S

    def jobs(self):
        runs = [self.current] if self.current is not None else []
        return runs + list(self.queue)
