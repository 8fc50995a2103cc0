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
Runtime estimation and instance type preference
"""
from collections import defaultdict, deque
from typing import Deque, Dict, List, Optional, Sequence

from config import HOUR_S
from core.market.catalog import InstanceType
from core.workload.jobs import Job
from core.workload.moldability import runtime_for_work

RECENT_JOBS_PER_USER = 2


class EstimatorState:
    """Actual reference runtimes of each user's most recent completed jobs"""

    def __init__(self, depth: int = RECENT_JOBS_PER_USER):
        self._recent: Dict[int, Deque[int]] = defaultdict(lambda: deque(maxlen=depth))

    def record_completion(self, user_id: int, reference_runtime_s: int):
        self._recent[user_id].append(int(reference_runtime_s))

    def recent(self, user_id: int) -> List[int]:
        if user_id not in self._recent:
            return []
        return list(self._recent[user_id])


def reference_estimate(job: Job, estimator: Optional[EstimatorState]) -> float:
    """Estimated reference-machine runtime of a whole job"""
    recent = estimator.recent(job.user_id) if estimator is not None else []
    if recent:
        return sum(recent) / len(recent)
    if job.user_estimate_s is not None:
        return float(job.user_estimate_s)
    return float(job.base_runtime_s)


def estimate_runtime(job: Job, instance_type: InstanceType, estimator: Optional[EstimatorState],
                     progress_s: float = 0.0) -> int:
    """
    Estimated wall seconds to finish a job on a type (e_j)

    Args:
        job: The job
        instance_type: Target type, runtimes are scaled by the speedup model and ECUs
        estimator: Per-user history; the user estimate is the fallback
        progress_s: Reference seconds already done (snapshots, partial runs)
    """
    remaining = max(reference_estimate(job, estimator) - progress_s, 1.0)
    return runtime_for_work(remaining, job.parallelism, job.sigma, instance_type)


def preferred_type(job: Job, estimator: Optional[EstimatorState], types: Sequence[InstanceType],
                   progress_s: float = 0.0) -> InstanceType:
    """
    The type with the most cores on which the job is still estimated to run
    longer than an hour; the smallest type when it is short everywhere
    """
    if not types:
        raise ValueError("No instance types offered")
    long_running = [t for t in types if estimate_runtime(job, t, estimator, progress_s) > HOUR_S]
    if long_running:
        return min(long_running, key=lambda t: (-t.cores, -t.ecus, t.name))
    return min(types, key=lambda t: (t.cores, t.ecus, t.name))
