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
Job model and workload preparation for spotsim
Attaches moldability, user estimates and deadlines to trace jobs
"""
import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

from config import (
    DEADLINE_MULTIPLIER_RANGE, ESTIMATE_FACTORS, MOLDABILITY_LOG2_A_RANGE,
    MOLDABILITY_SIGMA_RANGE, logger
)
from core.errors import ConfigurationError


@dataclass
class Job:
    """
    A moldable job; base_runtime_s is measured on the 1-core, 1-ECU reference
    machine, parallelism and sigma are Downey's A and coefficient of variance
    """
    id: int
    user_id: int
    submit_time: int
    base_runtime_s: int
    parallelism: float = 1.0
    sigma: float = 0.0
    user_estimate_s: Optional[int] = None
    deadline: Optional[int] = None

    def __post_init__(self):
        if self.base_runtime_s <= 0:
            raise ValueError(f"Job {self.id}: base runtime must be positive")
        if self.parallelism < 1:
            raise ValueError(f"Job {self.id}: parallelism must be at least 1")
        if self.sigma < 0:
            raise ValueError(f"Job {self.id}: sigma must be non-negative")


@dataclass
class WorkloadParams:
    """Distributions used to complete trace jobs"""
    log2_parallelism_range: Tuple[float, float] = MOLDABILITY_LOG2_A_RANGE
    sigma_range: Tuple[float, float] = MOLDABILITY_SIGMA_RANGE
    estimate_factors: Sequence[float] = ESTIMATE_FACTORS
    estimate_weights: Optional[Sequence[float]] = None
    deadline_multiplier_range: Tuple[float, float] = DEADLINE_MULTIPLIER_RANGE

    def validate(self):
        low, high = self.log2_parallelism_range
        if not 0 <= low <= high:
            raise ConfigurationError("log2 parallelism range must satisfy 0 <= low <= high")
        low, high = self.sigma_range
        if not 0 <= low <= high:
            raise ConfigurationError("sigma range must satisfy 0 <= low <= high")
        if not self.estimate_factors or min(self.estimate_factors) < 1:
            raise ConfigurationError("estimate factors must be non-empty and >= 1")
        if self.estimate_weights is not None:
            if len(self.estimate_weights) != len(self.estimate_factors):
                raise ConfigurationError("estimate weights must match estimate factors")
            if min(self.estimate_weights) < 0 or sum(self.estimate_weights) <= 0:
                raise ConfigurationError("estimate weights must be non-negative with a positive sum")
        low, high = self.deadline_multiplier_range
        if not 1 <= low <= high:
            raise ConfigurationError("deadline multiplier range must satisfy 1 <= low <= high")


def _ceil_seconds(value: float) -> int:
    return math.ceil(round(value, 6))


def generate_moldability(rng, params: Optional[WorkloadParams] = None) -> Tuple[float, float]:
    """Draw (A, sigma): log2(A) and sigma are uniform over the configured ranges"""
    params = params or WorkloadParams()
    parallelism = 2.0 ** rng.uniform(*params.log2_parallelism_range)
    sigma = float(rng.uniform(*params.sigma_range))
    return max(1.0, float(parallelism)), max(0.0, sigma)


def generate_user_estimate(job: Job, rng, params: Optional[WorkloadParams] = None) -> int:
    """User estimate = base runtime times an over-estimation factor (never below the runtime)"""
    params = params or WorkloadParams()
    weights = None
    if params.estimate_weights is not None:
        total = float(sum(params.estimate_weights))
        weights = [w / total for w in params.estimate_weights]
    factor = float(rng.choice(list(params.estimate_factors), p=weights))
    return max(job.base_runtime_s, _ceil_seconds(job.base_runtime_s * factor))


def assign_deadline(job: Job, rng, params: Optional[WorkloadParams] = None,
                    multiplier: Optional[float] = None) -> int:
    """Deadline = submit time + user estimate x U[low, high]"""
    if job.user_estimate_s is None:
        raise ValueError(f"Job {job.id} has no user estimate")
    params = params or WorkloadParams()
    if multiplier is None:
        multiplier = float(rng.uniform(*params.deadline_multiplier_range))
    return job.submit_time + max(1, _ceil_seconds(job.user_estimate_s * multiplier))


def prepare_workload(base_jobs: List[Job], streams, start_time: int, horizon_s: Optional[int] = None,
                     params: Optional[WorkloadParams] = None) -> List[Job]:
    """
    Rebase a job stream onto the simulation clock and complete every job

    Args:
        base_jobs: Parsed jobs in submit order
        streams: RandomStream of the replication
        start_time: Simulation time of the first submission
        horizon_s: Jobs submitted later than this after the first one are dropped
        params: Workload distributions

    Returns:
        list: New Job objects with moldability, estimate and deadline set
    """
    params = params or WorkloadParams()
    params.validate()
    if not base_jobs:
        return []
    first = base_jobs[0].submit_time
    moldability = streams.stream('moldability')
    estimates = streams.stream('estimates')
    deadlines = streams.stream('deadlines')
    prepared = []
    for base in base_jobs:
        offset = base.submit_time - first
        if horizon_s is not None and offset > horizon_s:
            break
        parallelism, sigma = generate_moldability(moldability, params)
        job = replace(base, submit_time=start_time + offset, parallelism=parallelism, sigma=sigma,
                      user_estimate_s=None, deadline=None)
        job.user_estimate_s = generate_user_estimate(job, estimates, params)
        job.deadline = assign_deadline(job, deadlines, params)
        prepared.append(job)
    logger.info(f"Prepared {len(prepared)} jobs starting at t={start_time}")
    return prepared


@dataclass
class SyntheticWorkloadParams:
    """Poisson arrivals with log-normal runtimes over a small user population"""
    jobs: int = 500
    span_days: float = 7.0
    users: int = 20
    runtime_log_mean: float = 7.5
    runtime_log_sd: float = 1.2
    min_runtime_s: int = 60
    max_runtime_s: int = 48 * 3600


def generate_synthetic_jobs(rng, params: Optional[SyntheticWorkloadParams] = None) -> List[Job]:
    """Job stream without moldability or deadlines, like a parsed trace"""
    params = params or SyntheticWorkloadParams()
    if params.jobs <= 0 or params.users <= 0 or params.span_days <= 0:
        raise ConfigurationError("Synthetic workload needs positive jobs, users and span")
    span = int(params.span_days * 24 * 3600)
    submits = sorted(int(x) for x in rng.uniform(0, span, size=params.jobs))
    jobs = []
    for index, submit in enumerate(submits, start=1):
        runtime = int(round(rng.lognormal(params.runtime_log_mean, params.runtime_log_sd)))
        runtime = min(max(runtime, params.min_runtime_s), params.max_runtime_s)
        jobs.append(Job(id=index, user_id=int(rng.integers(1, params.users + 1)),
                        submit_time=submit, base_runtime_s=runtime))
    return jobs
