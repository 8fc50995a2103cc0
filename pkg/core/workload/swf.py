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
Standard Workload Format (SWF) reader for spotsim
"""
import os
from dataclasses import dataclass
from typing import List, Optional

from config import logger
from core.errors import ConfigurationError, TraceParseError
from core.workload.jobs import Job

SWF_FIELDS = (
    'job_id', 'submit_time', 'wait_time', 'run_time', 'allocated_processors',
    'average_cpu_time', 'used_memory', 'requested_processors', 'requested_time',
    'requested_memory', 'status', 'user_id', 'group_id', 'executable', 'queue',
    'partition', 'preceding_job', 'think_time',
)

# 0 = failed, 5 = cancelled; neither ran to completion on the traced system
UNUSABLE_STATUSES = frozenset({0, 5})


@dataclass
class SwfRecord:
    """One SWF line; missing trailing fields read as -1"""
    job_id: int
    submit_time: int
    wait_time: int
    run_time: int
    allocated_processors: int
    average_cpu_time: float
    used_memory: float
    requested_processors: int
    requested_time: int
    requested_memory: float
    status: int
    user_id: int
    group_id: int
    executable: int
    queue: int
    partition: int
    preceding_job: int
    think_time: int

    @classmethod
    def from_line(cls, line: str, line_number: int) -> "SwfRecord":
        tokens = line.split()
        if len(tokens) < 12:
            raise TraceParseError(f"expected 18 SWF fields, got {len(tokens)}", line_number)
        tokens = tokens[:18] + ['-1'] * (18 - len(tokens))
        values = {}
        for name, token in zip(SWF_FIELDS, tokens):
            try:
                number = float(token)
            except ValueError:
                raise TraceParseError(f"non-numeric {name} {token!r}", line_number)
            values[name] = number if name in ('average_cpu_time', 'used_memory', 'requested_memory') else int(number)
        return cls(**values)


@dataclass
class SwfWorkload:
    jobs: List[Job]
    skipped: int


def parse_swf(source, limit: Optional[int] = None) -> SwfWorkload:
    """
    Read jobs from an SWF trace

    Args:
        source: Path to the trace or an iterable of text lines
        limit: Keep at most this many jobs (in submit order)

    Returns:
        SwfWorkload: jobs sorted by submit time and the count of skipped records

    Raises:
        ConfigurationError: If the trace cannot be read or yields no jobs
        TraceParseError: For lines that are not SWF records
    """
    if limit is not None and limit <= 0:
        raise ConfigurationError("jobs limit must be positive")
    owned = isinstance(source, (str, os.PathLike))
    try:
        handle = open(source, 'r', encoding='utf-8', errors='replace') if owned else source
    except OSError as e:
        raise ConfigurationError(f"Cannot read workload {source}: {e}")

    jobs = []
    skipped = 0
    try:
        for line_number, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith(';'):
                continue
            record = SwfRecord.from_line(stripped, line_number)
            if record.run_time <= 0 or record.submit_time < 0 or record.status in UNUSABLE_STATUSES:
                skipped += 1
                continue
            jobs.append(Job(id=record.job_id, user_id=record.user_id,
                            submit_time=record.submit_time, base_runtime_s=record.run_time))
    except OSError as e:
        raise ConfigurationError(f"Cannot read workload {source}: {e}")
    finally:
        if owned:
            handle.close()

    jobs.sort(key=lambda job: (job.submit_time, job.id))
    if limit is not None:
        jobs = jobs[:limit]
    if not jobs:
        raise ConfigurationError("Workload contains no usable jobs")
    if skipped:
        logger.warning(f"Skipped {skipped} SWF records without a positive runtime or a completed status")
    logger.info(f"Parsed {len(jobs)} jobs from SWF trace")
    return SwfWorkload(jobs=jobs, skipped=skipped)
