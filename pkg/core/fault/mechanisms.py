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
Fault tolerance mechanisms: hourly checkpointing, migration and duplication
"""
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence

from config import HOUR_S, logger
from core.broker.estimator import EstimatorState, estimate_runtime, preferred_type
from core.broker.pool import JobRun, JobState, VmPoolEntry
from core.errors import ConfigurationError, SimulationError
from core.fault.overhead import TransferRates, resume_time, suspend_time
from core.market.catalog import Catalog, InstanceType, MarketKey
from core.workload.moldability import wall_seconds


class MechanismKind(Enum):
    NONE = "none"
    CHECKPOINTING = "checkpointing"
    MIGRATION = "migration"
    DUPLICATION = "duplication"

    @classmethod
    def from_name(cls, name: str) -> "MechanismKind":
        normalized = name.strip().lower()
        aliases = {'checkpoint': 'checkpointing', 'migrate': 'migration', 'duplicate': 'duplication',
                   'replication': 'duplication'}
        normalized = aliases.get(normalized, normalized)
        for kind in cls:
            if kind.value == normalized:
                return kind
        raise ConfigurationError(f"Unknown fault tolerance mechanism '{name}'")

    @property
    def takes_snapshots(self) -> bool:
        return self in (MechanismKind.CHECKPOINTING, MechanismKind.MIGRATION)


@dataclass(frozen=True)
class Snapshot:
    """Saved VM state of one job"""
    job_id: int
    source_instance_id: int
    progress_time: float  # reference seconds captured
    size_mb: int
    stored_in: str
    taken_at: int


# ===========================
# CHECKPOINTING AND SNAPSHOTS
# ===========================

def hourly_checkpoint(vm: VmPoolEntry, t: int, rates: TransferRates) -> Optional[Snapshot]:
    """
    Pause the VM's job for t_s and start writing a snapshot of it

    The snapshot is only pending until t + t_s; publish_snapshot makes it the
    job's recovery point. Progress is unchanged, the pause is pure overhead.

    Returns:
        Snapshot: the pending snapshot, or None when there is nothing to protect
    """
    run = vm.current
    if run is None or run.state != JobState.RUNNING:
        return None
    progress = run.progress_at(t)
    if progress >= run.job.base_runtime_s:
        return None
    pause = suspend_time(vm.memory_mb, rates)
    run.progress = progress
    run.seg_start = max(run.seg_start, t) + pause
    snapshot = Snapshot(
        job_id=run.job.id,
        source_instance_id=vm.instance.id,
        progress_time=progress,
        size_mb=vm.memory_mb,
        stored_in=vm.instance.datacenter,
        taken_at=t,
    )
    run.pending_snapshot = snapshot
    return snapshot


def publish_snapshot(run: JobRun, snapshot: Snapshot) -> bool:
    """Make a finished snapshot the recovery point unless it was discarded"""
    if run.pending_snapshot is not snapshot:
        return False
    run.snapshot = snapshot
    run.pending_snapshot = None
    return True


def recovered_progress(run: JobRun, mechanism: MechanismKind) -> float:
    """Progress a failed job keeps; an unfinished snapshot is discarded"""
    run.pending_snapshot = None
    if mechanism.takes_snapshots and run.snapshot is not None:
        return run.snapshot.progress_time
    return 0.0


def lost_work(run: JobRun, t: int, recovered: float) -> int:
    """Wall seconds of work on the failed instance that recovery throws away"""
    done = run.progress_at(t)
    if done <= recovered:
        return 0
    return wall_seconds(done - recovered, run.factor)


def recover_checkpointing(run: JobRun, t: int) -> JobRun:
    """
    Park a failed job until its persistent request is in-bid again. The job
    resumes with the latest published snapshot, paying t_r in the same datacenter.
    """
    run.progress = recovered_progress(run, MechanismKind.CHECKPOINTING)
    run.seg_start = t
    run.state = JobState.RECOVERING
    run.completion_handle = None
    return run


def checkpoint_resume_delay(run: JobRun, rates: TransferRates) -> int:
    if run.snapshot is None or run.progress <= 0:
        return 0
    return resume_time(run.snapshot.size_mb, same_dc=True, rates=rates)


# =========
# MIGRATION
# =========

@dataclass(frozen=True)
class MigrationOption:
    market: MarketKey
    cost: int
    resume_s: int
    runtime_s: int
    same_dc: bool


def migration_candidates(run: JobRun, t: int, provider, catalog: Catalog, estimator: Optional[EstimatorState],
                         rates: TransferRates, failed_market: Optional[MarketKey] = None) -> List[MigrationOption]:
    """
    Estimated cost of finishing a job in every market, cheapest first

    cost = ceil((t_r + remaining runtime on the type) / 1h) x current price;
    restoring in another datacenter than the snapshot uses the cross-dc rate
    """
    snapshot = run.snapshot
    home_dc = snapshot.stored_in if snapshot is not None else (failed_market[0] if failed_market else None)
    options = []
    for dc_id, type_name in catalog.markets():
        instance_type = catalog.instance_type(type_name)
        same_dc = dc_id == home_dc
        restore = 0
        if snapshot is not None and run.progress > 0:
            restore = resume_time(snapshot.size_mb, same_dc=same_dc, rates=rates)
        runtime = estimate_runtime(run.job, instance_type, estimator, run.progress)
        price = provider.current_price(dc_id, type_name, t)
        cost = math.ceil((restore + runtime) / HOUR_S) * price
        options.append(MigrationOption(market=(dc_id, type_name), cost=cost, resume_s=restore,
                                       runtime_s=runtime, same_dc=same_dc))
    options.sort(key=lambda o: (o.cost, not o.same_dc, o.market[1], o.market[0]))
    return options


def recover_migration(run: JobRun, t: int, provider, catalog: Catalog, estimator: Optional[EstimatorState],
                      rates: TransferRates, failed_market: Optional[MarketKey] = None) -> MigrationOption:
    """
    Roll a failed job back to its snapshot and pick where to relocate it:
    the same type at a higher price, another type, or another datacenter
    """
    run.progress = recovered_progress(run, MechanismKind.MIGRATION)
    run.seg_start = t
    run.state = JobState.RECOVERING
    run.completion_handle = None
    options = migration_candidates(run, t, provider, catalog, estimator, rates, failed_market)
    if not options:
        raise SimulationError(f"No market to migrate job {run.job.id} to")
    choice = options[0]
    run.resume_delay_s = choice.resume_s
    logger.debug(f"Migrating job {run.job.id} to {choice.market[0]}/{choice.market[1]} "
                 f"(estimated cost {choice.cost}, restore {choice.resume_s}s)")
    return choice


# ===========
# DUPLICATION
# ===========

def duplicate_long_jobs(run: JobRun, estimator: Optional[EstimatorState],
                        types: Sequence[InstanceType]) -> Optional[JobRun]:
    """Replica of a job estimated to run more than an hour on its preferred type"""
    if run.replica:
        return None
    preferred = preferred_type(run.job, estimator, types)
    if estimate_runtime(run.job, preferred, estimator) <= HOUR_S:
        return None
    replica = JobRun(job=run.job, replica=True, sibling=run)
    run.sibling = replica
    return replica
