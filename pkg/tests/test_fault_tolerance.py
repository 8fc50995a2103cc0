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
Tests for checkpointing, migration and duplication helpers
"""
import pytest

from core.broker.pool import JobRun, JobState, VmPoolEntry
from core.errors import ConfigurationError
from core.fault.mechanisms import (
    MechanismKind, Snapshot, checkpoint_resume_delay, duplicate_long_jobs, hourly_checkpoint, lost_work,
    migration_candidates, publish_snapshot, recover_checkpointing, recover_migration, recovered_progress
)
from core.fault.overhead import TransferRates
from core.market.provider import SpotRequest

RATES = TransferRates()


def running_vm(sim, provider, job, seg_start):
    request = provider.submit_request(SpotRequest('m1.small', bid=50000, datacenter='dc1'), 0)
    sim.run_until(provider.provisioning_lag_s)
    vm = VmPoolEntry(request=request, memory_mb=1740)
    run = JobRun(job=job, state=JobState.RUNNING, seg_start=seg_start, factor=1.0, vm=vm)
    vm.current = run
    return vm, run


def snapshot_of(job, progress, dc='dc1'):
    return Snapshot(job_id=job.id, source_instance_id=1, progress_time=progress, size_mb=1740,
                    stored_in=dc, taken_at=0)


def test_mechanism_names_and_aliases():
    assert MechanismKind.from_name('Checkpoint') == MechanismKind.CHECKPOINTING
    assert MechanismKind.from_name('replication') == MechanismKind.DUPLICATION
    assert MechanismKind.MIGRATION.takes_snapshots
    assert not MechanismKind.DUPLICATION.takes_snapshots
    with pytest.raises(ConfigurationError):
        MechanismKind.from_name('prayer')


def test_checkpoint_pauses_job_for_suspend_time(small_catalog, make_provider, make_job):
    sim, provider = make_provider(small_catalog)
    vm, run = running_vm(sim, provider, make_job(base_runtime_s=7200), seg_start=328)
    snapshot = hourly_checkpoint(vm, 3900, RATES)
    assert snapshot.progress_time == 3572
    assert run.seg_start == 3928
    assert run.snapshot is None
    assert publish_snapshot(run, snapshot)
    assert run.snapshot is snapshot


def test_unfinished_snapshot_is_discarded_on_failure(small_catalog, make_provider, make_job):
    sim, provider = make_provider(small_catalog)
    vm, run = running_vm(sim, provider, make_job(base_runtime_s=7200), seg_start=328)
    publish_snapshot(run, hourly_checkpoint(vm, 3900, RATES))
    second = hourly_checkpoint(vm, 7500, RATES)
    assert second.progress_time == 7144
    assert recovered_progress(run, MechanismKind.CHECKPOINTING) == 3572
    assert not publish_snapshot(run, second)
    assert run.snapshot.progress_time == 3572


def test_no_checkpoint_for_idle_vm(small_catalog, make_provider, make_job):
    sim, provider = make_provider(small_catalog)
    vm, run = running_vm(sim, provider, make_job(), seg_start=300)
    vm.current = None
    assert hourly_checkpoint(vm, 3900, RATES) is None


def test_lost_work_without_snapshot(small_catalog, make_provider, make_job):
    sim, provider = make_provider(small_catalog)
    vm, run = running_vm(sim, provider, make_job(base_runtime_s=7200), seg_start=300)
    assert lost_work(run, 300 + 40 * 60, recovered_progress(run, MechanismKind.NONE)) == 2400


def test_checkpointed_job_resumes_after_restore(small_catalog, make_provider, make_job):
    sim, provider = make_provider(small_catalog)
    vm, run = running_vm(sim, provider, make_job(base_runtime_s=7200), seg_start=328)
    publish_snapshot(run, hourly_checkpoint(vm, 3900, RATES))
    recover_checkpointing(run, 5000)
    assert run.state == JobState.RECOVERING
    assert run.progress == 3572
    assert checkpoint_resume_delay(run, RATES) == 22


def test_migration_moves_to_cheaper_datacenter(two_dc_catalog, make_provider, make_job):
    sim, provider = make_provider(two_dc_catalog, {('dc1', 'm1.small'): [(0, '0.090')]})
    job = make_job(base_runtime_s=7200)
    run = JobRun(job=job, state=JobState.RUNNING, snapshot=snapshot_of(job, 3600))
    choice = recover_migration(run, 5000, provider, two_dc_catalog, None, RATES, ('dc1', 'm1.small'))
    assert choice.market == ('dc2', 'm1.small')
    assert choice.resume_s == 43
    assert choice.cost == 2 * 30000
    assert run.progress == 3600
    assert run.resume_delay_s == 43


def test_migration_stays_home_when_prices_tie(two_dc_catalog, make_provider, make_job):
    sim, provider = make_provider(two_dc_catalog)
    job = make_job(base_runtime_s=7200)
    run = JobRun(job=job, state=JobState.RECOVERING, progress=7100, snapshot=snapshot_of(job, 7100))
    options = migration_candidates(run, 5000, provider, two_dc_catalog, None, RATES, ('dc1', 'm1.small'))
    assert options[0].market == ('dc1', 'm1.small')
    assert options[0].resume_s == 22
    assert options[0].cost == options[1].cost


def test_long_jobs_get_one_replica(small_catalog, make_job):
    run = JobRun(job=make_job(base_runtime_s=7200))
    replica = duplicate_long_jobs(run, None, small_catalog.types_by_name())
    assert replica.replica
    assert run.sibling is replica and replica.sibling is run
    assert duplicate_long_jobs(replica, None, small_catalog.types_by_name()) is None


def test_short_jobs_are_not_duplicated(small_catalog, make_job):
    run = JobRun(job=make_job(base_runtime_s=1800))
    assert duplicate_long_jobs(run, None, small_catalog.types_by_name()) is None
