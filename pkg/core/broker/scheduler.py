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
Deadline-aware broker: job queue, scheduling passes and VM lifecycle
"""
import math
from dataclasses import dataclass
from typing import Dict, List, Optional

from config import (
    HISTORY_WINDOW_S, HOUR_S, SCHEDULING_INTERVAL_S, logger
)
from core.broker.bidding import (
    BiddingStrategy, Recheck, UrgencyParams, bid_check, urgency
)
from core.broker.estimator import EstimatorState, estimate_runtime, preferred_type
from core.broker.pool import JobRun, JobState, VmPoolEntry
from core.errors import SimulationError
from core.fault.mechanisms import (
    MechanismKind, checkpoint_resume_delay, duplicate_long_jobs, hourly_checkpoint, lost_work,
    publish_snapshot, recover_checkpointing, recover_migration, recovered_progress
)
from core.fault.overhead import TransferRates
from core.history import EventType, SimulationHistory
from core.market.catalog import Catalog, InstanceType
from core.market.provider import Instance, InstanceState, Provider, RequestState, SpotRequest
from core.metrics.accounting import MetricsRecorder, RunEvent, RunEventKind
from core.sim.engine import Event, EventKind, Simulator
from core.workload.jobs import Job
from core.workload.moldability import speed_factor, wall_seconds


@dataclass(frozen=True)
class Action:
    """Outcome of placing one job during a scheduling pass"""
    kind: str  # idle-vm, busy-vm, extend, lease, postpone
    job_id: int
    replica: bool = False
    request_id: Optional[int] = None
    bid: Optional[int] = None
    at: Optional[int] = None


class Broker:
    """
    Client-side policy: places jobs on idle or soon-idle VMs, extends leases or
    bids for new spot instances, and applies one fault tolerance mechanism.
    Attached to the provider as its listener.
    """

    def __init__(self, sim: Simulator, provider: Provider, catalog: Catalog, strategy: BiddingStrategy,
                 urgency_params: UrgencyParams, mechanism: MechanismKind = MechanismKind.NONE,
                 metrics: Optional[MetricsRecorder] = None, history: Optional[SimulationHistory] = None,
                 scheduling_interval_s: int = SCHEDULING_INTERVAL_S, history_window_s: int = HISTORY_WINDOW_S,
                 rates: TransferRates = TransferRates(), checkpoint_every_hours: int = 1):
        if scheduling_interval_s <= 0:
            raise ValueError("Scheduling interval must be positive")
        if checkpoint_every_hours < 1:
            raise ValueError("Checkpoint interval must be at least one hour")
        self.sim = sim
        self.provider = provider
        self.catalog = catalog
        self.strategy = strategy
        self.urgency_params = urgency_params
        self.mechanism = mechanism
        self.metrics = metrics or MetricsRecorder()
        self.history = history or SimulationHistory(enabled=False)
        self.scheduling_interval_s = scheduling_interval_s
        self.history_window_s = history_window_s
        self.rates = rates
        self.checkpoint_every_hours = checkpoint_every_hours
        self.estimator = EstimatorState()
        self.types: List[InstanceType] = catalog.types_by_name()

        self.jobs: Dict[int, Job] = {}
        self.runs: List[JobRun] = []
        self.unscheduled: List[JobRun] = []
        self.vms: Dict[int, VmPoolEntry] = {}  # by request id
        self.completed: Dict[int, int] = {}  # job id -> completion time
        self._end: Optional[int] = None

        provider.listener = self
        provider.on_billed = self._on_billed

    # ==========
    # SUBMISSION
    # ==========

    def start(self, start: int, end: int):
        """Schedule the recurring scheduling pass from start until end"""
        self._end = end
        self.sim.at(start, EventKind.SCHEDULE_PASS, self._on_schedule_pass)

    def schedule_arrivals(self, jobs: List[Job]):
        for job in jobs:
            self.sim.at(job.submit_time, EventKind.JOB_ARRIVAL, self._on_job_arrival, job=job)

    def _on_job_arrival(self, event: Event):
        self.on_job_arrival(event.payload['job'], event.fire_time)

    def on_job_arrival(self, job: Job, t: int) -> JobRun:
        """Queue a submitted job, with a replica under duplication"""
        self.jobs[job.id] = job
        run = JobRun(job=job, seg_start=t)
        self.runs.append(run)
        self.unscheduled.append(run)
        self.metrics.record_event(RunEvent(RunEventKind.SUBMISSION, t, job_id=job.id, deadline=job.deadline))
        self.history.add(t, EventType.SUBMISSION, job.id, deadline=job.deadline, runtime=job.base_runtime_s)
        if self.mechanism == MechanismKind.DUPLICATION:
            replica = duplicate_long_jobs(run, self.estimator, self.types)
            if replica is not None:
                replica.seg_start = t
                self.runs.append(replica)
                self.unscheduled.append(replica)
                self.metrics.record_event(RunEvent(RunEventKind.REPLICA, t, job_id=job.id))
                self.history.add(t, EventType.REPLICA, job.id)
        return run

    # ===============
    # SCHEDULING PASS
    # ===============

    def _on_schedule_pass(self, event: Event):
        t = event.fire_time
        self.schedule_pass(t)
        if self._end is not None and t + self.scheduling_interval_s <= self._end:
            self.sim.at(t + self.scheduling_interval_s, EventKind.SCHEDULE_PASS, self._on_schedule_pass)

    def schedule_pass(self, t: int) -> List[Action]:
        """Try to place every unscheduled job, oldest submission first"""
        actions = []
        for run in sorted(self.unscheduled, key=lambda r: (r.job.submit_time, r.job.id, r.replica)):
            if run.state != JobState.UNSCHEDULED:
                continue
            action = self._schedule_job(run, t, allow_bid=run.recheck_at is None or run.recheck_at <= t)
            if action is not None:
                actions.append(action)
        self.unscheduled = [r for r in self.unscheduled if r.state == JobState.UNSCHEDULED]
        return actions

    def _on_bid_check(self, event: Event):
        run = event.payload['run']
        if run.state == JobState.UNSCHEDULED:
            self._schedule_job(run, event.fire_time, allow_bid=True)
            self.unscheduled = [r for r in self.unscheduled if r.state == JobState.UNSCHEDULED]

    def _excluded_market(self, run: JobRun):
        """A replica and its original never share a (datacenter, type) market"""
        sibling = run.sibling
        if sibling is None or sibling.finished:
            return None
        return sibling.market

    def _schedule_job(self, run: JobRun, t: int, allow_bid: bool) -> Optional[Action]:
        job = run.job
        sibling = run.sibling
        if run.replica and sibling is not None and not sibling.finished and sibling.market is None:
            return None  # replicas are placed after their original
        excluded = self._excluded_market(run)
        run.excluded_market = excluded

        estimates = {t_.name: estimate_runtime(job, t_, self.estimator, run.progress) for t_ in self.types}
        preferred = preferred_type(job, self.estimator, self.types, run.progress)
        e_pref = estimates[preferred.name]
        urgency_s = urgency(job, t, self.urgency_params, e_pref)
        new_lease_finish = t + self.provider.provisioning_lag_s + e_pref

        # Idle VM whose paid hour covers the job
        best = None
        for vm in self._candidate_vms(excluded):
            if not (vm.running and vm.idle):
                continue
            estimate = estimates[vm.market[1]]
            if vm.paid_remainder(t) < estimate:
                continue
            finish = t + estimate
            if finish > job.deadline and new_lease_finish <= job.deadline:
                continue
            if best is None or (finish, vm.request.id) < best[0]:
                best = ((finish, vm.request.id), vm)
        if best is not None:
            return self._assign(run, best[1], t, 'idle-vm')

        # VM expected to become idle within the job's urgency budget
        best = None
        for vm in self._candidate_vms(excluded):
            if vm.idle and vm.running:
                continue
            idle_at = self._expected_idle(vm, t)
            if idle_at - t > urgency_s:
                continue
            finish = idle_at + estimates[vm.market[1]]
            if finish > job.deadline:
                continue
            if best is None or (finish, vm.request.id) < best[0]:
                best = ((finish, vm.request.id), vm)
        if best is not None:
            return self._assign(run, best[1], t, 'busy-vm')

        if not allow_bid:
            return None

        preferred, dc_id = self._lease_market(preferred, excluded, t)
        e_pref = estimates[preferred.name]
        decision = bid_check(
            job, t, self.strategy, self.urgency_params,
            estimate_s=e_pref,
            history=self.provider.history_window(dc_id, preferred.name, t, self.history_window_s),
            current_price=self.provider.current_price(dc_id, preferred.name, t),
            on_demand_price=preferred.on_demand_price,
        )
        if isinstance(decision, Recheck):
            return self._postpone(run, decision.at, t, e_pref)

        # Extend a lease past its hour boundary when cheaper than a new one
        new_cost = math.ceil(e_pref / HOUR_S) * self.provider.current_price(dc_id, preferred.name, t)
        best = None
        for vm in self._candidate_vms(excluded):
            if not vm.running:
                continue
            begin = self._expected_idle(vm, t)
            finish = begin + estimates[vm.market[1]]
            if finish > job.deadline:
                continue
            extra = max(0, finish - vm.committed_until(begin))
            cost = math.ceil(extra / HOUR_S) * self.provider.current_price(*vm.market, t)
            if cost <= new_cost and (best is None or (cost, finish, vm.request.id) < best[0]):
                best = ((cost, finish, vm.request.id), vm)
        if best is not None:
            return self._assign(run, best[1], t, 'extend')

        return self._lease(run, preferred, dc_id, decision.bid, t)

    def _lease_market(self, preferred: InstanceType, excluded, t: int):
        """Cheapest datacenter for the preferred type, or the next type when all are excluded"""
        ordered = [preferred] + sorted((t_ for t_ in self.types if t_ is not preferred),
                                       key=lambda t_: (-t_.cores, -t_.ecus, t_.name))
        for instance_type in ordered:
            exclude = {excluded[0]} if excluded and excluded[1] == instance_type.name else ()
            dc_id = self.provider.cheapest_datacenter(instance_type.name, t, exclude=exclude)
            if dc_id is not None:
                return instance_type, dc_id
        raise SimulationError("No market left to lease from")

    def _candidate_vms(self, excluded):
        return [vm for vm in self.vms.values() if vm.accepts_work and vm.market != excluded]

    def _expected_idle(self, vm: VmPoolEntry, t: int) -> int:
        """Estimated time the VM runs out of work"""
        type_ = self.catalog.instance_type(vm.market[1])
        if vm.pending:
            at = vm.instance.requested_at + self.provider.provisioning_lag_s
        else:
            at = t
        current = vm.current
        if current is not None:
            remaining = estimate_runtime(current.job, type_, self.estimator, current.progress_at(t))
            at = max(at, current.seg_start) + remaining
        for queued in vm.queue:
            at += estimate_runtime(queued.job, type_, self.estimator, queued.progress)
        return max(at, t)

    def _postpone(self, run: JobRun, at: int, t: int, estimate_s: int) -> Action:
        latest = run.job.deadline - (self.urgency_params.alpha * estimate_s + self.urgency_params.provisioning_lag_s)
        if at > latest:
            raise SimulationError(f"Recheck of job {run.job.id} at {at} is past its latest start {latest}")
        if run.recheck_at != at:
            self.sim.cancel(run.recheck_handle)
            run.recheck_handle = self.sim.at(at, EventKind.BID_CHECK, self._on_bid_check, run=run)
            run.recheck_at = at
            self.history.add(t, EventType.POSTPONE, run.job.id, until=at, replica=run.replica)
        return Action('postpone', run.job.id, run.replica, at=at)

    def _assign(self, run: JobRun, vm: VmPoolEntry, t: int, kind: str) -> Action:
        self.sim.cancel(run.recheck_handle)
        run.recheck_handle = None
        run.recheck_at = None
        run.vm = vm
        run.state = JobState.ASSIGNED
        vm.queue.append(run)
        self.history.add(t, EventType.ASSIGN, run.job.id, vm.instance, how=kind, replica=run.replica)
        if vm.running and vm.current is None:
            self._start_next(vm, t)
        return Action(kind, run.job.id, run.replica, request_id=vm.request.id)

    def _lease(self, run: JobRun, instance_type: InstanceType, dc_id: str, bid: int, t: int,
               persistent: Optional[bool] = None) -> Action:
        if persistent is None:
            persistent = self.mechanism == MechanismKind.CHECKPOINTING
        request = SpotRequest(instance_type=instance_type.name, bid=bid, datacenter=dc_id, persistent=persistent)
        self.provider.submit_request(request, t)
        if request.instance is None:
            raise SimulationError(f"Lease for job {run.job.id} rejected at bid {bid}")
        vm = VmPoolEntry(request=request, memory_mb=instance_type.memory_mb)
        self.vms[request.id] = vm
        self.history.add(t, EventType.LEASE, run.job.id, request.instance, bid=bid, persistent=persistent)
        self._assign(run, vm, t, 'lease')
        return Action('lease', run.job.id, run.replica, request_id=request.id, bid=bid)

    # ============
    # VM LIFECYCLE
    # ============

    def on_instance_running(self, instance: Instance, t: int):
        vm = self.vms.get(instance.request.id)
        if vm is None:
            logger.warning(f"Instance {instance.id} started for a request the broker released")
            self.provider.cancel_request(instance.request, t)
            return
        vm.hours_since_checkpoint = 0
        vm.boundary_handle = self.sim.at(t + HOUR_S, EventKind.HOUR_BOUNDARY, self._on_hour_boundary, vm=vm)
        if vm.recovering is not None:
            run = vm.recovering
            vm.recovering = None
            if self.mechanism == MechanismKind.CHECKPOINTING:
                run.resume_delay_s = checkpoint_resume_delay(run, self.rates)
            vm.queue.appendleft(run)
        self._start_next(vm, t)

    def _start_next(self, vm: VmPoolEntry, t: int):
        while vm.queue and vm.current is None:
            run = vm.queue.popleft()
            if run.finished:
                continue
            self._start(vm, run, t)

    def _start(self, vm: VmPoolEntry, run: JobRun, t: int):
        run.vm = vm
        run.state = JobState.RUNNING
        run.factor = speed_factor(run.job.parallelism, run.job.sigma, self.catalog.instance_type(vm.market[1]))
        run.seg_start = t + run.resume_delay_s
        run.resume_delay_s = 0
        vm.current = run
        self._schedule_completion(run)

    def _schedule_completion(self, run: JobRun):
        self.sim.cancel(run.completion_handle)
        finish = run.seg_start + wall_seconds(run.remaining_work, run.factor)
        run.completion_handle = self.sim.at(finish, EventKind.JOB_COMPLETION, self._on_completion, run=run)

    def _on_hour_boundary(self, event: Event):
        vm = event.payload['vm']
        t = event.fire_time
        if not vm.running or self.vms.get(vm.request.id) is not vm:
            return
        if vm.idle:
            self._release(vm, t)
            return
        vm.hours_since_checkpoint += 1
        if self.mechanism.takes_snapshots and vm.hours_since_checkpoint >= self.checkpoint_every_hours:
            vm.hours_since_checkpoint = 0
            snapshot = hourly_checkpoint(vm, t, self.rates)
            if snapshot is not None:
                run = vm.current
                self._schedule_completion(run)
                self.sim.at(run.seg_start, EventKind.SNAPSHOT_DONE, self._on_snapshot_done,
                            run=run, snapshot=snapshot)
        vm.boundary_handle = self.sim.at(t + HOUR_S, EventKind.HOUR_BOUNDARY, self._on_hour_boundary, vm=vm)

    def _on_snapshot_done(self, event: Event):
        run = event.payload['run']
        snapshot = event.payload['snapshot']
        if publish_snapshot(run, snapshot):
            self.metrics.record_event(RunEvent(RunEventKind.SNAPSHOT, event.fire_time, job_id=run.job.id,
                                               instance_id=snapshot.source_instance_id))
            self.history.add(event.fire_time, EventType.SNAPSHOT, run.job.id, market=snapshot.stored_in,
                             progress=round(snapshot.progress_time, 3), taken_at=snapshot.taken_at)

    def _release(self, vm: VmPoolEntry, t: int):
        """Give a VM back to the provider"""
        self.vms.pop(vm.request.id, None)
        self.sim.cancel(vm.boundary_handle)
        instance = vm.instance
        live = instance is not None and not instance.terminated
        self.provider.cancel_request(vm.request, t)
        if live:
            self.history.add(t, EventType.TERMINATION, None, instance, by='client')

    # ===========
    # COMPLETIONS
    # ===========

    def _on_completion(self, event: Event):
        run = event.payload['run']
        t = event.fire_time
        if run.state != JobState.RUNNING or run.completion_handle is None or not run.completion_handle.active:
            return
        vm = run.vm
        run.progress = float(run.job.base_runtime_s)
        run.seg_start = t
        run.state = JobState.COMPLETED
        run.completion_handle = None
        run.pending_snapshot = None
        vm.current = None
        job = run.job
        if job.id not in self.completed:
            self.completed[job.id] = t
            self.estimator.record_completion(job.user_id, job.base_runtime_s)
            self.metrics.record_event(RunEvent(RunEventKind.COMPLETION, t, job_id=job.id, deadline=job.deadline))
            self.history.add(t, EventType.COMPLETION, job.id, vm.instance, replica=run.replica,
                             within_deadline=t <= job.deadline)
        if run.sibling is not None:
            self._cancel_run(run.sibling, t)
        self._start_next(vm, t)

    def _cancel_run(self, run: JobRun, t: int):
        """Stop the other copy of a completed job"""
        if run.finished:
            return
        self.sim.cancel(run.recheck_handle)
        self.sim.cancel(run.completion_handle)
        previous = run.state
        vm = run.vm
        run.state = JobState.CANCELLED
        run.completion_handle = None
        run.pending_snapshot = None
        self.history.add(t, EventType.CANCEL, run.job.id, vm.instance if vm else None, replica=run.replica)
        if vm is None:
            return
        if previous == JobState.ASSIGNED and run in vm.queue:
            vm.queue.remove(run)
        elif previous == JobState.RUNNING and vm.current is run:
            vm.current = None
        elif previous == JobState.RECOVERING and vm.recovering is run:
            vm.recovering = None
        if vm.idle and self.vms.get(vm.request.id) is vm:
            self._release(vm, t)
        elif vm.running:
            self._start_next(vm, t)

    # ========
    # FAILURES
    # ========

    def on_instance_terminated(self, instance: Instance, t: int):
        if instance.state != InstanceState.OUT_OF_BID:
            return
        vm = self.vms.get(instance.request.id)
        self.sim.cancel(vm.boundary_handle if vm else None)
        run = vm.current if vm else None
        if run is None and vm is not None and self.mechanism != MechanismKind.CHECKPOINTING:
            # A replacement lease lost before it started
            run, vm.recovering = vm.recovering, None
        recovered = 0.0
        lost = 0
        if run is not None:
            self.sim.cancel(run.completion_handle)
            recovered = recovered_progress(run, self.mechanism) if self.mechanism.takes_snapshots else 0.0
            lost = lost_work(run, t, recovered)
            run.failures += 1
        self.metrics.record_event(RunEvent(RunEventKind.FAILURE, t, job_id=run.job.id if run else None,
                                           instance_id=instance.id, lost_work_s=lost))
        self.history.add(t, EventType.FAILURE, run.job.id if run else None, instance, lost_work_s=lost)
        if vm is None:
            return

        vm.current = None
        for queued in vm.queue:
            if not queued.finished:
                self._requeue(queued, t)
        vm.queue.clear()

        if self.mechanism == MechanismKind.CHECKPOINTING and vm.request.persistent:
            if run is not None:
                vm.recovering = recover_checkpointing(run, t)
            if vm.recovering is None:
                self._release(vm, t)
            return

        self.vms.pop(vm.request.id, None)
        if run is None:
            return
        if self.mechanism == MechanismKind.MIGRATION:
            self._migrate(run, instance.market, t)
        else:
            run.progress = 0.0
            run.snapshot = None
            self._requeue(run, t)

    def _requeue(self, run: JobRun, t: int):
        run.state = JobState.UNSCHEDULED
        run.vm = None
        run.seg_start = t
        run.resume_delay_s = 0
        run.completion_handle = None
        if run not in self.unscheduled:
            self.unscheduled.append(run)

    def _migrate(self, run: JobRun, failed_market, t: int):
        """Relocate a failed job, or wait until its urgency says the move cannot be put off"""
        choice = recover_migration(run, t, self.provider, self.catalog, self.estimator, self.rates,
                                   failed_market=failed_market)
        dc_id, type_name = choice.market
        instance_type = self.catalog.instance_type(type_name)
        estimate_s = estimate_runtime(run.job, instance_type, self.estimator, run.progress)
        decision = bid_check(
            run.job, t, self.strategy, self.urgency_params,
            estimate_s=estimate_s,
            history=self.provider.history_window(dc_id, type_name, t, self.history_window_s),
            current_price=self.provider.current_price(dc_id, type_name, t),
            on_demand_price=instance_type.on_demand_price,
        )
        if isinstance(decision, Recheck):
            run.vm = None
            run.recheck_at = decision.at
            run.recheck_handle = self.sim.at(decision.at, EventKind.BID_CHECK, self._on_migration_check,
                                             run=run, failed_market=failed_market)
            self.history.add(t, EventType.POSTPONE, run.job.id, until=decision.at, migration=True,
                             progress=round(run.progress, 3))
            return
        bid = decision.bid
        request = SpotRequest(instance_type=type_name, bid=bid, datacenter=dc_id, persistent=False)
        self.provider.submit_request(request, t)
        vm = VmPoolEntry(request=request, memory_mb=instance_type.memory_mb, recovering=run)
        self.vms[request.id] = vm
        run.vm = vm
        self.metrics.record_event(RunEvent(RunEventKind.MIGRATION, t, job_id=run.job.id,
                                           instance_id=request.instance.id))
        self.history.add(t, EventType.MIGRATION, run.job.id, request.instance, bid=bid,
                         progress=round(run.progress, 3), estimated_cost=choice.cost,
                         from_market=f"{failed_market[0]}/{failed_market[1]}")

    def _on_migration_check(self, event: Event):
        run = event.payload['run']
        run.recheck_handle = None
        run.recheck_at = None
        if run.state == JobState.RECOVERING and run.vm is None:
            self._migrate(run, event.payload['failed_market'], event.fire_time)

    # =======
    # BILLING
    # =======

    def _on_billed(self, instance: Instance, amount: int):
        self.metrics.record_event(RunEvent(RunEventKind.BILLING, instance.end, instance_id=instance.id,
                                           amount=amount, hours=instance.charged_hours()))
        self.history.add(instance.end, EventType.BILLING, None, instance, amount=amount,
                         hours=instance.charged_hours(), state=instance.state.value)

    # ========
    # SHUTDOWN
    # ========

    def shutdown(self, t: int):
        """Terminate every VM and close every open request at the end of a run"""
        for vm in sorted(self.vms.values(), key=lambda v: v.request.id):
            self._release(vm, t)
        for request in sorted(self.provider.requests.values(), key=lambda r: r.id):
            if request.state != RequestState.CLOSED:
                self.provider.cancel_request(request, t)

    def classify_unfinished(self, t: int) -> int:
        """
        Jobs never completed count as violations once their deadline has passed,
        otherwise they are censored

        Returns:
            int: number of censored jobs
        """
        censored = 0
        for job_id in sorted(self.jobs):
            if job_id in self.completed:
                continue
            job = self.jobs[job_id]
            if job.deadline <= t:
                self.metrics.record_event(RunEvent(RunEventKind.VIOLATION, t, job_id=job_id, deadline=job.deadline))
                self.history.add(t, EventType.VIOLATION, job_id, deadline=job.deadline)
            else:
                censored += 1
        return censored
