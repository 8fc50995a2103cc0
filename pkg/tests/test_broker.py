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
Tests for the broker's scheduling steps and its fault tolerance paths
"""
from core.broker.pool import JobState
from core.metrics.accounting import RunEventKind

DC1 = ('dc1', 'm1.small')
DC2 = ('dc2', 'm1.small')


def submit(broker, job, t):
    broker.on_job_arrival(job, t)
    return broker.schedule_pass(t)


def test_urgent_job_gets_a_lease_at_the_strategy_bid(small_catalog, make_broker, make_job):
    sim, provider, broker = make_broker(small_catalog, strategy='minimum')
    actions = submit(broker, make_job(base_runtime_s=3600, deadline=7000), 0)
    assert [(a.kind, a.bid) for a in actions] == [('lease', 31000)]
    sim.run_until(5000)
    assert broker.completed == {1: 3900}


def test_job_with_slack_is_postponed_until_price_falls(small_catalog, make_broker, make_job):
    sim, provider, broker = make_broker(small_catalog, {DC1: [(0, '0.030'), (1000, '0.020')]}, alpha=1.0)
    actions = submit(broker, make_job(base_runtime_s=600, deadline=1900), 0)
    assert [(a.kind, a.at) for a in actions] == [('postpone', 1000)]
    assert not provider.requests
    sim.run_until(1000)
    bids = [request.bid for request in provider.requests.values()]
    assert bids == [21000]
    assert broker.runs[0].state == JobState.ASSIGNED


def test_idle_vm_with_paid_time_is_reused(small_catalog, make_broker, make_job):
    sim, provider, broker = make_broker(small_catalog)
    submit(broker, make_job(job_id=1, base_runtime_s=600, deadline=1500), 0)
    sim.run_until(2100)
    assert broker.completed == {1: 900}
    actions = submit(broker, make_job(job_id=2, user_id=2, submit_time=2100, base_runtime_s=1500), 2100)
    assert [(a.kind, a.request_id) for a in actions] == [('idle-vm', 1)]
    sim.run_until(4000)
    assert broker.completed[2] == 3600
    assert len(provider.requests) == 1


def test_job_waits_for_vm_finishing_within_its_urgency(small_catalog, make_broker, make_job):
    sim, provider, broker = make_broker(small_catalog)
    submit(broker, make_job(job_id=1, base_runtime_s=3000, deadline=3300), 0)
    sim.run_until(600)
    job2 = make_job(job_id=2, user_id=2, submit_time=600, base_runtime_s=1000, deadline=6000)
    actions = submit(broker, job2, 600)
    assert [a.kind for a in actions] == ['busy-vm']
    sim.run_until(6000)
    assert broker.completed == {1: 3300, 2: 4300}


def test_lease_is_extended_when_cheaper_than_a_new_one(small_catalog, make_broker, make_job):
    sim, provider, broker = make_broker(small_catalog, alpha=1.0)
    submit(broker, make_job(job_id=1, base_runtime_s=3000, deadline=3300), 0)
    sim.run_until(3100)
    job2 = make_job(job_id=2, user_id=2, submit_time=3100, base_runtime_s=1000, deadline=4400)
    actions = submit(broker, job2, 3100)
    assert [a.kind for a in actions] == ['extend']
    assert len(provider.requests) == 1
    sim.run_until(5000)
    assert broker.completed[2] == 4300


def test_duplication_runs_replica_in_another_datacenter(two_dc_catalog, make_broker, make_job):
    sim, provider, broker = make_broker(two_dc_catalog, {DC2: [(0, '0.040')]}, mechanism='duplication')
    actions = submit(broker, make_job(base_runtime_s=7200, deadline=10_800), 0)
    assert [(a.kind, a.replica) for a in actions] == [('lease', False), ('lease', True)]
    assert [r.datacenter for r in provider.requests.values()] == ['dc1', 'dc2']
    sim.run_until(20_000)
    original, replica = broker.runs
    assert broker.completed == {1: 7500}
    assert original.state == JobState.COMPLETED
    assert replica.state == JobState.CANCELLED
    assert provider.live_instances() == []
    assert provider.total_revenue() == 2 * 30000 + 2 * 40000


def test_failure_without_mechanism_restarts_from_scratch(small_catalog, make_broker, make_job):
    sim, provider, broker = make_broker(small_catalog, {DC1: [(0, '0.030'), (2000, '0.035')]})
    submit(broker, make_job(base_runtime_s=7200, deadline=14_000), 0)
    sim.run_until(2000)
    run = broker.runs[0]
    assert run.state == JobState.UNSCHEDULED
    assert run.progress == 0
    assert run.failures == 1
    assert broker.metrics.max_lost_work_s == 1700
    assert broker.metrics.counts[RunEventKind.FAILURE] == 1


def test_checkpointed_job_resumes_on_refulfilled_request(small_catalog, make_broker, make_job):
    prices = {DC1: [(0, '0.030'), (4500, '0.035'), (6000, '0.030')]}
    sim, provider, broker = make_broker(small_catalog, prices, mechanism='checkpointing')
    submit(broker, make_job(base_runtime_s=6000, deadline=12_300), 0)
    sim.run_until(20_000)
    assert broker.completed == {1: 8722}
    assert broker.metrics.max_lost_work_s == 572
    assert broker.metrics.counts[RunEventKind.SNAPSHOT] == 1
    (request,) = provider.requests.values()
    assert len(request.instances) == 2
    assert provider.total_revenue() == 60000


def test_migration_moves_job_to_cheaper_datacenter(two_dc_catalog, make_broker, make_job):
    prices = {DC1: [(0, '0.030'), (4500, '0.090')], DC2: [(0, '0.040')]}
    sim, provider, broker = make_broker(two_dc_catalog, prices, mechanism='migration')
    submit(broker, make_job(base_runtime_s=6000, deadline=9_600), 0)
    sim.run_until(20_000)
    assert broker.completed == {1: 7243}
    assert broker.metrics.counts[RunEventKind.MIGRATION] == 1
    assert [r.datacenter for r in provider.requests.values()] == ['dc1', 'dc2']
    assert [r.bid for r in provider.requests.values()] == [31000, 41000]


def test_migration_waits_for_urgency_before_bidding(two_dc_catalog, make_broker, make_job):
    prices = {DC1: [(0, '0.030'), (4500, '0.090')], DC2: [(0, '0.040')]}
    sim, provider, broker = make_broker(two_dc_catalog, prices, mechanism='migration')
    submit(broker, make_job(base_runtime_s=6000, deadline=12_300), 0)
    sim.run_until(5000)
    run = broker.runs[0]
    assert run.state == JobState.RECOVERING
    assert run.recheck_at == 7200
    assert len(provider.requests) == 1
    sim.run_until(20_000)
    assert broker.completed == {1: 9943}
    assert [r.bid for r in provider.requests.values()] == [31000, 41000]
    postponed = [e for e in broker.history.get_all() if e['event'] == 'postpone']
    assert [(e['time'], e['until']) for e in postponed] == [(4500, 7200)]


def test_minimum_bid_below_off_grid_price_step_fails_first(small_catalog, make_broker, make_job):
    prices = {DC1: [(0, '0.030'), (1000, '0.0305'), (3000, '0.0312')]}
    failures = {}
    for strategy in ('minimum', 'current'):
        sim, provider, broker = make_broker(small_catalog, prices, strategy=strategy)
        sim.run_until(1000)
        actions = submit(broker, make_job(submit_time=1000, base_runtime_s=3600, deadline=8000), 1000)
        assert [a.kind for a in actions] == ['lease']
        sim.run_until(5000)
        failures[strategy] = (actions[0].bid, broker.metrics.counts[RunEventKind.FAILURE])
    assert failures == {'minimum': (31000, 1), 'current': (31500, 0)}


def test_unfinished_jobs_are_violations_or_censored(small_catalog, make_broker, make_job):
    sim, provider, broker = make_broker(small_catalog)
    broker.on_job_arrival(make_job(job_id=1, deadline=1000), 0)
    broker.on_job_arrival(make_job(job_id=2, deadline=100_000), 0)
    assert broker.classify_unfinished(5000) == 1
    assert broker.metrics.violated_jobs == {1}


def test_shutdown_bills_every_instance(small_catalog, make_broker, make_job):
    sim, provider, broker = make_broker(small_catalog)
    submit(broker, make_job(base_runtime_s=3600, deadline=7000), 0)
    sim.run_until(2000)
    broker.shutdown(2000)
    assert provider.live_instances() == []
    broker.classify_unfinished(2000)
    metrics = broker.metrics.finalize(provider, censored=1)
    assert metrics.total_cost_micros == 30000
    assert metrics.jobs_censored == 1
    assert metrics.dollars_per_useful_computation is None
