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
Tests for the spot market provider: provisioning, out-of-bid terminations and billing
"""
import math

import numpy as np
import pytest

from core.errors import ConfigurationError, InstanceStateError
from core.market.provider import InstanceState, RequestState, SpotRequest

MARKET = ('dc1', 'm1.small')

# Hour-start prices 0.030 / 0.032 / 0.031 for a lease that starts at t=300
BILLING_POINTS = [(0, '0.030'), (3900, '0.032'), (7500, '0.031')]


class Recorder:
    def __init__(self):
        self.running = []
        self.terminated = []

    def on_instance_running(self, instance, t):
        self.running.append((instance.id, t))

    def on_instance_terminated(self, instance, t):
        self.terminated.append((instance.id, t))


def lease(sim, provider, bid, datacenter='dc1', persistent=False, t=0):
    request = provider.submit_request(SpotRequest('m1.small', bid=bid, datacenter=datacenter,
                                                  persistent=persistent), t)
    sim.run_until(t + provider.provisioning_lag_s)
    return request


def test_bid_above_price_runs_after_provisioning_lag(small_catalog, make_provider):
    sim, provider = make_provider(small_catalog)
    request = lease(sim, provider, bid=50000)
    instance = request.instance
    assert instance.state == InstanceState.RUNNING
    assert instance.lease_start == 300


def test_bid_equal_to_price_is_not_provisioned(small_catalog, make_provider):
    sim, provider = make_provider(small_catalog)
    request = provider.submit_request(SpotRequest('m1.small', bid=30000, datacenter='dc1'), 0)
    assert request.state == RequestState.CLOSED
    assert request.instance is None


def test_persistent_request_waits_for_price_drop(small_catalog, make_provider):
    sim, provider = make_provider(small_catalog, {MARKET: [(0, '0.030'), (1000, '0.020')]})
    provider.schedule_price_changes(0, 5000)
    request = provider.submit_request(SpotRequest('m1.small', bid=25000, datacenter='dc1', persistent=True), 0)
    assert request.state == RequestState.OPEN
    sim.run_until(5000)
    assert request.instance.state == InstanceState.RUNNING
    assert request.instance.lease_start == 1300


def test_provider_picks_cheapest_datacenter(two_dc_catalog, make_provider):
    sim, provider = make_provider(two_dc_catalog, {('dc2', 'm1.small'): [(0, '0.020')]})
    request = provider.submit_request(SpotRequest('m1.small', bid=50000), 0)
    assert request.datacenter == 'dc2'


def test_unknown_type_and_low_bid_are_rejected(small_catalog, make_provider):
    sim, provider = make_provider(small_catalog)
    with pytest.raises(ConfigurationError):
        provider.submit_request(SpotRequest('x9.huge', bid=50000), 0)
    with pytest.raises(ValueError):
        provider.submit_request(SpotRequest('m1.small', bid=999), 0)


def test_price_reaching_bid_terminates(small_catalog, make_provider):
    sim, provider = make_provider(small_catalog, {MARKET: [(0, '0.035')]})
    recorder = Recorder()
    provider.listener = recorder
    at_bid = lease(sim, provider, bid=40000).instance
    above_bid = lease(sim, provider, bid=41000, t=300).instance
    victims = provider.apply_price_change('dc1', 'm1.small', 1000, 40000)
    assert victims == [at_bid]
    assert at_bid.state == InstanceState.OUT_OF_BID
    assert above_bid.state == InstanceState.RUNNING
    assert recorder.terminated == [(at_bid.id, 1000)]


def test_price_fall_terminates_nothing(small_catalog, make_provider):
    sim, provider = make_provider(small_catalog, {MARKET: [(0, '0.035')]})
    lease(sim, provider, bid=40000)
    assert provider.apply_price_change('dc1', 'm1.small', 1000, 20000) == []


def test_client_termination_charges_partial_hour(small_catalog, make_provider):
    sim, provider = make_provider(small_catalog, {MARKET: BILLING_POINTS})
    instance = lease(sim, provider, bid=50000).instance
    assert provider.terminate_by_client(instance, 300 + 9000) == 93000
    assert [r.price_charged for r in instance.billing] == [30000, 32000, 31000]
    assert all(r.charged for r in instance.billing)


def test_out_of_bid_partial_hour_is_free(small_catalog, make_provider):
    sim, provider = make_provider(small_catalog, {MARKET: BILLING_POINTS})
    instance = lease(sim, provider, bid=50000).instance
    provider.apply_price_change('dc1', 'm1.small', 300 + 9000, 60000)
    assert provider.compute_bill(instance) == 62000
    assert [r.charged for r in instance.billing] == [True, True, False]


def test_termination_on_hour_boundary_has_no_partial_hour(small_catalog, make_provider):
    sim, provider = make_provider(small_catalog, {MARKET: BILLING_POINTS})
    instance = lease(sim, provider, bid=50000).instance
    assert provider.terminate_by_client(instance, 300 + 7200) == 62000
    assert len(instance.billing) == 2


def test_terminating_a_pending_instance_is_an_error(small_catalog, make_provider):
    sim, provider = make_provider(small_catalog)
    request = provider.submit_request(SpotRequest('m1.small', bid=50000, datacenter='dc1'), 0)
    with pytest.raises(InstanceStateError):
        provider.terminate_by_client(request.instance, 10)
    assert provider.cancel_request(request, 10) == 0
    assert request.instance.state == InstanceState.CLIENT_TERMINATED


def test_persistent_request_is_refulfilled_after_out_of_bid(small_catalog, make_provider):
    sim, provider = make_provider(small_catalog, {MARKET: [(0, '0.030'), (2000, '0.050'), (4000, '0.030')]})
    provider.schedule_price_changes(0, 10000)
    request = lease(sim, provider, bid=40000, persistent=True)
    sim.run_until(10000)
    first, second = request.instances
    assert first.state == InstanceState.OUT_OF_BID
    assert second.state == InstanceState.RUNNING
    assert second.lease_start == 4300


def hour_walk_bill(points, lease_start, end, client):
    """Independent oracle: walk whole hours and charge each hour's start price"""
    def price(t):
        value = None
        for time, p in points:
            if time <= t:
                value = p
        return value

    total = 0
    hour_start = lease_start
    while hour_start < end:
        full = hour_start + 3600 <= end
        if full or client:
            total += price(hour_start)
        hour_start += 3600
    return total


def test_bills_match_hour_walk_oracle(small_catalog, make_provider):
    rng = np.random.default_rng(2024)
    times = list(range(0, 60 * 3600, 900))
    prices = [int(p) * 1000 for p in rng.integers(20, 60, size=len(times))]
    points = list(zip(times, prices))
    usd_points = [(t, f"{p / 1e6:.3f}") for t, p in points]
    lifetimes = [int(x) for x in rng.integers(1, 40 * 3600, size=46)] + [3600, 7200, 1, 3599]

    for lifetime in lifetimes:
        for client in (True, False):
            sim, provider = make_provider(small_catalog, {MARKET: usd_points})
            instance = lease(sim, provider, bid=10_000_000).instance
            end = instance.lease_start + lifetime
            if client:
                bill = provider.terminate_by_client(instance, end)
                assert instance.charged_hours() == math.ceil(lifetime / 3600)
            else:
                provider.apply_price_change('dc1', 'm1.small', end, 20_000_000)
                bill = provider.compute_bill(instance)
                assert instance.charged_hours() == lifetime // 3600
            assert bill == hour_walk_bill(points, instance.lease_start, end, client)
            assert provider.total_revenue() == bill


def test_no_running_instance_is_ever_out_of_bid(small_catalog, make_provider):
    rng = np.random.default_rng(99)
    times = list(range(0, 48 * 3600, 1200))
    usd_points = [(t, f"0.0{int(p)}") for t, p in zip(times, rng.integers(20, 60, size=len(times)))]
    sim, provider = make_provider(small_catalog, {MARKET: usd_points})
    provider.schedule_price_changes(0, times[-1])
    for bid in (25000, 35000, 45000, 55000):
        provider.submit_request(SpotRequest('m1.small', bid=bid, datacenter='dc1', persistent=True), 0)

    for t in times:
        sim.run_until(t)
        price = provider.current_price('dc1', 'm1.small', t)
        for instance in provider.instances.values():
            if instance.state == InstanceState.RUNNING:
                assert instance.bid > price
    terminated = [i for i in provider.instances.values() if i.state == InstanceState.OUT_OF_BID]
    assert terminated
    for instance in terminated:
        assert instance.charged_hours() == instance.lifetime() // 3600
