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
Shared fixtures for the spotsim test suite
"""
import pytest

from core.broker.bidding import BiddingStrategy, UrgencyParams
from core.broker.scheduler import Broker
from core.fault.mechanisms import MechanismKind
from core.history import SimulationHistory
from core.market.catalog import default_catalog
from core.market.money import to_micros
from core.market.prices import PriceSeries
from core.market.provider import Provider
from core.sim.engine import Simulator
from core.workload.jobs import Job

SMALL_ONLY = {'m1.small': (1.0, 1, 1740, '0.085')}


@pytest.fixture
def catalog():
    """The default region: five types in four datacenters"""
    return default_catalog()


@pytest.fixture
def small_catalog():
    """m1.small in a single datacenter"""
    return default_catalog(SMALL_ONLY, ['dc1'])


@pytest.fixture
def two_dc_catalog():
    return default_catalog(SMALL_ONLY, ['dc1', 'dc2'])


def _series(catalog, markets=None, default=((0, '0.030'),)):
    """One PriceSeries per market; markets maps (dc, type) to [(time, usd)]"""
    markets = markets or {}
    series = {}
    for key in catalog.markets():
        points = markets.get(key, default)
        series[key] = PriceSeries(key, [(t, to_micros(usd)) for t, usd in points])
    return series


@pytest.fixture
def make_series():
    return _series


@pytest.fixture
def make_job():
    def factory(job_id=1, user_id=1, submit_time=0, base_runtime_s=3600, parallelism=1.0, sigma=0.0,
                user_estimate_s=None, deadline=None):
        estimate = user_estimate_s if user_estimate_s is not None else base_runtime_s
        return Job(id=job_id, user_id=user_id, submit_time=submit_time, base_runtime_s=base_runtime_s,
                   parallelism=parallelism, sigma=sigma, user_estimate_s=estimate,
                   deadline=deadline if deadline is not None else submit_time + 4 * estimate)
    return factory


@pytest.fixture
def make_provider():
    """(simulator, provider) over the given catalog and price points"""
    def factory(catalog, markets=None, default=((0, '0.030'),), start_time=0):
        sim = Simulator(start_time=start_time)
        provider = Provider(catalog, _series(catalog, markets, default), sim)
        return sim, provider
    return factory


@pytest.fixture
def make_broker(make_provider):
    """(simulator, provider, broker) with price changes queued for the first ten days"""
    def factory(catalog, markets=None, strategy='current', alpha=2.0, mechanism='none', default=((0, '0.030'),)):
        sim, provider = make_provider(catalog, markets, default)
        provider.schedule_price_changes(0, 10 * 86400)
        broker = Broker(sim, provider, catalog, BiddingStrategy.named(strategy), UrgencyParams(alpha=alpha),
                        mechanism=MechanismKind.from_name(mechanism), history=SimulationHistory())
        return sim, provider, broker
    return factory
