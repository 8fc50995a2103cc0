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
Spot market provider for spotsim
Bid-gated provisioning, out-of-bid termination and hourly billing
"""
import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional

from config import BID_GRANULARITY_MICROS, HOUR_S, PROVISIONING_LAG_S, logger
from core.errors import ConfigurationError, InstanceStateError
from core.market.catalog import Catalog, MarketKey
from core.market.prices import PriceSeries, PriceWindow
from core.sim.engine import Event, EventKind, Simulator


class InstanceState(Enum):
    PENDING = "pending"
    RUNNING = "running"
    OUT_OF_BID = "out-of-bid-terminated"
    CLIENT_TERMINATED = "client-terminated"


class RequestState(Enum):
    OPEN = "open"  # waiting for the price to fall below the bid
    ACTIVE = "active"  # has a pending or running instance
    CLOSED = "closed"


@dataclass(eq=False)
class SpotRequest:
    """Request for one instance of a type, gated by a bid"""
    instance_type: str
    bid: int  # micro-dollars per hour
    datacenter: Optional[str] = None
    persistent: bool = False
    id: int = -1
    state: RequestState = RequestState.OPEN
    submitted_at: Optional[int] = None
    instances: List["Instance"] = field(default_factory=list)

    @property
    def market(self) -> MarketKey:
        return (self.datacenter, self.instance_type)

    @property
    def instance(self) -> Optional["Instance"]:
        """The latest instance launched for this request"""
        return self.instances[-1] if self.instances else None


@dataclass(eq=False)
class BillingRecord:
    hour_index: int
    price_charged: int
    charged: bool = True


@dataclass(eq=False)
class Instance:
    """A VM launched for a spot request"""
    id: int
    request: SpotRequest
    datacenter: str
    instance_type: str
    requested_at: int
    state: InstanceState = InstanceState.PENDING
    lease_start: Optional[int] = None
    end: Optional[int] = None
    billing: List[BillingRecord] = field(default_factory=list)

    @property
    def market(self) -> MarketKey:
        return (self.datacenter, self.instance_type)

    @property
    def bid(self) -> int:
        return self.request.bid

    @property
    def terminated(self) -> bool:
        return self.state in (InstanceState.OUT_OF_BID, InstanceState.CLIENT_TERMINATED)

    def lifetime(self) -> int:
        if self.lease_start is None or self.end is None:
            return 0
        return self.end - self.lease_start

    def next_boundary(self, t: int) -> int:
        """Start of the next billing hour strictly after t"""
        elapsed = t - self.lease_start
        return self.lease_start + (elapsed // HOUR_S + 1) * HOUR_S

    def charged_hours(self) -> int:
        return sum(1 for record in self.billing if record.charged)


class Provider:
    """
    Elastic provider of one region: every (datacenter, type) market has its own
    spot price series and instances live while their bid exceeds it
    """

    def __init__(self, catalog: Catalog, series: Dict[MarketKey, PriceSeries], simulator: Simulator,
                 provisioning_lag_s: int = PROVISIONING_LAG_S):
        self.catalog = catalog
        self.series = series
        self.sim = simulator
        self.provisioning_lag_s = provisioning_lag_s
        self.listener = None
        self.on_billed: Optional[Callable[[Instance, int], None]] = None
        self.requests: Dict[int, SpotRequest] = {}
        self.instances: Dict[int, Instance] = {}
        self._waiting: Dict[int, SpotRequest] = {}
        self._running: Dict[MarketKey, Dict[int, Instance]] = {}
        self._request_ids = itertools.count(1)
        self._instance_ids = itertools.count(1)
        for dc_id, type_name in catalog.markets():
            if (dc_id, type_name) not in series:
                raise ConfigurationError(f"No price series for market {dc_id}/{type_name}")

    # =============
    # PRICE QUERIES
    # =============

    def _series(self, dc_id: str, type_name: str) -> PriceSeries:
        try:
            return self.series[(dc_id, type_name)]
        except KeyError:
            raise ConfigurationError(f"Unknown market {dc_id}/{type_name}")

    def current_price(self, dc_id: str, type_name: str, t: int) -> int:
        return self._series(dc_id, type_name).price_at(t)

    def history_window(self, dc_id: str, type_name: str, t: int, window_seconds: int) -> PriceWindow:
        return self._series(dc_id, type_name).window(t, window_seconds)

    def cheapest_datacenter(self, type_name: str, t: int, exclude=()) -> Optional[str]:
        """Datacenter with the lowest current price for a type, ties by id"""
        candidates = [dc_id for dc_id in self.catalog.datacenters_offering(type_name) if dc_id not in exclude]
        if not candidates:
            return None
        return min(candidates, key=lambda dc_id: (self.current_price(dc_id, type_name, t), dc_id))

    # ========
    # REQUESTS
    # ========

    def submit_request(self, request: SpotRequest, t: int) -> SpotRequest:
        """
        Submit a spot request; provisions when the bid exceeds the current price

        Returns:
            SpotRequest: the same request, now ACTIVE, OPEN (persistent and
            out-of-bid) or CLOSED (rejected)
        """
        instance_type = self.catalog.instance_type(request.instance_type)
        if request.bid < BID_GRANULARITY_MICROS:
            raise ValueError(f"Bid {request.bid} is below the minimum granularity")
        if request.datacenter is None:
            request.datacenter = self.cheapest_datacenter(instance_type.name, t)
            if request.datacenter is None:
                raise ConfigurationError(f"No datacenter offers {instance_type.name}")
        elif not self.catalog.datacenter(request.datacenter).offers(instance_type.name):
            raise ConfigurationError(f"{request.datacenter} does not offer {instance_type.name}")

        request.id = next(self._request_ids)
        request.submitted_at = t
        self.requests[request.id] = request

        price = self.current_price(request.datacenter, request.instance_type, t)
        if request.bid > price:
            self._fulfil(request, t)
        elif request.persistent:
            request.state = RequestState.OPEN
            self._waiting[request.id] = request
            logger.debug(f"Request {request.id} waiting: bid {request.bid} <= price {price}")
        else:
            request.state = RequestState.CLOSED
            logger.debug(f"Request {request.id} rejected: bid {request.bid} <= price {price}")
        return request

    def _fulfil(self, request: SpotRequest, t: int):
        instance = Instance(
            id=next(self._instance_ids),
            request=request,
            datacenter=request.datacenter,
            instance_type=request.instance_type,
            requested_at=t,
        )
        request.state = RequestState.ACTIVE
        request.instances.append(instance)
        self._waiting.pop(request.id, None)
        self.instances[instance.id] = instance
        self.sim.at(t + self.provisioning_lag_s, EventKind.PROVISION_DONE, self._on_provisioned, instance=instance)

    def _on_provisioned(self, event: Event):
        instance = event.payload['instance']
        if instance.state != InstanceState.PENDING:
            return
        t = event.fire_time
        instance.state = InstanceState.RUNNING
        instance.lease_start = t
        self._running.setdefault(instance.market, {})[instance.id] = instance
        price = self.current_price(instance.datacenter, instance.instance_type, t)
        if instance.bid <= price:
            # Price rose past the bid during provisioning
            self._terminate(instance, t, InstanceState.OUT_OF_BID)
            self._notify('on_instance_terminated', instance, t)
            return
        logger.debug(f"Instance {instance.id} running in {instance.datacenter}/{instance.instance_type}")
        self._notify('on_instance_running', instance, t)

    def cancel_request(self, request: SpotRequest, t: int) -> int:
        """Close a request, discarding a pending instance or terminating a running one"""
        bill = 0
        self._waiting.pop(request.id, None)
        instance = request.instance
        if instance is not None and instance.state == InstanceState.PENDING:
            instance.state = InstanceState.CLIENT_TERMINATED
            instance.end = t
            self._billed(instance, 0)
        elif instance is not None and instance.state == InstanceState.RUNNING:
            request.persistent = False
            bill = self.terminate_by_client(instance, t)
        request.state = RequestState.CLOSED
        return bill

    # ================
    # PRICE EVOLUTION
    # ================

    def apply_price_change(self, dc_id: str, type_name: str, t: int, new_price: int) -> List[Instance]:
        """
        Apply a new spot price to one market

        Returns:
            list: instances terminated out-of-bid by this change
        """
        if new_price <= 0:
            raise ValueError("Spot price must be positive")
        market = (dc_id, type_name)
        running = self._running.get(market, {})
        victims = [running[i] for i in sorted(running) if running[i].bid <= new_price]
        for instance in victims:
            self._terminate(instance, t, InstanceState.OUT_OF_BID)
        for instance in victims:
            logger.debug(f"Instance {instance.id} out-of-bid at t={t} (bid {instance.bid} <= {new_price})")
            self._notify('on_instance_terminated', instance, t)

        waiting = [r for r in sorted(self._waiting.values(), key=lambda r: r.id)
                   if r.market == market and r.bid > new_price]
        for request in waiting:
            self._fulfil(request, t)
        return victims

    def schedule_price_changes(self, after: int, until: int) -> int:
        """Queue a PRICE_CHANGE event for every trace point in (after, until]"""
        changes = sorted(
            (time, key, price)
            for key in self.catalog.markets()
            for time, price in self.series[key].changes_between(after, until)
        )
        for time, key, price in changes:
            self.sim.at(time, EventKind.PRICE_CHANGE, self._on_price_event, market=key, price=price)
        return len(changes)

    def _on_price_event(self, event: Event):
        dc_id, type_name = event.payload['market']
        self.apply_price_change(dc_id, type_name, event.fire_time, event.payload['price'])

    # =======================
    # TERMINATION AND BILLING
    # =======================

    def terminate_by_client(self, instance: Instance, t: int) -> int:
        """Terminate a running instance; the partial hour is charged as a full one"""
        if instance.state != InstanceState.RUNNING:
            raise InstanceStateError(f"Instance {instance.id} is {instance.state.value}, not running")
        self._terminate(instance, t, InstanceState.CLIENT_TERMINATED)
        return self.compute_bill(instance)

    def _terminate(self, instance: Instance, t: int, state: InstanceState):
        instance.state = state
        instance.end = t
        self._running.get(instance.market, {}).pop(instance.id, None)
        instance.billing = self._hour_records(instance, state)

        request = instance.request
        if state == InstanceState.OUT_OF_BID and request.persistent and request.state != RequestState.CLOSED:
            request.state = RequestState.OPEN
            self._waiting[request.id] = request
        else:
            request.state = RequestState.CLOSED
        self._billed(instance, self.compute_bill(instance))

    def _hour_records(self, instance: Instance, state: InstanceState) -> List[BillingRecord]:
        lifetime = instance.lifetime()
        hours = math.ceil(lifetime / HOUR_S)
        partial = lifetime % HOUR_S != 0
        records = []
        for k in range(hours):
            price = self.current_price(instance.datacenter, instance.instance_type,
                                       instance.lease_start + k * HOUR_S)
            free = state == InstanceState.OUT_OF_BID and partial and k == hours - 1
            records.append(BillingRecord(hour_index=k, price_charged=price, charged=not free))
        return records

    def compute_bill(self, instance: Instance) -> int:
        if not instance.terminated:
            raise InstanceStateError(f"Instance {instance.id} has not been terminated")
        return sum(record.price_charged for record in instance.billing if record.charged)

    def total_revenue(self) -> int:
        return sum(self.compute_bill(i) for i in self.instances.values() if i.terminated)

    def live_instances(self) -> List[Instance]:
        return [i for i in self.instances.values() if not i.terminated]

    def _billed(self, instance: Instance, amount: int):
        if self.on_billed is not None:
            self.on_billed(instance, amount)

    def _notify(self, method: str, instance: Instance, t: int):
        callback = getattr(self.listener, method, None)
        if callback is not None:
            callback(instance, t)
