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
Instance types and datacenters offered by the modeled provider
"""
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, Optional, Tuple

from config import INSTANCE_TYPES, DATACENTERS
from core.errors import ConfigurationError
from core.market.money import to_micros


@dataclass(frozen=True)
class InstanceType:
    """A VM type; memory_mb drives suspend/resume overheads"""
    name: str
    ecus: float
    cores: int
    memory_mb: int
    on_demand_price: int  # micro-dollars per hour

    def __post_init__(self):
        if self.ecus <= 0:
            raise ConfigurationError(f"{self.name}: ecus must be positive")
        if self.cores < 1:
            raise ConfigurationError(f"{self.name}: cores must be at least 1")
        if self.memory_mb <= 0:
            raise ConfigurationError(f"{self.name}: memory_mb must be positive")
        if self.on_demand_price <= 0:
            raise ConfigurationError(f"{self.name}: on_demand_price must be positive")

    @property
    def ecu_per_core(self) -> float:
        return self.ecus / self.cores


@dataclass(frozen=True)
class Datacenter:
    id: str
    offered_markets: FrozenSet[str]

    def __post_init__(self):
        if not self.offered_markets:
            raise ConfigurationError(f"Datacenter {self.id} offers no instance types")

    def offers(self, type_name: str) -> bool:
        return type_name in self.offered_markets


MarketKey = Tuple[str, str]  # (datacenter id, instance type name)


class Catalog:
    """Instance types and datacenters of one simulated region"""

    def __init__(self, types: Iterable[InstanceType], datacenters: Iterable[Datacenter]):
        self.types: Dict[str, InstanceType] = {t.name: t for t in types}
        self.datacenters: Dict[str, Datacenter] = {dc.id: dc for dc in datacenters}
        if not self.types:
            raise ConfigurationError("No instance types configured")
        if not self.datacenters:
            raise ConfigurationError("No datacenters configured")
        for dc in self.datacenters.values():
            unknown = dc.offered_markets - set(self.types)
            if unknown:
                raise ConfigurationError(f"Datacenter {dc.id} offers unknown types: {sorted(unknown)}")

    def instance_type(self, name: str) -> InstanceType:
        try:
            return self.types[name]
        except KeyError:
            raise ConfigurationError(f"Unknown instance type: {name}")

    def datacenter(self, dc_id: str) -> Datacenter:
        try:
            return self.datacenters[dc_id]
        except KeyError:
            raise ConfigurationError(f"Unknown datacenter: {dc_id}")

    def markets(self):
        """All (datacenter, type) markets in a stable order"""
        return [(dc_id, type_name)
                for dc_id in sorted(self.datacenters)
                for type_name in sorted(self.datacenters[dc_id].offered_markets)]

    def datacenters_offering(self, type_name: str):
        return [dc_id for dc_id in sorted(self.datacenters) if self.datacenters[dc_id].offers(type_name)]

    def types_by_name(self):
        return [self.types[name] for name in sorted(self.types)]


def default_catalog(type_table: Optional[Dict[str, tuple]] = None,
                    datacenter_ids: Optional[Iterable[str]] = None) -> Catalog:
    """Build the default region: every datacenter offers every type"""
    table = type_table or INSTANCE_TYPES
    types = [
        InstanceType(name=name, ecus=float(ecus), cores=int(cores), memory_mb=int(memory),
                     on_demand_price=to_micros(price))
        for name, (ecus, cores, memory, price) in table.items()
    ]
    names = frozenset(t.name for t in types)
    dcs = [Datacenter(id=dc_id, offered_markets=names) for dc_id in (datacenter_ids or DATACENTERS)]
    return Catalog(types, dcs)
