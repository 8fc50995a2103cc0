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
Suspend and resume overheads of saving VM state
"""
import math
from dataclasses import dataclass

from config import RESTORE_RATE_CROSS_DC_MBPS, RESTORE_RATE_SAME_DC_MBPS, SERIALIZE_RATE_MBPS
from core.errors import ConfigurationError


@dataclass(frozen=True)
class TransferRates:
    """MB/s for serializing state and restoring it in the same or another datacenter"""
    s: float = SERIALIZE_RATE_MBPS
    r_same_dc: float = RESTORE_RATE_SAME_DC_MBPS
    r_cross_dc: float = RESTORE_RATE_CROSS_DC_MBPS

    def __post_init__(self):
        if min(self.s, self.r_same_dc, self.r_cross_dc) <= 0:
            raise ConfigurationError("Transfer rates must be positive")


def _ceil_ratio(memory_mb: float, rate: float) -> int:
    if memory_mb <= 0:
        return 0
    return math.ceil(round(memory_mb / rate, 9))


def suspend_time(memory_mb: float, rates: TransferRates = TransferRates()) -> int:
    """t_s = m / s, whole seconds"""
    return _ceil_ratio(memory_mb, rates.s)


def resume_time(memory_mb: float, same_dc: bool, rates: TransferRates = TransferRates()) -> int:
    """t_r = m / r, with the halved rate across datacenters"""
    return _ceil_ratio(memory_mb, rates.r_same_dc if same_dc else rates.r_cross_dc)
