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
Money helpers: prices and bills are integer micro-dollars internally
"""
from decimal import Decimal, InvalidOperation, ROUND_HALF_UP
from typing import Union

from config import MICROS_PER_USD


def to_micros(value: Union[str, int, float, Decimal]) -> int:
    """Convert a USD amount to integer micro-dollars, rounding half up"""
    try:
        amount = Decimal(str(value)) if not isinstance(value, Decimal) else value
    except InvalidOperation:
        raise ValueError(f"Not a decimal amount: {value!r}")
    if not amount.is_finite():
        raise ValueError(f"Not a finite amount: {value!r}")
    return int((amount * MICROS_PER_USD).quantize(Decimal(1), rounding=ROUND_HALF_UP))


def to_usd(micros: int) -> float:
    return micros / MICROS_PER_USD


def round_to_granularity(micros: float, granularity: int) -> int:
    """Round an amount to the nearest multiple of the bid granularity, half up"""
    steps = (Decimal(str(micros)) / granularity).quantize(Decimal(1), rounding=ROUND_HALF_UP)
    return int(steps) * granularity
