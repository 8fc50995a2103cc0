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
Bidding strategies, urgency and the bid check
"""
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

from config import BID_GRANULARITY_MICROS, HIGH_BID_MICROS, PROVISIONING_LAG_S
from core.errors import ConfigurationError
from core.market.money import round_to_granularity
from core.market.prices import PriceWindow
from core.workload.jobs import Job


class StrategyKind(Enum):
    MINIMUM = "minimum"
    MEAN = "mean"
    ON_DEMAND = "on-demand"
    HIGH = "high"
    CURRENT = "current"

    @classmethod
    def from_name(cls, name: str) -> "StrategyKind":
        normalized = name.strip().lower().replace('_', '-')
        if normalized == 'ondemand':
            normalized = 'on-demand'
        for kind in cls:
            if kind.value == normalized:
                return kind
        raise ConfigurationError(f"Unknown bidding strategy '{name}'")

    @property
    def uses_history(self) -> bool:
        return self in (StrategyKind.MINIMUM, StrategyKind.MEAN)


@dataclass(frozen=True)
class BiddingStrategy:
    kind: StrategyKind
    granularity: int = BID_GRANULARITY_MICROS
    mean_weighted: bool = True

    @classmethod
    def named(cls, name: str, **kwargs) -> "BiddingStrategy":
        return cls(kind=StrategyKind.from_name(name), **kwargs)


@dataclass(frozen=True)
class UrgencyParams:
    alpha: float
    provisioning_lag_s: int = PROVISIONING_LAG_S

    def __post_init__(self):
        if self.alpha <= 0:
            raise ConfigurationError(f"alpha must be positive, got {self.alpha}")


def urgency(job: Job, t: int, params: UrgencyParams, estimate_s: float) -> int:
    """U = max(0, D - t - (alpha * e + B)), floored to whole seconds"""
    if estimate_s < 0:
        raise ValueError("Estimated runtime must be non-negative")
    slack = job.deadline - t - (params.alpha * estimate_s + params.provisioning_lag_s)
    return max(0, math.floor(round(slack, 6)))


def compute_bid(strategy: BiddingStrategy, history: Optional[PriceWindow], current_price: int,
                on_demand_price: int) -> int:
    """
    Bid in micro-dollars per hour for a strategy

    Raises:
        ValueError: If a history-based strategy gets an empty price window
    """
    kind = strategy.kind
    g = strategy.granularity
    if kind.uses_history and (history is None or not history.points):
        raise ValueError(f"{kind.value} strategy needs a non-empty price history")
    if kind == StrategyKind.MINIMUM:
        return history.minimum() + g
    if kind == StrategyKind.MEAN:
        mean = history.time_weighted_mean() if strategy.mean_weighted else history.unweighted_mean()
        return max(g, round_to_granularity(mean, g))
    if kind == StrategyKind.ON_DEMAND:
        return on_demand_price
    if kind == StrategyKind.HIGH:
        return HIGH_BID_MICROS
    return current_price + g


@dataclass(frozen=True)
class Provision:
    bid: int


@dataclass(frozen=True)
class Recheck:
    at: int


BidDecision = Union[Provision, Recheck]


def decide_bid(bid: int, urgency_s: int, current_price: int, t: int,
               granularity: int = BID_GRANULARITY_MICROS) -> BidDecision:
    """Provision now when the job is urgent, overriding a bid at or below the price"""
    if urgency_s > 0:
        return Recheck(at=t + urgency_s)
    if bid <= current_price:
        bid = current_price + granularity
    return Provision(bid=bid)


def bid_check(job: Job, t: int, strategy: BiddingStrategy, params: UrgencyParams, *, estimate_s: int,
              history: Optional[PriceWindow], current_price: int, on_demand_price: int) -> BidDecision:
    """Compute b, U and P for a job and decide to provision or check again later"""
    bid = compute_bid(strategy, history, current_price, on_demand_price)
    return decide_bid(bid, urgency(job, t, params, estimate_s), current_price, t, strategy.granularity)
