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
Spot price series for spotsim
Loads, queries, writes and synthesizes step-function price histories
"""
import bisect
import csv
import math
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from decimal import Decimal, InvalidOperation
from typing import Dict, Iterable, List, Optional, Tuple

from config import BID_GRANULARITY_MICROS, DAY_S, logger
from core.errors import ConfigurationError, TraceParseError, SimulationError
from core.market.catalog import Catalog, MarketKey
from core.market.money import round_to_granularity, to_micros

TRACE_HEADER = ('timestamp', 'datacenter', 'instance_type', 'price')

PricePoint = Tuple[int, int]  # (time, micro-dollars per hour)


@dataclass
class PriceWindow:
    """Price points covering [start, end], first point may predate start"""
    start: int
    end: int
    points: List[PricePoint]

    def values(self) -> List[int]:
        return [price for _, price in self.points]

    def minimum(self) -> int:
        return min(self.values())

    def unweighted_mean(self) -> float:
        values = self.values()
        return sum(values) / len(values)

    def time_weighted_mean(self) -> float:
        """Mean of the step function over the window"""
        total = 0
        weighted = 0
        for i, (time, price) in enumerate(self.points):
            seg_start = max(time, self.start)
            seg_end = self.points[i + 1][0] if i + 1 < len(self.points) else self.end
            seg_end = min(seg_end, self.end)
            if seg_end > seg_start:
                weighted += price * (seg_end - seg_start)
                total += seg_end - seg_start
        if total == 0:
            return float(self.points[-1][1])
        return weighted / total


class PriceSeries:
    """Right-continuous step function of the spot price for one market"""

    def __init__(self, key: MarketKey, points: Iterable[PricePoint]):
        self.key = key
        pts = list(points)
        if not pts:
            raise ConfigurationError(f"Market {key} has no price points")
        self.times: List[int] = []
        self.prices: List[int] = []
        for time, price in pts:
            if self.times and time <= self.times[-1]:
                raise ConfigurationError(f"Market {key}: timestamps must be strictly increasing at t={time}")
            if price <= 0:
                raise ConfigurationError(f"Market {key}: price must be positive at t={time}")
            self.times.append(int(time))
            self.prices.append(int(price))

    def __len__(self):
        return len(self.times)

    @property
    def datacenter(self) -> str:
        return self.key[0]

    @property
    def instance_type(self) -> str:
        return self.key[1]

    @property
    def start(self) -> int:
        return self.times[0]

    @property
    def end(self) -> int:
        return self.times[-1]

    def points(self) -> List[PricePoint]:
        return list(zip(self.times, self.prices))

    def price_at(self, t: int) -> int:
        """Value of the latest point at or before t; held after the last point"""
        if t < self.times[0]:
            raise SimulationError(f"Market {self.key}: no price before t={self.times[0]} (asked t={t})")
        return self.prices[bisect.bisect_right(self.times, t) - 1]

    def window(self, t: int, window_seconds: int) -> PriceWindow:
        """Points within [t - window, t] plus the one just before the window"""
        if window_seconds <= 0:
            raise ValueError("window_seconds must be positive")
        start = max(t - window_seconds, self.times[0])
        first = max(bisect.bisect_right(self.times, start) - 1, 0)
        last = bisect.bisect_right(self.times, t)
        return PriceWindow(start=start, end=t, points=list(zip(self.times[first:last], self.prices[first:last])))

    def changes_between(self, after: int, until: int) -> List[PricePoint]:
        """Points with after < time <= until"""
        lo = bisect.bisect_right(self.times, after)
        hi = bisect.bisect_right(self.times, until)
        return list(zip(self.times[lo:hi], self.prices[lo:hi]))


# =================
# TRACE FILE FORMAT
# =================

def _parse_timestamp(raw: str) -> int:
    raw = raw.strip()
    if raw.lstrip('-').isdigit():
        return int(raw)
    parsed = datetime.fromisoformat(raw.replace('Z', '+00:00'))
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=timezone.utc)
    return int(parsed.timestamp())


def _looks_like_header(row: List[str]) -> bool:
    if not row:
        return False
    try:
        _parse_timestamp(row[0])
        return False
    except ValueError:
        return True


def _open_source(source):
    if isinstance(source, (str, os.PathLike)):
        return open(source, 'r', newline='', encoding='utf-8'), True
    return source, False


def load_price_traces(source, markets: Optional[Iterable[MarketKey]] = None) -> Dict[MarketKey, PriceSeries]:
    """
    Load a price trace CSV into one series per (datacenter, instance type)

    Args:
        source: Path to the trace or an iterable of text lines
        markets: Markets that must be present (optional)

    Returns:
        dict: PriceSeries keyed by market

    Raises:
        TraceParseError: For malformed or duplicate rows, with the line number
        ConfigurationError: For an empty trace or a required market without rows
    """
    handle, owned = _open_source(source)
    rows: Dict[MarketKey, Dict[int, int]] = {}
    try:
        for line_number, row in enumerate(csv.reader(handle), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if line_number == 1 and _looks_like_header(row):
                continue
            if len(row) != 4:
                raise TraceParseError(f"expected 4 fields, got {len(row)}", line_number)
            raw_time, dc_id, type_name, raw_price = (cell.strip() for cell in row)
            try:
                time = _parse_timestamp(raw_time)
            except ValueError:
                raise TraceParseError(f"bad timestamp {raw_time!r}", line_number)
            try:
                price = Decimal(raw_price)
            except InvalidOperation:
                raise TraceParseError(f"bad price {raw_price!r}", line_number)
            if not price.is_finite() or price <= 0:
                raise TraceParseError(f"price must be positive, got {raw_price!r}", line_number)
            if not dc_id or not type_name:
                raise TraceParseError("empty datacenter or instance type", line_number)
            market = rows.setdefault((dc_id, type_name), {})
            if time in market:
                raise TraceParseError(f"duplicate timestamp {time} for {dc_id}/{type_name}", line_number)
            market[time] = to_micros(price)
    finally:
        if owned:
            handle.close()

    if not rows:
        raise ConfigurationError("Price trace contains no rows")
    for key in markets or ():
        if key not in rows:
            raise ConfigurationError(f"Price trace has no rows for market {key[0]}/{key[1]}")

    series = {key: PriceSeries(key, sorted(points.items())) for key, points in rows.items()}
    logger.info(f"Loaded {sum(len(s) for s in series.values())} price points for {len(series)} markets")
    return series


def format_price(micros: int) -> str:
    return f"{micros // 1_000_000}.{micros % 1_000_000:06d}"


def write_price_traces(series: Dict[MarketKey, PriceSeries], target) -> int:
    """Write series in the trace CSV format; returns the row count"""
    rows = sorted(
        (time, key[0], key[1], price)
        for key, s in series.items()
        for time, price in s.points()
    )
    if isinstance(target, (str, os.PathLike)):
        with open(target, 'w', newline='', encoding='utf-8') as handle:
            return _write_rows(handle, rows)
    return _write_rows(target, rows)


def _write_rows(handle, rows) -> int:
    writer = csv.writer(handle, lineterminator='\n')
    writer.writerow(TRACE_HEADER)
    for time, dc_id, type_name, price in rows:
        writer.writerow([time, dc_id, type_name, format_price(price)])
    return len(rows)


# =================
# SYNTHETIC TRACES
# =================

@dataclass
class SyntheticPriceParams:
    """Mean-reverting log-price random walk with rare spikes"""
    days: float = 100.0
    start_time: int = 0
    mean_change_interval_s: float = 3600.0
    base_ratio: float = 0.35  # long-run level as a fraction of on-demand
    volatility: float = 0.08
    reversion: float = 0.15
    spike_probability: float = 0.01
    spike_ratio: Tuple[float, float] = (1.2, 3.0)
    floor_ratio: float = 0.25
    cap_ratio: float = 4.0

    def validate(self):
        if self.days <= 0:
            raise ConfigurationError("Synthetic trace length must be positive")
        if self.mean_change_interval_s <= 0:
            raise ConfigurationError("mean_change_interval_s must be positive")
        if not 0 < self.floor_ratio <= self.base_ratio <= self.cap_ratio:
            raise ConfigurationError("Need 0 < floor_ratio <= base_ratio <= cap_ratio")
        if not 0 <= self.spike_probability <= 1:
            raise ConfigurationError("spike_probability must be within [0, 1]")
        if not 0 <= self.reversion <= 1:
            raise ConfigurationError("reversion must be within [0, 1]")


def generate_synthetic_prices(rng, catalog: Catalog,
                              params: Optional[SyntheticPriceParams] = None) -> Dict[MarketKey, PriceSeries]:
    """
    Generate piecewise-constant price series for every market in the catalog

    Args:
        rng: numpy Generator (the 'prices' stream)
        catalog: Region whose markets get a series
        params: Walk parameters

    Returns:
        dict: PriceSeries keyed by market
    """
    params = params or SyntheticPriceParams()
    params.validate()
    end = params.start_time + int(params.days * DAY_S)
    series = {}
    for dc_id, type_name in catalog.markets():
        on_demand = catalog.instance_type(type_name).on_demand_price
        floor = max(BID_GRANULARITY_MICROS, on_demand * params.floor_ratio)
        cap = on_demand * params.cap_ratio
        log_base = math.log(on_demand * params.base_ratio)
        log_price = log_base + params.volatility * rng.normal()

        def quantize(value: float) -> int:
            value = min(max(value, floor), cap)
            return max(BID_GRANULARITY_MICROS, round_to_granularity(value, BID_GRANULARITY_MICROS))

        time = params.start_time
        points = [(time, quantize(math.exp(log_price)))]
        while True:
            time += max(1, int(round(rng.exponential(params.mean_change_interval_s))))
            if time > end:
                break
            if rng.random() < params.spike_probability:
                log_price = math.log(on_demand * rng.uniform(*params.spike_ratio))
            else:
                log_price += params.reversion * (log_base - log_price) + params.volatility * rng.normal()
            price = quantize(math.exp(log_price))
            if price != points[-1][1]:
                points.append((time, price))
        series[(dc_id, type_name)] = PriceSeries((dc_id, type_name), points)
    logger.info(f"Generated synthetic prices for {len(series)} markets over {params.days} days")
    return series
