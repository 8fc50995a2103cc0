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
Tests for price traces: loading, step lookups, windows and synthetic series
"""
import io

import numpy as np
import pytest

from core.errors import ConfigurationError, SimulationError, TraceParseError
from core.market.catalog import default_catalog
from core.market.prices import (
    PriceSeries, SyntheticPriceParams, format_price, generate_synthetic_prices, load_price_traces,
    write_price_traces
)

HEADER = "timestamp,datacenter,instance_type,price\n"


def test_rows_are_grouped_and_sorted_per_market():
    series = load_price_traces([
        HEADER,
        "200,dc1,m1.small,0.040\n",
        "0,dc1,m1.small,0.030\n",
        "100,dc1,m1.small,0.035\n",
        "0,dc2,m1.small,0.050\n",
    ])
    assert set(series) == {('dc1', 'm1.small'), ('dc2', 'm1.small')}
    assert series[('dc1', 'm1.small')].points() == [(0, 30000), (100, 35000), (200, 40000)]


def test_header_is_optional():
    series = load_price_traces(["0,dc1,m1.small,0.030\n"])
    assert len(series[('dc1', 'm1.small')]) == 1


def test_iso_timestamps_are_accepted():
    series = load_price_traces(["1970-01-01T00:01:40Z,dc1,m1.small,0.030\n"])
    assert series[('dc1', 'm1.small')].start == 100


def test_zero_price_is_rejected_with_line_number():
    with pytest.raises(TraceParseError) as excinfo:
        load_price_traces([HEADER, "0,dc1,m1.small,0.030\n", "10,dc1,m1.small,0\n"])
    assert excinfo.value.line_number == 3


def test_malformed_timestamp_reports_line():
    with pytest.raises(TraceParseError, match="line 2"):
        load_price_traces(["0,dc1,m1.small,0.030\n", "soon,dc1,m1.small,0.030\n"])


def test_duplicate_timestamp_is_rejected():
    with pytest.raises(TraceParseError):
        load_price_traces(["0,dc1,m1.small,0.030\n", "0,dc1,m1.small,0.031\n"])


def test_wrong_field_count_is_rejected():
    with pytest.raises(TraceParseError):
        load_price_traces(["0,dc1,0.030\n"])


def test_missing_market_is_a_configuration_error():
    with pytest.raises(ConfigurationError):
        load_price_traces(["0,dc1,m1.small,0.030\n"], markets=[('dc3', 'm1.small')])


def test_empty_trace_is_a_configuration_error():
    with pytest.raises(ConfigurationError):
        load_price_traces([HEADER])


def test_step_lookup_is_right_continuous():
    series = PriceSeries(('dc1', 'm1.small'), [(0, 30000), (150, 40000)])
    assert series.price_at(149) == 30000
    assert series.price_at(150) == 40000
    assert series.price_at(10_000) == 40000


def test_no_price_before_series_start():
    series = PriceSeries(('dc1', 'm1.small'), [(100, 30000)])
    with pytest.raises(SimulationError):
        series.price_at(99)


def test_series_rejects_unsorted_points():
    with pytest.raises(ConfigurationError):
        PriceSeries(('dc1', 'm1.small'), [(100, 30000), (100, 31000)])


def test_window_over_flat_series_has_one_value():
    series = PriceSeries(('dc1', 'm1.small'), [(0, 30000)])
    window = series.window(8 * 86400, 7 * 86400)
    assert window.values() == [30000]


def test_window_includes_point_before_its_start():
    points = [(0, 30000)] + [(t, 30000 + t) for t in (1000, 2000, 3000, 4000, 5000)]
    series = PriceSeries(('dc1', 'm1.small'), points)
    window = series.window(5500, 5000)
    assert window.start == 500
    assert len(window.points) == 6
    assert window.points[0] == (0, 30000)


def test_window_is_truncated_at_series_start():
    series = PriceSeries(('dc1', 'm1.small'), [(1000, 30000), (1500, 31000)])
    window = series.window(2000, 5000)
    assert window.start == 1000
    assert window.values() == [30000, 31000]


def test_time_weighted_mean_of_window():
    series = PriceSeries(('dc1', 'm1.small'), [(0, 30000), (100, 40000)])
    window = series.window(400, 400)
    assert window.time_weighted_mean() == pytest.approx(37500)
    assert window.unweighted_mean() == pytest.approx(35000)
    assert window.minimum() == 30000


def test_format_price_keeps_micro_dollars():
    assert format_price(31000) == "0.031000"
    assert format_price(100_000_000) == "100.000000"


def test_written_trace_loads_back():
    catalog = default_catalog({'m1.small': (1.0, 1, 1740, '0.085')}, ['dc1', 'dc2'])
    series = generate_synthetic_prices(np.random.default_rng(3), catalog, SyntheticPriceParams(days=2))
    buffer = io.StringIO()
    rows = write_price_traces(series, buffer)
    buffer.seek(0)
    loaded = load_price_traces(buffer)
    assert rows == sum(len(s) for s in series.values())
    assert {key: s.points() for key, s in loaded.items()} == {key: s.points() for key, s in series.items()}


def test_synthetic_prices_are_positive_multiples_of_granularity():
    catalog = default_catalog(datacenter_ids=['dc1', 'dc2'])
    series = generate_synthetic_prices(np.random.default_rng(11), catalog, SyntheticPriceParams(days=5))
    assert set(series) == set(catalog.markets())
    for s in series.values():
        assert s.start == 0
        assert all(price >= 1000 and price % 1000 == 0 for price in s.prices)
        assert all(b > a for a, b in zip(s.times, s.times[1:]))


def test_synthetic_prices_are_deterministic():
    catalog = default_catalog(datacenter_ids=['dc1'])
    a = generate_synthetic_prices(np.random.default_rng(5), catalog, SyntheticPriceParams(days=3))
    b = generate_synthetic_prices(np.random.default_rng(5), catalog, SyntheticPriceParams(days=3))
    assert {k: s.points() for k, s in a.items()} == {k: s.points() for k, s in b.items()}


def test_synthetic_params_are_validated():
    with pytest.raises(ConfigurationError):
        SyntheticPriceParams(floor_ratio=0.5, base_ratio=0.3).validate()
