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
Replication statistics: mean, sample deviation and 95% t-intervals
"""
import math
from dataclasses import asdict, dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
from scipy import stats

from core.metrics.accounting import RunMetrics

SUMMARY_METRICS = (
    'total_cost',
    'deadline_violations',
    'jobs_within_deadline',
    'dollars_per_useful_computation',
    'failures_out_of_bid',
    'vm_hours_charged',
    'jobs_completed',
    'jobs_censored',
)

CONFIDENCE = 0.95


@dataclass
class MetricSummary:
    mean: Optional[float]
    sd: Optional[float]
    half_width: Optional[float]
    n: int

    def to_dict(self):
        return asdict(self)


def summarize(values: Sequence[Optional[float]], confidence: float = CONFIDENCE) -> MetricSummary:
    """
    Mean with a Student t confidence interval; None values are left out

    The half-width is t(1 - (1 - confidence)/2, n - 1) * sd / sqrt(n) and is
    only defined for n >= 2.
    """
    data = np.array([v for v in values if v is not None], dtype=float)
    n = len(data)
    if n == 0:
        return MetricSummary(mean=None, sd=None, half_width=None, n=0)
    mean = float(data.mean())
    if n < 2:
        return MetricSummary(mean=mean, sd=None, half_width=None, n=1)
    sd = float(data.std(ddof=1))
    quantile = float(stats.t.ppf(1 - (1 - confidence) / 2, n - 1))
    return MetricSummary(mean=mean, sd=sd, half_width=quantile * sd / math.sqrt(n), n=n)


def aggregate(replications: Iterable[Union[RunMetrics, Dict]], metrics: Sequence[str] = SUMMARY_METRICS,
              confidence: float = CONFIDENCE) -> Dict[str, MetricSummary]:
    """Per-metric summaries over the replications of one cell"""
    rows: List[Dict] = [r.to_dict() if isinstance(r, RunMetrics) else dict(r) for r in replications]
    return {name: summarize([row.get(name) for row in rows], confidence) for name in metrics}
