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
Single simulation run: wires prices, workload, provider, broker and metrics
"""
import os
from dataclasses import dataclass
from typing import Dict, List, Optional

from config import BID_GRANULARITY_MICROS, logger
from core.broker.bidding import BiddingStrategy, StrategyKind, UrgencyParams
from core.broker.scheduler import Broker
from core.errors import ConfigurationError
from core.experiment.config import SYNTHETIC, ExperimentConfig
from core.fault.mechanisms import MechanismKind
from core.history import SimulationHistory
from core.market.catalog import MarketKey
from core.market.prices import PriceSeries, generate_synthetic_prices, load_price_traces
from core.market.provider import Provider
from core.metrics.accounting import MetricsRecorder, RunMetrics
from core.sim.engine import Simulator
from core.sim.random import RandomStream
from core.workload.jobs import Job, generate_synthetic_jobs, prepare_workload
from core.workload.swf import parse_swf


@dataclass(frozen=True)
class RunSpec:
    """One replication of one (strategy, alpha, mechanism) cell"""
    strategy: str
    alpha: float
    mechanism: str
    replication: int
    seed: int
    cell_index: int = 0

    @property
    def cell(self) -> str:
        return f"{self.strategy}-a{self.alpha:g}-{self.mechanism}"

    @property
    def run_id(self) -> str:
        return f"{self.cell}-r{self.replication}"


@dataclass
class RunResult:
    spec: RunSpec
    metrics: RunMetrics
    start_time: int
    end_time: int
    events: Optional[List[dict]] = None
    events_dropped: int = 0

    def to_dict(self) -> Dict:
        return {
            'strategy': self.spec.strategy,
            'alpha': self.spec.alpha,
            'mechanism': self.spec.mechanism,
            'replication': self.spec.replication,
            'seed': self.spec.seed,
            'start_time': self.start_time,
            'end_time': self.end_time,
            **self.metrics.to_dict(),
        }


def load_workload(config: ExperimentConfig) -> Optional[List[Job]]:
    """Parse the SWF trace once per sweep; None means synthetic jobs per replication"""
    if config.workload == SYNTHETIC:
        return None
    return parse_swf(config.workload, limit=config.jobs_limit).jobs


def load_prices(config: ExperimentConfig) -> Optional[Dict[MarketKey, PriceSeries]]:
    """Load a trace file once per sweep; None means synthetic prices per replication"""
    if config.prices == SYNTHETIC:
        return None
    if not os.path.isfile(config.prices):
        raise ConfigurationError(f"Price trace not found: {config.prices}")
    return load_price_traces(config.prices, markets=config.catalog().markets())


def choose_start(series: Dict[MarketKey, PriceSeries], span_s: int, streams: RandomStream) -> int:
    """Random start such that every market has prices and the run fits the traces where possible"""
    earliest = max(s.start for s in series.values())
    latest = max(earliest, min(s.end for s in series.values()) - span_s)
    return int(streams.stream('workload-start-offset').integers(earliest, latest + 1))


def run_single(config: ExperimentConfig, spec: RunSpec, base_jobs: Optional[List[Job]] = None,
               series: Optional[Dict[MarketKey, PriceSeries]] = None) -> RunResult:
    """
    Simulate one replication of one cell

    Args:
        config: Validated experiment configuration
        spec: Cell and seed of the replication
        base_jobs: Parsed trace jobs (synthetic jobs are generated when None)
        series: Loaded price traces (synthetic prices are generated when None)

    Returns:
        RunResult: finalized metrics, plus the event log when enabled
    """
    catalog = config.catalog()
    streams = RandomStream(spec.seed, spec.cell_index)
    if series is None:
        series = generate_synthetic_prices(streams.stream('prices'), catalog, config.synthetic_prices)
    if base_jobs is None:
        base_jobs = generate_synthetic_jobs(streams.stream('workload'), config.synthetic_workload)
        if config.jobs_limit is not None:
            base_jobs = base_jobs[:config.jobs_limit]

    start = choose_start(series, config.horizon_s + config.drain_s, streams)
    end = start + config.horizon_s + config.drain_s
    jobs = prepare_workload(base_jobs, streams, start, horizon_s=config.horizon_s, params=config.workload_params)

    sim = Simulator(start_time=start)
    provider = Provider(catalog, series, sim, provisioning_lag_s=config.provisioning_lag_s)
    metrics = MetricsRecorder()
    history = SimulationHistory(enabled=config.event_log)
    broker = Broker(
        sim, provider, catalog,
        strategy=BiddingStrategy(StrategyKind.from_name(spec.strategy), BID_GRANULARITY_MICROS,
                                 config.mean_weighted),
        urgency_params=UrgencyParams(alpha=spec.alpha, provisioning_lag_s=config.provisioning_lag_s),
        mechanism=MechanismKind.from_name(spec.mechanism),
        metrics=metrics,
        history=history,
        scheduling_interval_s=config.scheduling_interval_s,
        history_window_s=config.history_window_s,
        rates=config.rates(),
        checkpoint_every_hours=config.checkpoint_every_hours,
    )

    provider.schedule_price_changes(start, end)
    broker.schedule_arrivals(jobs)
    broker.start(start, end)
    sim.run_until(end)
    broker.shutdown(end)
    censored = broker.classify_unfinished(end)
    result = metrics.finalize(provider, censored=censored)
    logger.info(f"Run {spec.run_id} (seed {spec.seed}): {sim.dispatched} events, "
                f"${result.total_cost:.3f}, {result.deadline_violations} violations")
    return RunResult(spec=spec, metrics=result, start_time=start, end_time=end,
                     events=history.get_all() if config.event_log else None,
                     events_dropped=history.dropped)
