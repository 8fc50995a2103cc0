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
Factor-grid sweeps, replication management and ranking
"""
import functools
import itertools
import os
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional

from config import logger
from core.batch.processor import process_batch
from core.experiment.config import ExperimentConfig
from core.experiment.runner import RunResult, RunSpec, load_prices, load_workload, run_single
from core.file_utils import ensure_directory
from core.history import write_jsonl
from core.metrics.aggregate import SUMMARY_METRICS, aggregate
from core.metrics.report import (
    optional_float, read_summary_csv, run_row, summary_by_cell, write_ranking_csv, write_run_json,
    write_runs_csv, write_summary_csv
)


@dataclass(frozen=True)
class Cell:
    strategy: str
    alpha: float
    mechanism: str
    index: int


@dataclass
class SweepReport:
    status: str
    results: List[RunResult] = field(default_factory=list)
    errors: List[str] = field(default_factory=list)
    skipped_cells: List[Cell] = field(default_factory=list)
    out_dir: Optional[str] = None

    @property
    def rows(self) -> List[Dict]:
        return [run_row(r.to_dict()) for r in self.results]


def plan_cells(config: ExperimentConfig) -> List[Cell]:
    """
    Every (strategy, alpha, mechanism) combination except the excluded ones

    Cell indexes follow the full grid so excluding a cell never changes the
    random streams of the others.
    """
    excluded = set() if config.include_excluded else set(config.exclusions)
    cells = []
    for cell in grid_cells(config):
        if (cell.strategy, cell.mechanism) in excluded:
            logger.warning(f"Skipping excluded cell {cell.strategy} x {cell.mechanism} (alpha {cell.alpha:g})")
            continue
        cells.append(cell)
    return cells


def grid_cells(config: ExperimentConfig) -> List[Cell]:
    grid = itertools.product(config.strategies, config.alphas, config.mechanisms)
    return [Cell(strategy=s, alpha=float(a), mechanism=m, index=i) for i, (s, a, m) in enumerate(grid)]


def plan_runs(config: ExperimentConfig, cells: Iterable[Cell]) -> List[RunSpec]:
    """Replication k of every cell uses seed base_seed + k"""
    return [
        RunSpec(strategy=cell.strategy, alpha=cell.alpha, mechanism=cell.mechanism,
                replication=k, seed=config.seed + k, cell_index=cell.index)
        for cell in cells
        for k in range(config.replications)
    ]


def _run_item(config, base_jobs, series, spec: RunSpec) -> RunResult:
    return run_single(config, spec, base_jobs=base_jobs, series=series)


def _sort_key(result: RunResult):
    spec = result.spec
    return (spec.strategy, spec.alpha, spec.mechanism, spec.replication)


def run_sweep(config: ExperimentConfig, out_dir: Optional[str] = None) -> SweepReport:
    """
    Run every included cell for every replication and write the reports

    Returns:
        SweepReport: status 'success', 'partial' (some runs failed, the rest
        were written) or 'error'
    """
    cells = plan_cells(config)
    included = {cell.index for cell in cells}
    skipped = [cell for cell in grid_cells(config) if cell.index not in included]
    specs = plan_runs(config, cells)
    logger.info(f"Sweep: {len(cells)} of {len(cells) + len(skipped)} cells x {config.replications} replications = {len(specs)} runs")

    base_jobs = load_workload(config)
    series = load_prices(config)
    batch = process_batch(
        specs,
        functools.partial(_run_item, config, base_jobs, series),
        'simulation run',
        workers=config.workers,
        describe=lambda spec: spec.run_id,
    )
    results = sorted(batch.results, key=_sort_key)
    report = SweepReport(status=batch.status, results=results, errors=batch.errors,
                         skipped_cells=skipped, out_dir=out_dir)
    if out_dir:
        write_sweep(report, config, out_dir)
    return report


def summarize_results(results: List[RunResult]) -> List[Dict]:
    """Long-format summary rows: one per cell and metric"""
    by_cell: Dict[tuple, List[RunResult]] = {}
    for result in results:
        spec = result.spec
        by_cell.setdefault((spec.strategy, spec.alpha, spec.mechanism), []).append(result)
    rows = []
    for (strategy, alpha, mechanism), cell_results in sorted(by_cell.items()):
        summaries = aggregate([r.metrics for r in cell_results])
        for metric in SUMMARY_METRICS:
            s = summaries[metric]
            rows.append({
                'strategy': strategy, 'alpha': f"{alpha:g}", 'mechanism': mechanism, 'n': len(cell_results),
                'metric': metric, 'mean': s.mean, 'sd': s.sd, 'ci_half_width': s.half_width,
            })
    return rows


def write_sweep(report: SweepReport, config: ExperimentConfig, out_dir: str):
    """Write runs.csv, summary.csv, config.txt and one JSON per run"""
    ensure_directory(out_dir)
    runs_dir = ensure_directory(os.path.join(out_dir, 'runs'))
    with open(os.path.join(out_dir, 'config.txt'), 'w', encoding='utf-8') as f:
        f.write(config.to_text())

    write_runs_csv(report.rows, os.path.join(out_dir, 'runs.csv'))
    write_summary_csv(summarize_results(report.results), os.path.join(out_dir, 'summary.csv'))
    config_echo = config.to_dict()
    for result in report.results:
        write_run_json(result.to_dict(), config_echo, os.path.join(runs_dir, f"{result.spec.run_id}.json"))

    if config.event_log:
        events_dir = ensure_directory(os.path.join(out_dir, 'events'))
        for result in report.results:
            path = os.path.join(events_dir, f"{result.spec.run_id}.jsonl")
            write_jsonl(result.events or [], path, dropped=result.events_dropped)
    logger.info(f"Wrote {len(report.results)} runs to {out_dir}")


# =======
# RANKING
# =======

def rank_by_useful_computation(cells: List[Dict]) -> List[Dict]:
    """
    Order cells by mean dollars per useful computation, cheapest first

    Args:
        cells: dicts with strategy, alpha, mechanism, dollars_per_useful and
            optionally ci_half_width

    Returns:
        list: ranked rows with worsening_pct = 100 * (x - best) / best
    """
    def key(cell):
        value = optional_float(cell.get('dollars_per_useful'))
        return (value is None, value if value is not None else 0.0,
                cell['mechanism'], cell['strategy'], float(cell['alpha']))

    ordered = sorted(cells, key=key)
    best = optional_float(ordered[0].get('dollars_per_useful')) if ordered else None
    ranked = []
    for position, cell in enumerate(ordered, start=1):
        value = optional_float(cell.get('dollars_per_useful'))
        worsening = None
        if value is not None and best:
            worsening = 100.0 * (value - best) / best
        ranked.append({
            'rank': position,
            'strategy': cell['strategy'],
            'alpha': f"{float(cell['alpha']):g}",
            'mechanism': cell['mechanism'],
            'dollars_per_useful': value,
            'ci_half_width': optional_float(cell.get('ci_half_width')),
            'worsening_pct': worsening,
        })
    return ranked


def rank_directory(in_dir: str, top: Optional[int] = None, write: bool = True) -> List[Dict]:
    """Rank the cells of a finished sweep from its summary.csv"""
    rows = read_summary_csv(os.path.join(in_dir, 'summary.csv'))
    cells = []
    for (strategy, alpha, mechanism), metrics in summary_by_cell(rows).items():
        useful = metrics.get('dollars_per_useful_computation', {})
        cells.append({
            'strategy': strategy, 'alpha': alpha, 'mechanism': mechanism,
            'dollars_per_useful': useful.get('mean'), 'ci_half_width': useful.get('ci_half_width'),
        })
    ranked = rank_by_useful_computation(cells)
    if top is not None:
        ranked = ranked[:top]
    if write:
        write_ranking_csv(ranked, os.path.join(in_dir, 'ranking.csv'))
    return ranked
