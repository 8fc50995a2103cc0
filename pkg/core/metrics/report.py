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
Sweep report files: per-run rows, per-cell summaries and rankings
"""
import json
import os
from typing import Dict, List, Optional

import pandas as pd

from config import logger

RUN_COLUMNS = [
    'strategy', 'alpha', 'mechanism', 'replication', 'seed', 'total_cost', 'violations',
    'useful_jobs', 'dollars_per_useful', 'failures', 'vm_hours',
]

SUMMARY_COLUMNS = [
    'strategy', 'alpha', 'mechanism', 'n', 'metric', 'mean', 'sd', 'ci_half_width',
]

RANK_COLUMNS = [
    'rank', 'strategy', 'alpha', 'mechanism', 'dollars_per_useful', 'ci_half_width', 'worsening_pct',
]

FLOAT_FORMAT = '%.6f'


def run_row(result: Dict) -> Dict:
    """Map a run's result dict onto the runs.csv columns"""
    return {
        'strategy': result['strategy'],
        'alpha': f"{result['alpha']:g}",
        'mechanism': result['mechanism'],
        'replication': result['replication'],
        'seed': result['seed'],
        'total_cost': result['total_cost'],
        'violations': result['deadline_violations'],
        'useful_jobs': result['jobs_within_deadline'],
        'dollars_per_useful': result['dollars_per_useful_computation'],
        'failures': result['failures_out_of_bid'],
        'vm_hours': result['vm_hours_charged'],
    }


def _write_csv(rows: List[Dict], columns: List[str], path: str) -> str:
    df = pd.DataFrame(rows, columns=columns)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    return path


def write_runs_csv(rows: List[Dict], path: str) -> str:
    return _write_csv(rows, RUN_COLUMNS, path)


def write_summary_csv(rows: List[Dict], path: str) -> str:
    return _write_csv(rows, SUMMARY_COLUMNS, path)


def write_ranking_csv(rows: List[Dict], path: str) -> str:
    return _write_csv(rows, RANK_COLUMNS, path)


def write_run_json(result: Dict, config: Dict, path: str) -> str:
    """One JSON object per run with its metrics and the config echo"""
    document = dict(result)
    document['config'] = config
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(document, f, indent=2, sort_keys=True)
        f.write('\n')
    return path


def read_csv_rows(path: str) -> List[Dict]:
    """Rows of a report CSV with empty cells as None"""
    df = pd.read_csv(path, dtype={'alpha': str})
    df = df.astype(object).where(pd.notna(df), None)
    return df.to_dict(orient='records')


def read_runs_csv(path: str) -> List[Dict]:
    if not os.path.isfile(path):
        raise FileNotFoundError(path)
    rows = read_csv_rows(path)
    logger.info(f"Read {len(rows)} run rows from {path}")
    return rows


def read_summary_csv(path: str) -> List[Dict]:
    if not os.path.isfile(path):
        raise FileNotFoundError(path)
    return read_csv_rows(path)


def summary_by_cell(rows: List[Dict]) -> Dict[tuple, Dict[str, Dict]]:
    """Group summary.csv rows as {(strategy, alpha, mechanism): {metric: row}}"""
    cells: Dict[tuple, Dict[str, Dict]] = {}
    for row in rows:
        key = (row['strategy'], str(row['alpha']), row['mechanism'])
        cells.setdefault(key, {})[row['metric']] = row
    return cells


def optional_float(value) -> Optional[float]:
    if value is None or value == '':
        return None
    return float(value)
