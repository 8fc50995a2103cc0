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
File system utilities for spotsim
Handles path validation and results directory discovery
"""
import os
from typing import List

from config import RESULTS_DIR, logger


def validate_path(filepath, root=None):
    """Validate that a path is within the results root"""
    root = os.path.abspath(root or RESULTS_DIR)
    abs_path = os.path.abspath(filepath)
    if abs_path != root and not abs_path.startswith(root + os.sep):
        raise ValueError("Invalid path")
    return abs_path


def ensure_directory(path):
    """Create a directory (and parents) if missing; returns the path"""
    if not os.path.isdir(path):
        os.makedirs(path, exist_ok=True)
        logger.info(f"Created directory {path}")
    return path


def list_result_dirs(root=None) -> List[dict]:
    """Sweep output directories directly under the results root"""
    root = os.path.abspath(root or RESULTS_DIR)
    if not os.path.isdir(root):
        return []
    sweeps = []
    for name in sorted(os.listdir(root)):
        path = os.path.join(root, name)
        if name.startswith('.') or not os.path.isdir(path):
            continue
        if not os.path.isfile(os.path.join(path, 'runs.csv')):
            continue
        sweeps.append({
            'name': name,
            'has_summary': os.path.isfile(os.path.join(path, 'summary.csv')),
            'has_ranking': os.path.isfile(os.path.join(path, 'ranking.csv')),
            'has_events': os.path.isdir(os.path.join(path, 'events')),
            'modified': int(os.path.getmtime(os.path.join(path, 'runs.csv'))),
        })
    return sweeps
