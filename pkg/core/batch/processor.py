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
Batch run processing for spotsim
Runs every item of a sweep and collects per-item failures
"""
import concurrent.futures
from dataclasses import dataclass, field
from typing import Any, Callable, List, Sequence

from config import logger


@dataclass
class BatchResult:
    status: str  # success, partial or error
    results: List[Any] = field(default_factory=list)
    errors: List[str] = field(default_factory=list)

    @property
    def completed(self) -> int:
        return len(self.results)


def process_batch(items: Sequence[Any], process_func: Callable[[Any], Any], process_name: str,
                  workers: int = 1, describe: Callable[[Any], str] = str) -> BatchResult:
    """
    Generic function to process every item of a batch

    Args:
        items: Work items, passed one at a time to process_func
        process_func: Function to call for each item; must be picklable when workers > 1
        process_name: Human-readable name of the process for log messages
        workers: Number of worker processes; 1 runs inline
        describe: Label for an item in error messages

    Returns:
        BatchResult: results of the items that succeeded (input order) and one
        error message per failed item
    """
    results = []
    errors = []

    if workers > 1 and len(items) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as executor:
            futures = [executor.submit(process_func, item) for item in items]
            for item, future in zip(items, futures):
                try:
                    results.append(future.result())
                except Exception as e:
                    logger.error(f"Error in {process_name} {describe(item)}: {e}")
                    errors.append(f"{describe(item)}: {str(e)}")
    else:
        for item in items:
            try:
                results.append(process_func(item))
            except Exception as e:
                logger.error(f"Error in {process_name} {describe(item)}: {e}")
                errors.append(f"{describe(item)}: {str(e)}")

    if not results and items:
        status = 'error'
    elif errors:
        status = 'partial'
    else:
        status = 'success'
    logger.info(f"{process_name}: {len(results)} of {len(items)} done ({status})")
    return BatchResult(status=status, results=results, errors=errors)
