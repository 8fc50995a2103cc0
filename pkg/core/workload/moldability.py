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
Downey's speedup model and runtime scaling across instance types
"""
import math

from core.market.catalog import InstanceType


def downey_speedup(parallelism: float, sigma: float, n: float) -> float:
    """
    Speedup S(n) of a job with average parallelism A and coefficient of
    variance sigma on n cores

    Low variance (sigma <= 1):
        An / (A + sigma(n - 1)/2)                 1 <= n <= A
        An / (sigma(A - 1/2) + n(1 - sigma/2))    A <= n <= 2A - 1
        A                                         n >= 2A - 1
    High variance (sigma >= 1):
        nA(sigma + 1) / (sigma(n + A - 1) + A)    1 <= n <= A + A*sigma - sigma
        A                                         beyond
    """
    if parallelism < 1:
        raise ValueError(f"Average parallelism must be >= 1, got {parallelism}")
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if n < 1:
        raise ValueError(f"Core count must be >= 1, got {n}")

    a = float(parallelism)
    if sigma <= 1:
        if n <= a:
            speedup = a * n / (a + sigma * (n - 1) / 2)
        elif n <= 2 * a - 1:
            speedup = a * n / (sigma * (a - 0.5) + n * (1 - sigma / 2))
        else:
            speedup = a
    else:
        if n <= a + a * sigma - sigma:
            speedup = n * a * (sigma + 1) / (sigma * (n + a - 1) + a)
        else:
            speedup = a
    # Rounding must not leave [1, min(n, A)]
    return min(max(speedup, 1.0), min(float(n), a))


def speed_factor(parallelism: float, sigma: float, instance_type: InstanceType) -> float:
    """Reference-machine seconds of work done per wall second on a type"""
    return downey_speedup(parallelism, sigma, instance_type.cores) * instance_type.ecu_per_core


def wall_seconds(work_s: float, factor: float) -> int:
    """Whole wall seconds needed for work_s reference seconds at a speed factor"""
    if work_s <= 0:
        return 0
    return max(1, math.ceil(round(work_s / factor, 6)))


def runtime_for_work(work_s: float, parallelism: float, sigma: float, instance_type: InstanceType) -> int:
    return wall_seconds(work_s, speed_factor(parallelism, sigma, instance_type))


def runtime_on(job, instance_type: InstanceType) -> int:
    """Runtime of a whole job on a type, rounded up to whole seconds"""
    return runtime_for_work(job.base_runtime_s, job.parallelism, job.sigma, instance_type)
