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
Tests for jobs, the speedup model and the SWF reader
"""
import numpy as np
import pytest

from core.errors import ConfigurationError, TraceParseError
from core.market.catalog import InstanceType
from core.sim.random import RandomStream
from core.workload.jobs import (
    Job, SyntheticWorkloadParams, WorkloadParams, assign_deadline, generate_moldability, generate_synthetic_jobs,
    generate_user_estimate, prepare_workload
)
from core.workload.moldability import downey_speedup, runtime_on
from core.workload.swf import parse_swf

SWF_LINES = [
    "; Version: 2.2\n",
    "; Computer: test cluster\n",
    "1 0 5 4215 1 -1 -1 1 5000 -1 1 17 1 -1 1 -1 -1 -1\n",
    "2 30 0 -1 1 -1 -1 1 5000 -1 0 3 1 -1 1 -1 -1 -1\n",
    "\n",
    "3 10 0 600 1 -1 -1 1 5000 -1 1 4 1 -1 1 -1 -1 -1\n",
]


def test_serial_speedup_is_one():
    for parallelism, sigma in [(1, 0), (8, 0.5), (32, 2.0), (3.7, 1.0)]:
        assert downey_speedup(parallelism, sigma, 1) == pytest.approx(1.0)


def test_zero_variance_is_linear_then_flat():
    for parallelism in (1, 3, 8):
        for n in range(1, 17):
            assert downey_speedup(parallelism, 0.0, n) == pytest.approx(min(n, parallelism))


def test_low_variance_mid_range_value():
    expected = 8 * 4 / (8 + 0.5 * (4 - 1) / 2)
    assert abs(downey_speedup(8, 0.5, 4) - expected) < 1e-9


def test_high_variance_mid_range_value():
    expected = 4 * 8 * (1.5 + 1) / (1.5 * (4 + 8 - 1) + 8)
    assert abs(downey_speedup(8, 1.5, 4) - expected) < 1e-9


def test_speedup_bounds_and_monotonicity():
    rng = np.random.default_rng(17)
    for _ in range(10_000):
        parallelism = float(2 ** rng.uniform(0, 5))
        sigma = float(rng.uniform(0, 2))
        n = int(rng.integers(1, 32))
        s = downey_speedup(parallelism, sigma, n)
        assert 1.0 <= s <= min(n, parallelism) + 1e-12
        assert s <= downey_speedup(parallelism, sigma, n + 1) + 1e-12


def test_speedup_domain_is_checked():
    with pytest.raises(ValueError):
        downey_speedup(0.5, 0.0, 1)
    with pytest.raises(ValueError):
        downey_speedup(2, -0.1, 1)
    with pytest.raises(ValueError):
        downey_speedup(2, 0.1, 0)


def test_reference_machine_runtime_is_base_runtime(catalog, make_job):
    job = make_job(base_runtime_s=3600, parallelism=8, sigma=1.3)
    assert runtime_on(job, catalog.instance_type('m1.small')) == 3600


def test_runtime_scales_with_cores_and_ecus(catalog, make_job):
    job = make_job(base_runtime_s=3600, parallelism=8, sigma=0.0)
    assert runtime_on(job, catalog.instance_type('c1.xlarge')) == 180


def test_default_types_carry_published_compute_units(catalog):
    assert {t.name: t.ecus for t in catalog.types_by_name()} == {
        'm1.small': 1.0, 'm1.large': 5.0, 'm1.xlarge': 8.0, 'c1.medium': 5.0, 'c1.xlarge': 20.0,
    }


def test_serial_job_on_large_type_uses_one_core(catalog, make_job):
    job = make_job(base_runtime_s=3600, parallelism=1.0, sigma=0.0)
    assert runtime_on(job, catalog.instance_type('m1.large')) == 1440


def test_runtime_does_not_grow_with_faster_cores(make_job):
    job = make_job(base_runtime_s=5000, parallelism=4, sigma=0.7)
    runtimes = [runtime_on(job, InstanceType(f"t{e}", ecus=float(e), cores=2, memory_mb=1024, on_demand_price=1000))
                for e in (2, 3, 4, 5, 8)]
    assert runtimes == sorted(runtimes, reverse=True)


def test_moldability_draws_are_in_support():
    rng = np.random.default_rng(1)
    for _ in range(10_000):
        parallelism, sigma = generate_moldability(rng)
        assert parallelism >= 1 and sigma >= 0


def test_moldability_is_deterministic():
    a = generate_moldability(RandomStream(9)['moldability'])
    b = generate_moldability(RandomStream(9)['moldability'])
    assert a == b


def test_fixed_parallelism_makes_serial_jobs():
    rng = np.random.default_rng(1)
    params = WorkloadParams(log2_parallelism_range=(0.0, 0.0))
    assert all(generate_moldability(rng, params)[0] == 1.0 for _ in range(100))


def test_exact_estimates_with_unit_factor(make_job):
    job = make_job(base_runtime_s=4215)
    assert generate_user_estimate(job, np.random.default_rng(0), WorkloadParams(estimate_factors=(1.0,))) == 4215


def test_estimates_never_undercut_runtime(make_job):
    rng = np.random.default_rng(4)
    for base in rng.integers(1, 100_000, size=10_000):
        job = make_job(base_runtime_s=int(base))
        assert generate_user_estimate(job, rng) >= job.base_runtime_s


def test_deadline_multiplier_bounds(make_job):
    job = make_job(submit_time=500, base_runtime_s=900, user_estimate_s=1000)
    assert assign_deadline(job, None, multiplier=1.5) == 2000
    assert assign_deadline(job, None, multiplier=4.0) == 4500
    rng = np.random.default_rng(8)
    for _ in range(1000):
        assert 1500 <= assign_deadline(job, rng) - job.submit_time <= 4000


def test_deadline_needs_an_estimate():
    job = Job(id=1, user_id=1, submit_time=0, base_runtime_s=10)
    with pytest.raises(ValueError):
        assign_deadline(job, np.random.default_rng(0))


def test_invalid_jobs_are_rejected():
    with pytest.raises(ValueError):
        Job(id=1, user_id=1, submit_time=0, base_runtime_s=0)
    with pytest.raises(ValueError):
        Job(id=1, user_id=1, submit_time=0, base_runtime_s=10, parallelism=0.5)


def test_invalid_workload_params_are_rejected():
    with pytest.raises(ConfigurationError):
        WorkloadParams(deadline_multiplier_range=(0.5, 2.0)).validate()
    with pytest.raises(ConfigurationError):
        WorkloadParams(estimate_factors=(0.5, 1.0)).validate()


def test_prepare_workload_rebases_and_completes_jobs():
    base = [Job(id=i, user_id=1, submit_time=1000 + 600 * i, base_runtime_s=100) for i in range(5)]
    jobs = prepare_workload(base, RandomStream(5), start_time=50_000, horizon_s=1800)
    assert [job.submit_time for job in jobs] == [50_000, 50_600, 51_200, 51_800]
    for job in jobs:
        assert job.user_estimate_s >= job.base_runtime_s
        assert job.deadline - job.submit_time >= 1.5 * job.user_estimate_s
        assert job.parallelism >= 1
    assert base[0].deadline is None


def test_synthetic_jobs_are_sorted_and_bounded():
    params = SyntheticWorkloadParams(jobs=50, span_days=1.0, users=3)
    jobs = generate_synthetic_jobs(np.random.default_rng(3), params)
    assert len(jobs) == 50
    assert [j.submit_time for j in jobs] == sorted(j.submit_time for j in jobs)
    assert all(params.min_runtime_s <= j.base_runtime_s <= params.max_runtime_s for j in jobs)
    assert {j.user_id for j in jobs} <= {1, 2, 3}


def test_swf_fields_are_mapped():
    workload = parse_swf(SWF_LINES)
    first = workload.jobs[0]
    assert first.id == 1
    assert first.base_runtime_s == 4215
    assert first.user_id == 17


def test_swf_skips_records_without_runtime():
    workload = parse_swf(SWF_LINES)
    assert workload.skipped == 1
    assert [job.id for job in workload.jobs] == [1, 3]


def test_swf_skips_failed_and_cancelled_jobs():
    lines = SWF_LINES + [
        "4 40 0 900 1 -1 -1 1 5000 -1 0 4 1 -1 1 -1 -1 -1\n",
        "5 50 0 900 1 -1 -1 1 5000 -1 5 4 1 -1 1 -1 -1 -1\n",
        "6 60 0 900 1 -1 -1 1 5000 -1 -1 4 1 -1 1 -1 -1 -1\n",
    ]
    workload = parse_swf(lines)
    assert workload.skipped == 3
    assert [job.id for job in workload.jobs] == [1, 3, 6]


def test_swf_limit_keeps_earliest_jobs():
    workload = parse_swf(SWF_LINES, limit=1)
    assert [job.id for job in workload.jobs] == [1]


def test_swf_short_line_is_a_parse_error():
    with pytest.raises(TraceParseError) as excinfo:
        parse_swf(["; header\n", "1 0 5 4215 1\n"])
    assert excinfo.value.line_number == 2


def test_swf_without_jobs_is_a_configuration_error():
    with pytest.raises(ConfigurationError):
        parse_swf(["; only comments\n", SWF_LINES[3]])


def test_swf_reads_files(tmp_path):
    path = tmp_path / "trace.swf"
    path.write_text(''.join(SWF_LINES))
    assert len(parse_swf(str(path)).jobs) == 2
    with pytest.raises(ConfigurationError):
        parse_swf(str(tmp_path / "missing.swf"))
