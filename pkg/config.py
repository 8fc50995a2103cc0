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
Configuration and constants for spotsim
"""
import os
import logging

# Directory configuration
RESULTS_DIR = os.environ.get('SPOTSIM_RESULTS_DIR', os.path.join(os.getcwd(), 'results'))

# Results service configuration
PORT = int(os.environ.get('PORT', '8339'))
HOST = os.environ.get('HOST', '::')

# Parallel replications for sweeps
WORKERS = int(os.environ.get('SPOTSIM_WORKERS', '1'))

# Event log
LOG_LEVEL = os.environ.get('SPOTSIM_LOG', 'WARNING').upper()
RECORD_EVENTS = os.environ.get('SPOTSIM_EVENT_LOG', 'false').lower() in ['true', '1', 'yes']
MAX_HISTORY_ITEMS = int(os.environ.get('SPOTSIM_MAX_EVENTS', '200000'))

# ================
# TIME AND MONEY
# ================

HOUR_S = 3600
DAY_S = 24 * HOUR_S

# Money is kept in integer micro-dollars
MICROS_PER_USD = 1_000_000

# Provider model
PROVISIONING_LAG_S = 300  # B, time to provision a new VM
BID_GRANULARITY_MICROS = 1_000  # G = 0.001 USD
HIGH_BID_MICROS = 100 * MICROS_PER_USD

# Broker
SCHEDULING_INTERVAL_S = 60
HISTORY_WINDOW_S = 7 * DAY_S
DEFAULT_ALPHA = 2.0

# ================
# CLOUD CATALOG
# ================

# name -> (ECUs, cores, memory MB, on-demand USD/hour)
INSTANCE_TYPES = {
    'm1.small': (1.0, 1, 1740, '0.085'),
    'm1.large': (5.0, 2, 7680, '0.340'),
    'm1.xlarge': (8.0, 4, 15360, '0.680'),
    'c1.medium': (5.0, 2, 1740, '0.170'),
    'c1.xlarge': (20.0, 8, 7168, '0.680'),
}

REFERENCE_TYPE = 'm1.small'

DATACENTERS = ('us-east-1a', 'us-east-1b', 'us-east-1c', 'us-east-1d')

# Suspend/resume transfer rates in MB/s
SERIALIZE_RATE_MBPS = 63.67
RESTORE_RATE_SAME_DC_MBPS = 81.27
RESTORE_RATE_CROSS_DC_MBPS = 40.64

# ================
# WORKLOAD MODEL
# ================

DEADLINE_MULTIPLIER_RANGE = (1.5, 4.0)
ESTIMATE_FACTORS = (1.0, 1.5, 2.0, 3.0, 5.0, 10.0)
MOLDABILITY_LOG2_A_RANGE = (0.0, 5.0)
MOLDABILITY_SIGMA_RANGE = (0.0, 2.0)

# ================
# EXPERIMENT GRID
# ================

STRATEGIES = ('minimum', 'mean', 'on-demand', 'high', 'current')
ALPHAS = (1, 2, 4, 8, 10, 20)
MECHANISMS = ('none', 'checkpointing', 'migration', 'duplication')
DEFAULT_REPLICATIONS = 31

# High bids never fail, so fault tolerance on top of them is skipped
DEFAULT_EXCLUSIONS = (
    ('high', 'checkpointing'),
    ('high', 'migration'),
    ('high', 'duplication'),
)

# Logging configuration
logging.basicConfig(level=getattr(logging, LOG_LEVEL, logging.WARNING))
logger = logging.getLogger('spotsim')

logger.debug(f"Results directory: {RESULTS_DIR}")
logger.debug(f"Catalog: {len(INSTANCE_TYPES)} instance types in {len(DATACENTERS)} datacenters")
