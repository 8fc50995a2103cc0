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
Gunicorn configuration for the spotsim results service
"""
import os

from config import HOST, PORT, RESULTS_DIR

bind = f"[{HOST}]:{PORT}" if ':' in HOST else f"{HOST}:{PORT}"

# Handlers only read sweep directories, so workers can scale freely
workers = int(os.environ.get('GUNICORN_WORKERS', '2'))
worker_class = 'sync'
timeout = 60  # summary of a large sweep is parsed per request
keepalive = 5
max_requests = 1000
max_requests_jitter = 100

accesslog = '-'
errorlog = '-'
loglevel = os.environ.get('SPOTSIM_LOG', 'info').lower()

proc_name = 'spotsim-results'
preload_app = True

secure_scheme_headers = {'X-FORWARDED-PROTO': 'https', 'X-FORWARDED-SSL': 'on'}


def when_ready(server):
    if not os.path.isdir(RESULTS_DIR):
        server.log.warning("Results directory %s does not exist yet; /api/sweeps will be empty", RESULTS_DIR)
    server.log.info("Serving sweeps from %s at %s", RESULTS_DIR, server.address)


def worker_int(worker):
    worker.log.info("Worker interrupted, finishing current request")


def on_exit(server):
    server.log.info("Results service is shutting down")
