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

from flask import Flask, jsonify, request
import os
import signal
import sys
from datetime import datetime
from werkzeug.middleware.proxy_fix import ProxyFix

from config import HOST, PORT, RESULTS_DIR, logger
from core.experiment.sweep import rank_directory
from core.file_utils import list_result_dirs, validate_path
from core.history import read_jsonl
from core.metrics.report import read_runs_csv, read_summary_csv, summary_by_cell

app = Flask(__name__)
app.config['RESULTS_DIR'] = RESULTS_DIR

# Configure for reverse proxy
app.wsgi_app = ProxyFix(
    app.wsgi_app,
    x_for=1,      # Trust 1 proxy for X-Forwarded-For
    x_proto=1,    # Trust 1 proxy for X-Forwarded-Proto
    x_host=1,     # Trust 1 proxy for X-Forwarded-Host
    x_prefix=1    # Trust 1 proxy for X-Forwarded-Prefix
)

# Configure proper SIGTERM handling for graceful shutdown
def signal_handler(sig, frame):
    logger.info('Received shutdown signal, cleaning up...')
    sys.exit(0)

signal.signal(signal.SIGTERM, signal_handler)

@app.after_request
def add_security_headers(response):
    """Add security headers and cache-control headers"""
    response.headers['X-Content-Type-Options'] = 'nosniff'
    response.headers['X-Frame-Options'] = 'DENY'
    response.headers['Referrer-Policy'] = 'strict-origin-when-cross-origin'
    response.headers['Content-Security-Policy'] = "default-src 'none'; frame-ancestors 'none';"

    # Results change while sweeps run
    if response.mimetype == 'application/json':
        response.headers['Cache-Control'] = 'no-store, no-cache, must-revalidate, private'
        response.headers['Pragma'] = 'no-cache'
        response.headers['Expires'] = '0'

    return response

# =============
# HELPER FUNCTIONS
# =============

def results_root():
    return app.config['RESULTS_DIR']

def sweep_path(name, *parts):
    """Absolute path inside a sweep directory; raises ValueError outside the results root"""
    root = results_root()
    path = validate_path(os.path.join(root, name, *parts), root)
    if os.path.abspath(path) == os.path.abspath(root):
        raise ValueError("Invalid path")
    return path

# =============
# APP FUNCTIONS
# =============

@app.route('/health')
def health_check():
    """Health check endpoint for monitoring and load balancer checks"""
    return jsonify({
        'status': 'healthy',
        'service': 'spotsim',
        'version': '1.0.0',
        'timestamp': datetime.now().isoformat()
    }), 200

@app.route('/api/sweeps')
def get_sweeps():
    """List sweep output directories"""
    try:
        return jsonify({'sweeps': list_result_dirs(results_root())})
    except Exception as e:
        logger.error(f"Error listing sweeps: {e}")
        return jsonify({'error': str(e)}), 500

@app.route('/api/sweeps/<name>/runs')
def get_runs(name):
    """Per-run rows of a sweep"""
    try:
        path = sweep_path(name, 'runs.csv')
        if not os.path.isfile(path):
            return jsonify({'error': 'Sweep not found'}), 404
        return jsonify({'sweep': name, 'runs': read_runs_csv(path)})

    except ValueError:
        return jsonify({'error': 'Invalid path'}), 403
    except Exception as e:
        logger.error(f"Error reading runs of {name}: {e}")
        return jsonify({'error': str(e)}), 500

@app.route('/api/sweeps/<name>/summary')
def get_summary(name):
    """Per-cell means and confidence intervals"""
    try:
        path = sweep_path(name, 'summary.csv')
        if not os.path.isfile(path):
            return jsonify({'error': 'Summary not found'}), 404

        cells = []
        for (strategy, alpha, mechanism), metrics in summary_by_cell(read_summary_csv(path)).items():
            cells.append({
                'strategy': strategy,
                'alpha': alpha,
                'mechanism': mechanism,
                'metrics': {
                    metric: {'mean': row['mean'], 'sd': row['sd'], 'ci_half_width': row['ci_half_width'],
                             'n': row['n']}
                    for metric, row in metrics.items()
                },
            })
        return jsonify({'sweep': name, 'cells': cells})

    except ValueError:
        return jsonify({'error': 'Invalid path'}), 403
    except Exception as e:
        logger.error(f"Error reading summary of {name}: {e}")
        return jsonify({'error': str(e)}), 500

@app.route('/api/sweeps/<name>/rank')
def get_ranking(name):
    """Cells ranked by dollars per useful computation"""
    try:
        path = sweep_path(name)
        if not os.path.isfile(os.path.join(path, 'summary.csv')):
            return jsonify({'error': 'Summary not found'}), 404

        top = request.args.get('top', type=int)
        if top is not None and top < 1:
            return jsonify({'error': 'top must be a positive integer'}), 400
        return jsonify({'sweep': name, 'ranking': rank_directory(path, top=top, write=False)})

    except ValueError:
        return jsonify({'error': 'Invalid path'}), 403
    except Exception as e:
        logger.error(f"Error ranking {name}: {e}")
        return jsonify({'error': str(e)}), 500

@app.route('/api/sweeps/<name>/events/<run_id>')
def get_events(name, run_id):
    """Event log of one run, when the sweep recorded it"""
    try:
        path = sweep_path(name, 'events', f"{run_id}.jsonl")
        if not os.path.isfile(path):
            return jsonify({'error': 'Event log not found'}), 404

        events = read_jsonl(path)
        kind = request.args.get('event')
        if kind:
            events = [e for e in events if e.get('event') == kind]
        return jsonify({'sweep': name, 'run': run_id, 'events': events})

    except ValueError:
        return jsonify({'error': 'Invalid path'}), 403
    except Exception as e:
        logger.error(f"Error reading events of {name}/{run_id}: {e}")
        return jsonify({'error': str(e)}), 500

# Application factory pattern for Gunicorn
if __name__ == '__main__':
    # This block will only run during development
    # In production, Gunicorn will import 'app' directly
    logger.warning("Running in development mode. Use Gunicorn for production!")
    app.run(host=HOST, port=PORT, debug=False)
