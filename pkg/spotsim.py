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
Command line interface for spotsim
"""
import os
import sys

import click

from config import RESULTS_DIR, logger
from core.errors import SpotsimError
from core.experiment.config import load_config
from core.experiment.sweep import rank_directory, run_sweep
from core.market.prices import generate_synthetic_prices, write_price_traces
from core.sim.random import RandomStream


def _overrides(**options):
    """Flag values as config settings; unset flags are left out"""
    settings = {}
    for key, value in options.items():
        if value is None or value == () or value is False:
            continue
        if isinstance(value, tuple):
            value = ','.join(str(v) for v in value)
        elif value is True:
            value = 'true'
        settings[key] = str(value)
    return settings


@click.group()
def cli():
    """Spot market provisioning simulator"""


@cli.command()
@click.option('--config', 'config_path', type=click.Path(dir_okay=False), help='Experiment config file (key = value).')
@click.option('--workload', help="SWF trace path or 'synthetic'.")
@click.option('--prices', help="Price trace CSV or 'synthetic'.")
@click.option('--strategy', 'strategies', multiple=True, help='Bidding strategy; repeat for several.')
@click.option('--alpha', 'alphas', multiple=True, type=float, help='Urgency modifier; repeat for several.')
@click.option('--mechanism', 'mechanisms', multiple=True, help='Fault tolerance mechanism; repeat for several.')
@click.option('--replications', type=int)
@click.option('--seed', type=int)
@click.option('--jobs-limit', type=int)
@click.option('--horizon-days', type=float)
@click.option('--drain-hours', type=float)
@click.option('--workers', type=int, help='Parallel worker processes.')
@click.option('--include-excluded', is_flag=True, help='Also run High with fault tolerance.')
@click.option('--event-log', is_flag=True, help='Write events/<run>.jsonl for every run.')
@click.option('--out', 'out_dir', type=click.Path(file_okay=False), help='Output directory.')
def run(config_path, out_dir, **options):
    """Run a factor sweep and write its reports"""
    try:
        config = load_config(config_path, _overrides(**options))
        out_dir = out_dir or os.path.join(RESULTS_DIR, f"sweep-seed{config.seed}")
        report = run_sweep(config, out_dir)
    except (OSError, SpotsimError) as e:
        logger.error(f"Sweep failed: {e}")
        click.echo(f"error: {e}", err=True)
        sys.exit(2)

    for cell in report.skipped_cells:
        click.echo(f"skipped {cell.strategy} x {cell.mechanism} (alpha {cell.alpha:g}): excluded")
    click.echo(f"{len(report.results)} runs written to {out_dir} ({report.status})")
    for error in report.errors:
        click.echo(f"error: {error}", err=True)
    if report.status != 'success':
        sys.exit(1)


@cli.command()
@click.option('--in', 'in_dir', required=True, type=click.Path(exists=True, file_okay=False))
@click.option('--top', type=click.IntRange(min=1), help='Only show the N best cells.')
def rank(in_dir, top):
    """Rank the cells of a sweep by dollars per useful computation"""
    try:
        ranked = rank_directory(in_dir, top=top)
    except (OSError, SpotsimError) as e:
        logger.error(f"Ranking failed: {e}")
        click.echo(f"error: {e}", err=True)
        sys.exit(2)

    def cell(value, spec):
        return '-' if value is None else format(value, spec)

    click.echo(f"{'rank':>4}  {'mechanism':<13} {'strategy':<10} {'alpha':>5}  {'$/useful':>10}  {'worse %':>8}")
    for row in ranked:
        click.echo(f"{row['rank']:>4}  {row['mechanism']:<13} {row['strategy']:<10} {row['alpha']:>5}  "
                   f"{cell(row['dollars_per_useful'], '.5f'):>10}  "
                   f"{cell(row['worsening_pct'], '.2f'):>8}")


@cli.command('gen-prices')
@click.option('--seed', type=int, default=1, show_default=True)
@click.option('--days', type=float, default=100.0, show_default=True)
@click.option('--config', 'config_path', type=click.Path(dir_okay=False), help='Catalog and generator settings.')
@click.option('--out', 'out_path', required=True, type=click.Path(dir_okay=False))
def gen_prices(seed, days, config_path, out_path):
    """Write a synthetic price trace CSV"""
    try:
        config = load_config(config_path, {'prices.days': str(days), 'seed': str(seed)})
        series = generate_synthetic_prices(RandomStream(seed).stream('prices'), config.catalog(),
                                           config.synthetic_prices)
        rows = write_price_traces(series, out_path)
    except (OSError, SpotsimError) as e:
        logger.error(f"Price generation failed: {e}")
        click.echo(f"error: {e}", err=True)
        sys.exit(2)
    click.echo(f"Wrote {rows} price points for {len(series)} markets to {out_path}")


if __name__ == '__main__':
    cli()
