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
Experiment configuration for spotsim
Flat key = value files with command line overrides
"""
import os
from dataclasses import dataclass, field, fields, replace
from typing import Any, Dict, List, Optional, Tuple

from config import (
    ALPHAS, DATACENTERS, DEFAULT_EXCLUSIONS, DEFAULT_REPLICATIONS, HISTORY_WINDOW_S, INSTANCE_TYPES,
    MECHANISMS, PROVISIONING_LAG_S, RECORD_EVENTS, RESTORE_RATE_CROSS_DC_MBPS, RESTORE_RATE_SAME_DC_MBPS,
    SCHEDULING_INTERVAL_S, SERIALIZE_RATE_MBPS, STRATEGIES, WORKERS, logger
)
from core.broker.bidding import StrategyKind
from core.errors import ConfigurationError
from core.fault.mechanisms import MechanismKind
from core.fault.overhead import TransferRates
from core.market.catalog import Catalog, default_catalog
from core.market.prices import SyntheticPriceParams
from core.workload.jobs import SyntheticWorkloadParams, WorkloadParams

SYNTHETIC = 'synthetic'


@dataclass
class ExperimentConfig:
    """Everything one sweep needs; the text form is echoed next to its results"""
    workload: str = SYNTHETIC
    jobs_limit: Optional[int] = None
    prices: str = SYNTHETIC
    strategies: List[str] = field(default_factory=lambda: list(STRATEGIES))
    alphas: List[float] = field(default_factory=lambda: [float(a) for a in ALPHAS])
    mechanisms: List[str] = field(default_factory=lambda: list(MECHANISMS))
    replications: int = DEFAULT_REPLICATIONS
    seed: int = 1
    horizon_days: float = 7.0
    drain_hours: float = 24.0
    scheduling_interval_s: int = SCHEDULING_INTERVAL_S
    history_window_s: int = HISTORY_WINDOW_S
    provisioning_lag_s: int = PROVISIONING_LAG_S
    checkpoint_every_hours: int = 1
    mean_weighted: bool = True
    exclusions: List[Tuple[str, str]] = field(default_factory=lambda: list(DEFAULT_EXCLUSIONS))
    include_excluded: bool = False
    workers: int = WORKERS
    event_log: bool = RECORD_EVENTS
    serialize_rate: float = SERIALIZE_RATE_MBPS
    restore_rate_same_dc: float = RESTORE_RATE_SAME_DC_MBPS
    restore_rate_cross_dc: float = RESTORE_RATE_CROSS_DC_MBPS
    instance_types: Dict[str, tuple] = field(default_factory=lambda: dict(INSTANCE_TYPES))
    datacenters: List[str] = field(default_factory=lambda: list(DATACENTERS))
    synthetic_prices: SyntheticPriceParams = field(default_factory=SyntheticPriceParams)
    synthetic_workload: SyntheticWorkloadParams = field(default_factory=SyntheticWorkloadParams)
    workload_params: WorkloadParams = field(default_factory=WorkloadParams)

    @property
    def horizon_s(self) -> int:
        return int(round(self.horizon_days * 24 * 3600))

    @property
    def drain_s(self) -> int:
        return int(round(self.drain_hours * 3600))

    def rates(self) -> TransferRates:
        return TransferRates(s=self.serialize_rate, r_same_dc=self.restore_rate_same_dc,
                             r_cross_dc=self.restore_rate_cross_dc)

    def catalog(self) -> Catalog:
        return default_catalog(self.instance_types, self.datacenters)

    def validate(self) -> "ExperimentConfig":
        """
        Check factor lists and numeric ranges

        Raises:
            ConfigurationError: On the first invalid setting
        """
        if not self.strategies or not self.alphas or not self.mechanisms:
            raise ConfigurationError("strategies, alphas and mechanisms must be non-empty")
        self.strategies = [StrategyKind.from_name(s).value for s in self.strategies]
        self.mechanisms = [MechanismKind.from_name(m).value for m in self.mechanisms]
        self.exclusions = [(StrategyKind.from_name(s).value, MechanismKind.from_name(m).value)
                           for s, m in self.exclusions]
        if any(a <= 0 for a in self.alphas):
            raise ConfigurationError("alpha values must be positive")
        if self.replications < 1:
            raise ConfigurationError("replications must be at least 1")
        if self.jobs_limit is not None and self.jobs_limit < 1:
            raise ConfigurationError("jobs_limit must be positive")
        if self.horizon_days <= 0 or self.drain_hours < 0:
            raise ConfigurationError("horizon_days must be positive and drain_hours non-negative")
        if self.scheduling_interval_s <= 0 or self.history_window_s <= 0 or self.provisioning_lag_s < 0:
            raise ConfigurationError("scheduling interval and history window must be positive")
        if self.checkpoint_every_hours < 1:
            raise ConfigurationError("checkpoint_every_hours must be at least 1")
        if self.workers < 1:
            raise ConfigurationError("workers must be at least 1")
        if self.seed < 0:
            raise ConfigurationError("seed must be non-negative")
        self.rates()
        self.catalog()
        self.synthetic_prices.validate()
        self.workload_params.validate()
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {key: value for key, value in _flatten(self)}

    def to_text(self) -> str:
        """Render in the key = value format load_config reads"""
        return ''.join(f"{key} = {value}\n" for key, value in _flatten(self))


# =========================
# KEY = VALUE SERIALIZATION
# =========================

_NESTED = {
    'prices': 'synthetic_prices',
    'synthetic_workload': 'synthetic_workload',
    'workload_params': 'workload_params',
}


def _format_value(value) -> str:
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if value is None:
        return ''
    if isinstance(value, float):
        return f"{value:g}"
    if isinstance(value, (list, tuple)):
        return ', '.join(_format_value(v) if not isinstance(v, (list, tuple)) else ':'.join(v) for v in value)
    return str(value)


def _flatten(config: ExperimentConfig):
    for f in fields(config):
        value = getattr(config, f.name)
        if f.name == 'instance_types':
            for name in sorted(value):
                ecus, cores, memory, price = value[name]
                yield f"type.{name}", f"ecus={ecus:g} cores={cores} memory_mb={memory} on_demand={price}"
        elif f.name in ('synthetic_prices', 'synthetic_workload', 'workload_params'):
            prefix = 'prices' if f.name == 'synthetic_prices' else f.name
            for sub in fields(value):
                yield f"{prefix}.{sub.name}", _format_value(getattr(value, sub.name))
        else:
            yield f.name, _format_value(value)


def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ('true', '1', 'yes', 'on'):
        return True
    if lowered in ('false', '0', 'no', 'off'):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_list(raw: str) -> List[str]:
    return [item.strip() for item in raw.split(',') if item.strip()]


def _coerce(current, raw: str):
    """Parse raw text into the type of the current value"""
    if isinstance(current, bool):
        return _parse_bool(raw)
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    if isinstance(current, (list, tuple)):
        items = _parse_list(raw)
        if current and isinstance(current[0], (int, float)) and not isinstance(current[0], bool):
            parsed = [float(item) for item in items]
        elif current and isinstance(current[0], (list, tuple)):
            parsed = [tuple(part.strip() for part in item.split(':')) for item in items]
        else:
            parsed = items
        return tuple(parsed) if isinstance(current, tuple) else parsed
    return raw


def _parse_type_row(name: str, raw: str) -> tuple:
    values = {}
    for token in raw.split():
        key, _, value = token.partition('=')
        values[key.strip()] = value.strip()
    try:
        return (float(values['ecus']), int(values['cores']), int(values['memory_mb']), values['on_demand'])
    except (KeyError, ValueError):
        raise ConfigurationError(f"type.{name} needs ecus=, cores=, memory_mb= and on_demand=")


def apply_settings(config: ExperimentConfig, settings: Dict[str, str]) -> ExperimentConfig:
    """Return a copy of config with textual settings applied"""
    config = replace(config)
    config.instance_types = dict(config.instance_types)
    nested = {name: replace(getattr(config, name)) for name in _NESTED.values()}
    for name, value in nested.items():
        setattr(config, name, value)
    optional_ints = {'jobs_limit'}
    custom_types = False

    for key, raw in settings.items():
        key = key.strip().replace('-', '_')
        raw = raw.strip()
        try:
            if key.startswith('type.'):
                type_name = key[len('type.'):]
                if not custom_types:
                    config.instance_types = {}
                    custom_types = True
                config.instance_types[type_name] = _parse_type_row(type_name, raw)
            elif '.' in key:
                prefix, _, sub = key.partition('.')
                if prefix not in _NESTED or not hasattr(nested[_NESTED[prefix]], sub):
                    raise ConfigurationError(f"Unknown setting '{key}'")
                target = nested[_NESTED[prefix]]
                current = getattr(target, sub)
                if current is None:
                    # optional weights
                    setattr(target, sub, [float(item) for item in _parse_list(raw)] or None)
                else:
                    setattr(target, sub, _coerce(current, raw))
            elif key in optional_ints:
                setattr(config, key, int(raw) if raw else None)
            elif hasattr(config, key) and key not in ('instance_types',) + tuple(_NESTED.values()):
                setattr(config, key, _coerce(getattr(config, key), raw))
            else:
                raise ConfigurationError(f"Unknown setting '{key}'")
        except ConfigurationError:
            raise
        except ValueError as e:
            raise ConfigurationError(f"Bad value for '{key}': {e}")
    return config


def parse_settings(lines) -> Dict[str, str]:
    """Read key = value lines; '#' starts a comment"""
    settings = {}
    for line_number, line in enumerate(lines, start=1):
        stripped = line.split('#', 1)[0].strip()
        if not stripped:
            continue
        key, sep, value = stripped.partition('=')
        if not sep or not key.strip():
            raise ConfigurationError(f"line {line_number}: expected 'key = value'")
        settings[key.strip()] = value.strip()
    return settings


def load_config(path: Optional[str] = None, overrides: Optional[Dict[str, str]] = None) -> ExperimentConfig:
    """
    Build an ExperimentConfig from an optional file and overrides (overrides win)

    Raises:
        ConfigurationError: For unreadable files, unknown keys or bad values
    """
    settings = {}
    if path:
        if not os.path.isfile(path):
            raise ConfigurationError(f"Config file not found: {path}")
        with open(path, 'r', encoding='utf-8') as f:
            settings.update(parse_settings(f))
        logger.info(f"Loaded {len(settings)} settings from {path}")
    settings.update(overrides or {})
    return apply_settings(ExperimentConfig(), settings).validate()
