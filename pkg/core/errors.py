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
Exception types raised across spotsim
"""


class SpotsimError(Exception):
    """Base class for all spotsim errors"""


class ConfigurationError(SpotsimError, ValueError):
    """Invalid experiment configuration or missing input data"""


class TraceParseError(SpotsimError, ValueError):
    """Malformed row in a price trace or workload file"""

    def __init__(self, message, line_number=None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class SimulationError(SpotsimError, RuntimeError):
    """A simulation invariant was broken"""


class InstanceStateError(SimulationError):
    """Illegal instance state transition"""
