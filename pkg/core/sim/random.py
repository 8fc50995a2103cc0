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
Seeded random streams for spotsim
Each concern draws from its own generator so consumers never perturb each other
"""
import zlib
from typing import Dict

import numpy as np

# Streams that describe the scenario itself (jobs, prices, start offset) are shared
# by every cell of a sweep so cells are compared on identical inputs
SHARED_STREAMS = frozenset({
    'moldability', 'estimates', 'deadlines', 'workload-start-offset', 'prices', 'workload',
})


class RandomStream:
    """Named numpy sub-streams derived from one 64-bit seed"""

    def __init__(self, seed: int, cell_index: int = 0):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.cell_index = int(cell_index)
        self._streams: Dict[str, np.random.Generator] = {}

    def stream(self, name: str) -> np.random.Generator:
        """Get the generator for a concern, created on first use"""
        if name not in self._streams:
            entropy = [self.seed, zlib.crc32(name.encode('utf-8'))]
            if name not in SHARED_STREAMS:
                entropy.append(self.cell_index)
            self._streams[name] = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
        return self._streams[name]

    def __getitem__(self, name: str) -> np.random.Generator:
        return self.stream(name)
