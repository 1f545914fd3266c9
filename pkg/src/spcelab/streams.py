"""Counter-based random substreams.

Every stochastic routine takes an explicit ``numpy.random.Generator``.  The
harness derives independent generators from one master seed through Philox
(a counter-based generator), so results do not depend on scheduling or on
the number of workers.

Derivation scheme
-----------------
A substream is identified by a 128-bit Philox key::

    key = (master_seed mod 2**64) * 2**64 + path
    path = domain << 56 | index << 32 | batch

``domain`` tags the purpose (8 bits), ``index`` the setting / grid point /
replication (24 bits) and ``batch`` an inner Monte Carlo batch (32 bits).
Distinct (domain, index, batch) triples give independent streams; replaying
a triple replays its stream exactly.
"""

from __future__ import annotations

import numpy as np

from .errors import ParameterError

DOMAIN_SIMULATE = 1
DOMAIN_PROTOCOL = 2
DOMAIN_ANALYSIS = 3
DOMAIN_SWEEP = 4
DOMAIN_INTEGRATION = 5

_MASK64 = (1 << 64) - 1


def stream_key(master_seed: int, domain: int, index: int = 0, batch: int = 0) -> int:
    if not 0 <= domain < 1 << 8:
        raise ParameterError(f"domain {domain} outside [0, 256)")
    if not 0 <= index < 1 << 24:
        raise ParameterError(f"index {index} outside [0, 2**24)")
    if not 0 <= batch < 1 << 32:
        raise ParameterError(f"batch {batch} outside [0, 2**32)")
    path = (domain << 56) | (index << 32) | batch
    return ((int(master_seed) & _MASK64) << 64) | path


def substream(master_seed: int, domain: int, index: int = 0, batch: int = 0) -> np.random.Generator:
    """Independent generator for the given (domain, index, batch) triple."""
    return np.random.Generator(np.random.Philox(key=stream_key(master_seed, domain, index, batch)))
