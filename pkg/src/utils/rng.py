"""Counter-based random streams for the microscopic lattice gas.

Every uniform variate is addressed by the tuple
``(master_seed, realization, step, site, draw)``:

* the Philox key is the 128-bit pair ``(master_seed, realization)``;
* the Philox counter starts at ``(0, draw, step, 0)``;
* the variate for ``site`` is element ``site`` of ``Generator.random(n_sites)``.

Philox is a pure function of key and counter, so a variate never depends on
how many other realizations were advanced before it or on which thread did
the work. The same tuple gives the same double on every platform numpy
supports.
"""

from enum import IntEnum

import numpy as np

from utils.errors import ParameterError

_UINT64_MASK = (1 << 64) - 1

# Step slot used for the initial Bernoulli sampling of an ensemble.
INIT_STEP = _UINT64_MASK


class Draw(IntEnum):
    """Draw indices within one (realization, step)."""

    BIAS = 0
    FAIR = 1
    PLUS = 2
    MINUS = 3


def realization_generator(master_seed, realization, step, draw):
    """Return a numpy Generator positioned at the given stream coordinates."""
    if master_seed < 0 or realization < 0 or step < 0:
        raise ParameterError(
            f"stream coordinates must be non-negative "
            f"(seed={master_seed}, realization={realization}, step={step})"
        )
    key = np.array([master_seed & _UINT64_MASK, realization & _UINT64_MASK], dtype=np.uint64)
    counter = np.array([0, int(draw), step & _UINT64_MASK, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def uniforms(master_seed, realization, step, draw, n_sites):
    """Uniform variates in [0, 1), one per site, for one stream coordinate."""
    return realization_generator(master_seed, realization, step, draw).random(n_sites)
