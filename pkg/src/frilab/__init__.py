"""Monte Carlo laboratory for finitary random interlacements on the integer lattice.

The package samples the killed-random-walk Poisson soup exactly on finite
windows, realizes the monotone and fiber-length couplings, measures
percolation events with union-find cluster analytics, runs the randomized
exploration algorithm with revealment accounting, and verifies exactly
computable quantities (edge densities, length laws, FKG covariances) against
independent oracles.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .backend import active_backend, has_numba
from .lattice import Box, EdgeSet

__all__ = [
    "__version__",
    "active_backend",
    "has_numba",
    "Box",
    "EdgeSet",
]
