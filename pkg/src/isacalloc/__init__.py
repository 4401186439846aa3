"""Robust secure resource allocation for scanning DFRC base stations.

The package couples a built-in first-order conic solver with the channel
uncertainty geometry, S-procedure reformulations, and the alternating
(block coordinate descent + inner approximation) algorithms needed to
schedule snapshot durations, information beamformers, and artificial-noise
covariances over one scanning period, plus a simulation harness.
"""

__version__ = "0.1.0"

from . import conic

__all__ = ["conic", "__version__"]
