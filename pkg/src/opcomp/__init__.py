"""Sparse compression of elliptic solution operators and covariance kernels.

Localized, energy-minimizing basis functions on coarse patches compress
self-adjoint elliptic solution operators and kernel operators at the optimal
rate; this package builds those bases on fine conforming discretizations,
measures compression/convergence rates, and drives the studies from a CLI.
"""

__version__ = "0.1.0"
