"""msqglab: modified-SQG simulator and numerical verification lab.

Evolves the transport equation d_t omega + (u . grad) omega = 0 with
u = grad^perp (-Laplace)^(-1+alpha) omega on the odd-odd symmetric torus,
and cross-checks the pseudo-spectral velocity against direct quadrature of
the symmetrized Biot-Savart kernels, including near/medium/far field
decompositions and their scaling laws.
"""

__version__ = "0.1.0"
