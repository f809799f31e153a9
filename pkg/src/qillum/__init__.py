"""Quantum illumination with a correlation-to-displacement receiver.

Modules
-------
specfn    Lambert W (lower branch), gamma law, Laguerre tables.
fock      Truncated photon-number states, trace norm, Helstrom error.
protocol  Scenario parameters and the heterodyne-and-combine conditional idler.
analytic  Error probabilities, bounds, photon-count thresholds, exponents.
source    Downconversion source: Bogoliubov coefficients and mode count.
qpg       Cavity-enhanced quantum pulse gate transfer functions.
mc        Seeded Monte Carlo of the full receiver chain.
cli       Batch front end (``qillum``).
"""

from .analytic import ConvergenceError, ErrorCurve, QuadSettings, compute_error_curve, p_cd, p_ci, p_ng
from .fock import FockMatrix, StateSpec, TruncationError, build_state, helstrom
from .protocol import ProtocolParams, conditional_params

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "ErrorCurve",
    "FockMatrix",
    "ProtocolParams",
    "QuadSettings",
    "StateSpec",
    "TruncationError",
    "build_state",
    "compute_error_curve",
    "conditional_params",
    "helstrom",
    "p_cd",
    "p_ci",
    "p_ng",
]
