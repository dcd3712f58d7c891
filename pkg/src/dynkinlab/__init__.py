"""Monte Carlo verification of Dynkin-Hunt decompositions and exit-time heat kernel bounds.

The most used entry points are re-exported here.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .bounds import (BoundFunction, ConstantLedger, compose_chain, derive_constants, exit_chain_constants,
                     theorem52_rhs, theorem54_rhs)
from .dynkin_hunt import verify_multiple_dh, verify_single_dh
from .estimate import EstimateWithError, density_extract, exit_prob, mean_exit_time, transition_prob
from .process import ProcessModel, sample_path, sample_paths
from .scale import ScaleFunction, phi_eval, psi_eval, psi_inverse
from .space import Circle, ConfigError, Gasket, Line, OpenSetSpec
from .stopping import entrance_time, exit_time, mdh_sequence

__all__ = [
    "BoundFunction", "Circle", "ConfigError", "ConstantLedger", "EstimateWithError", "Gasket", "Line",
    "OpenSetSpec", "ProcessModel", "ScaleFunction", "compose_chain", "density_extract", "derive_constants",
    "entrance_time", "exit_chain_constants", "exit_prob", "exit_time", "mdh_sequence", "mean_exit_time",
    "phi_eval", "psi_eval", "psi_inverse", "sample_path", "sample_paths", "theorem52_rhs", "theorem54_rhs",
    "transition_prob", "verify_multiple_dh", "verify_single_dh", "__version__",
]
