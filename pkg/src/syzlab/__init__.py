"""Toric mirror-symmetry toolkit: hermitian metrics on toric line bundles and
Lagrangian sections of the mirror torus fibration.

The main entry points are re-exported here; see the submodules for details.
"""

from .analysis import (fiber_rescale, harmonic_solve, slag_residual, slope_quadrature,
                       slope_topological)
from .errors import (ConfigError, NotExtendable, NumericalFailure, SyzLabError,
                     VerifiedFailure)
from .growth import (appendix_hessian_limit, appendix_limit, check_growth,
                     extendability_check, infer_class, tail_limit)
from .kaehler import ToricPotential, legendre_inverse, moment_map
from .metrics import GuilleminPotential, MetricPotential, he_residual
from .syz import LagrangianSection, inverse_transform, lift_shift, transform
from .toric import Fan, Polytope, picard_reduce, polytope_from, validate_fan

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "Fan", "GuilleminPotential", "LagrangianSection", "MetricPotential",
    "NotExtendable", "NumericalFailure", "Polytope", "SyzLabError", "ToricPotential",
    "VerifiedFailure", "appendix_hessian_limit", "appendix_limit", "check_growth",
    "extendability_check", "fiber_rescale", "harmonic_solve", "he_residual", "infer_class",
    "inverse_transform", "legendre_inverse", "lift_shift", "moment_map", "picard_reduce",
    "polytope_from", "slag_residual", "slope_quadrature", "slope_topological", "tail_limit",
    "transform", "validate_fan",
]
