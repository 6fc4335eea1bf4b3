"""electroflow: pseudo-spectral simulation and verification harness for a
2D electroconvection model with fractional diffusion.

The periodic solver couples a charge density with fractional dissipation
to Navier-Stokes through nonlocal electric forces; the Dirichlet module
carries the eigenfunction-expansion operators and the operator-level
inequality checks on the square.
"""

from .spectral import (SpectralField, TorusGrid, VectorSpectralField, dealias,
                       forward_transform, get_grid, inverse_transform)
from .operators import (fractional_laplacian, gevrey_weight, inverse_lambda_eps,
                        leray_project, riesz_transform)
from .solver import (ForcingSpec, SolverConfig, State, galerkin_truncate,
                     nonlinear_rhs, run, step)
from .diagnostics import (DiagnosticsRecord, decay_rate_fit, gevrey_radius_fit,
                          gronwall_verify, lp_norm)

__all__ = [
    "SpectralField", "TorusGrid", "VectorSpectralField", "dealias",
    "forward_transform", "get_grid", "inverse_transform",
    "fractional_laplacian", "gevrey_weight", "inverse_lambda_eps",
    "leray_project", "riesz_transform",
    "ForcingSpec", "SolverConfig", "State", "galerkin_truncate",
    "nonlinear_rhs", "run", "step",
    "DiagnosticsRecord", "decay_rate_fit", "gevrey_radius_fit",
    "gronwall_verify", "lp_norm",
]

__version__ = "0.1.0"
