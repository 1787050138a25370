"""s2wb: numerical workbench for the sigma_2 Hessian equation.

Certifies the shifted-trace Jacobi inequality on the constraint manifold,
verifies the Legendre-Lewy transform identities and the ellipticity of the
Hessian quotient, and runs finite-difference experiments that exhibit the
rigidity (Liouville) mechanism at desk scale.
"""

__version__ = "0.1.0"

from .backend import backend_name, kernels
from .errors import S2Error
from .symcore import Spectrum, SymmetricMatrix, eigen_sym, quotient, sigma_k, sigma_k_partial
from .sigma2op import Branch, OperatorPoint, apply_lap_F, evaluate_F, grad_F_square, linearization
from .jacobicert import (
    ConstraintSample,
    Jet,
    QReduction,
    det_lower_bound,
    jacobi_excess,
    project_jet,
    q_form_direct,
    q_reduction_eigen,
    remark_3d,
    sample_constraint,
    superharmonic_form,
)
from .legendre import (
    TransformConfig,
    TransformedState,
    eigenvalue_bounds_check,
    q_ellipticity,
    quotient_q,
    transform_grid,
    transform_spectrum,
)
from .grids import PotentialGrid, read_s2grid, write_s2grid
from .fdsolver import (
    SolveReport,
    concentration_diagnostic,
    scaling_experiment,
    solve_dirichlet,
    superharmonicity_residual,
)

__all__ = [
    "__version__",
    "backend_name",
    "kernels",
    "S2Error",
    "Spectrum",
    "SymmetricMatrix",
    "eigen_sym",
    "quotient",
    "sigma_k",
    "sigma_k_partial",
    "Branch",
    "OperatorPoint",
    "apply_lap_F",
    "evaluate_F",
    "grad_F_square",
    "linearization",
    "ConstraintSample",
    "Jet",
    "QReduction",
    "det_lower_bound",
    "jacobi_excess",
    "project_jet",
    "q_form_direct",
    "q_reduction_eigen",
    "remark_3d",
    "sample_constraint",
    "superharmonic_form",
    "TransformConfig",
    "TransformedState",
    "eigenvalue_bounds_check",
    "q_ellipticity",
    "quotient_q",
    "transform_grid",
    "transform_spectrum",
    "PotentialGrid",
    "read_s2grid",
    "write_s2grid",
    "SolveReport",
    "concentration_diagnostic",
    "scaling_experiment",
    "solve_dirichlet",
    "superharmonicity_residual",
]
