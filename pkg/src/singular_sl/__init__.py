"""Fundamental systems of solutions for Sturm-Liouville equations with
distributional potentials, and their asymptotics in lambda half-planes."""
from .coefficients import (CoefficientSet, Interval, ValidationReport, ingest_coefficients, make_coefficients,
                           validate_conditions)
from .errors import (DomainError, GridError, HalfPlaneError, IntegrabilityError, NoConvergence, NormalizationError,
                     PositivityError, SingularSLError, SpecError, StiffnessError)
from .kernels import BACKEND
from .liouville import LiouvilleMap, TransformedSystem, build_map, compute_sigma, transform
from .oracle import OracleSolution, adaptive_reference, constant_closed_form, transfer_matrix_delta
from .solutions import (DecayReport, FundamentalSystem, SolutionBranch, assemble_branch, fundamental_system,
                        remainder_sweep, solve, solve_lower_halfplane)
from .volterra import (IterationConfig, IterationState, SpectralPoint, apply_A, apply_A1, apply_B, apply_B1,
                       apriori_bound, oscillatory_integral, picard_solve)

__version__ = "0.1.0"
