"""qot: non-commutative optimal transport on density matrices.

Wasserstein distances, geodesics, Riemannian inner products, and entropy
gradient flows for the anti-commutator and logarithmic (Kubo-Mori)
geometries, on single density matrices and on matrix-valued densities over a
1-D grid.
"""

from .errors import (ConvergenceError, PositivityError, QotError,
                     SingularSystemError, ValidationError)
from .linalg import (as_block_field, as_density, as_hermitian,
                     as_skew_hermitian, as_tangent, eigh_fixed, herm_exp,
                     herm_log, hs_inner, matrix_function,
                     project_traceless_hermitian)
from .lindblad import (LindbladBasis, basis_from_name, div_L, gell_mann_basis,
                       grad_L, heat_semigroup, kubo_mori_quadrature,
                       laplacian_L, laplacian_superoperator, lindblad_step,
                       mult_anticomm, mult_kubo_mori, mult_kubo_mori_inverse,
                       pauli_basis)
from .metric import (MetricKind, Potential, inner_product, lyapunov_crosscheck,
                     min_norm_velocity, poisson_solve)
from .geodesic import (DiscretePath, solve_w2a_conic, solve_w2_direct,
                       verify_optimality)
from .flows import FlowTrace, entropy, flow_anticomm, flow_log, flow_step_generic
from .spatial import (MatrixField, SpatialPath, continuity_residual, div_x,
                      grad_x, solve_spatial_geodesic,
                      solve_spatial_geodesic_direct, spatial_entropy_flow,
                      spatial_heat_exact)
from .transport import SolveReport, SolverOptions

__version__ = "0.1.0"
