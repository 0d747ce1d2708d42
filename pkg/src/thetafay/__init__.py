"""Theta-function identities and theta-functional wave solutions.

Numerical evaluation of multidimensional Riemann theta functions,
period data of algebraic curves, trisecant-type theta identities, and
residual-validated theta-functional solutions of NLS-type, Davey-
Stewartson and KP equations.
"""

__version__ = "0.1.0"

from .fay import (
    FayError,
    FayScalars,
    degenerate_identity_residual,
    fay_scalars,
    new_identity_residual,
    prime_form,
    q2_integral_oracle,
    residual_report,
    trisecant_residual,
)
from .scaled import ScaledComplex
from .surfaces import (
    AbelPath,
    MarkedPoint,
    PointJet,
    SurfaceError,
    SurfaceModel,
    build_surface,
    config_hash,
    infer_lattice_pair,
    odd_nonsingular_char,
)
from .kp import (
    KpData,
    KpError,
    fiber_second_derivative_defect,
    kp_constant_c,
    kp_nnls_relation_residual,
    kp_residual,
    kp_solution,
    second_kind_constant_oracle,
)
from .theta import (
    DerivativeSpec,
    HalfCharacteristic,
    RiemannMatrix,
    quasi_periodicity_residual,
    theta,
    theta_batch,
    theta_deriv,
    truncation_radius,
)
from .wave import (
    DSParams,
    NnlsParams,
    ResidualReport,
    SolutionBundle,
    WaveError,
    ds1_real_solution,
    ds2_real_solution,
    ds_complex_solution,
    ds_covariance_deviation,
    ds_system_residual,
    flow_grid,
    linear_potential_residual,
    nls_residual,
    nls_solution,
    nnls_complex_solution,
    nnls_covariance_deviation,
    nnls_real_residual,
    nnls_real_solution,
    nnls_system_residual,
    reality_deviation,
    smoothness_scan,
    stationary_check,
)

__all__ = [
    "ScaledComplex",
    "RiemannMatrix",
    "HalfCharacteristic",
    "DerivativeSpec",
    "theta",
    "theta_batch",
    "theta_deriv",
    "truncation_radius",
    "quasi_periodicity_residual",
    "SurfaceModel",
    "SurfaceError",
    "MarkedPoint",
    "PointJet",
    "AbelPath",
    "build_surface",
    "config_hash",
    "odd_nonsingular_char",
    "infer_lattice_pair",
    "FayError",
    "FayScalars",
    "prime_form",
    "fay_scalars",
    "trisecant_residual",
    "new_identity_residual",
    "degenerate_identity_residual",
    "q2_integral_oracle",
    "residual_report",
    "WaveError",
    "DSParams",
    "NnlsParams",
    "ResidualReport",
    "SolutionBundle",
    "flow_grid",
    "reality_deviation",
    "ds_complex_solution",
    "ds_system_residual",
    "ds1_real_solution",
    "ds2_real_solution",
    "nls_solution",
    "nls_residual",
    "linear_potential_residual",
    "nnls_complex_solution",
    "nnls_system_residual",
    "nnls_real_solution",
    "nnls_real_residual",
    "stationary_check",
    "smoothness_scan",
    "ds_covariance_deviation",
    "nnls_covariance_deviation",
    "KpError",
    "KpData",
    "kp_constant_c",
    "kp_solution",
    "kp_residual",
    "second_kind_constant_oracle",
    "fiber_second_derivative_defect",
    "kp_nnls_relation_residual",
    "__version__",
]
