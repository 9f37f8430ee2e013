"""Discrete fractional Laplacian on Z^d and ground states of the discrete
fractional Schrodinger equation (-Lap)^a u + h(x) u = f(x, u).

The operator is available through three equivalent routes (Fourier
multiplier, kernel convolution, heat-semigroup subordination); ground
states and sign-changing bound states come from Nehari-manifold descent
with multistart and orbit deduplication.
"""

__version__ = "0.1.0"

from .lattice import (Boundary, Field, LatticeGeometry, boundary_shell_mass,
                      interpolation_check, load_field, norm, save_field, shift)
from .model import (Model, Nonlinearity, Potential, energy, f_eval, F_eval,
                    gradient, load_model, make_model, model_config_dict,
                    model_from_config, mountain_gap, nehari_residual)
from .nehari import (GroundStateResult, LineSearchStallError,
                     NonConvergenceError, SolutionOrbit, SolutionSet,
                     SolverConfig, SolverError, batch_certificates,
                     gaussian_bump, minimize, multistart, nehari_scale,
                     nehari_scale_root, orbit_distance, project_m)
from .semigroup import (HeatConfig, build_scheme, fraclap_semigroup,
                        gamma_negative, heat_apply, scalar_identity_error,
                        scaled_bessel_row)
from .spectral import (Kernel, SpectralConfig, apply_kernel,
                       apply_multiplier_fft, decay_check, dft, halpha_inner,
                       halpha_inner_spectral, kernel_matrix, kernel_table,
                       symbol, torus_kernel, validate_kernel)

__all__ = [
    "Boundary", "Field", "LatticeGeometry", "boundary_shell_mass",
    "interpolation_check", "load_field", "norm", "save_field", "shift",
    "Kernel", "SpectralConfig", "apply_kernel", "apply_multiplier_fft",
    "decay_check", "dft", "halpha_inner", "halpha_inner_spectral",
    "kernel_matrix", "kernel_table", "symbol", "torus_kernel", "validate_kernel",
    "HeatConfig", "build_scheme", "fraclap_semigroup", "gamma_negative",
    "heat_apply", "scalar_identity_error", "scaled_bessel_row",
    "Model", "Nonlinearity", "Potential", "energy", "f_eval", "F_eval",
    "gradient", "load_model", "make_model", "model_config_dict",
    "model_from_config", "mountain_gap", "nehari_residual",
    "GroundStateResult", "LineSearchStallError", "NonConvergenceError",
    "SolutionOrbit", "SolutionSet", "SolverConfig", "SolverError",
    "batch_certificates", "gaussian_bump", "minimize", "multistart",
    "nehari_scale", "nehari_scale_root", "orbit_distance", "project_m",
]
