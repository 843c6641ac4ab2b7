"""Numerical laboratory for the stochastic heat equation driven by a Levy
generator and spatially correlated noise: transition kernels by Fourier
inversion, pinned-path (bridge) densities and pairings, spectral noise
sampling, moment-bound constants, an exponential-integrator solver, and
Monte Carlo growth-rate estimation.
"""

from .errors import (ConfigError, DivergenceError, ExtentError,
                     NumericsError, ResolutionError, SimulationError)
from .grids import SpatialGrid
from .exponents import (IntegrabilityResult, LevyExponent, check_integrability,
                        evaluate_exponent, homogeneity_degree,
                        make_stable_exponent, make_tabulated_exponent)
from .kernels import (AdmissibilityResult, InitialMeasure, KernelGrid,
                      check_initial_admissible, convolve_initial, default_grid,
                      density_at, invert_char_fn, semigroup_defect,
                      transition_density)
from .covariance import (CovarianceModel, ParsevalReport, correlation_function,
                         make_bump, make_covariance, make_riesz,
                         make_tabulated_covariance, make_white,
                         noise_covariance_row, parseval_check,
                         riesz_spectral_constant, sample_noise_increment,
                         spectral_amplitude, spectral_density)
from .bridges import (BridgeBoundReport, BridgeDensity, BridgeSpec,
                      CFComparison, bridge_char_fn, bridge_density,
                      bridge_grid, compare_char_fns, empirical_char_fn,
                      sample_bridge, verify_bridge_bound)
from .bounds import (BoundParams, CriticalBetaResult, UpsilonScan,
                     bound_constant, critical_beta, hermite_largest_zero,
                     hermite_zeros, tau_const, upsilon, upsilon_scan,
                     upsilon_tilde)

__version__ = "0.1.0"
