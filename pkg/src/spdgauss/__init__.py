"""Riemannian Gaussian distributions on SPD matrices and Siegel domains.

The library computes normalizing factors of these distributions (exactly,
through the planar trilogarithm limit, or by Monte Carlo), samples them,
fits their parameters by maximum likelihood and compares sampled spectra
with the limiting eigenvalue density.
"""

__version__ = "0.1.0"

from .errors import ConvergenceError, DomainError, NumericalError
from .matrix_core import (EigenSystem, LogValue, adjoint, eigh, hermitian_part,
                          log_pfaffian, matrix_function, takagi)
from .specfun import (ZETA2, ZETA3, erf, phi_planar_corrected, phi_planar_corrected_deriv,
                      phi_trilog, phi_trilog_deriv, polylog)
from .spd import (FactoredSpd, check_spd, congruence, distance, exp_map, infer_beta,
                  log_map, metric_inner, metric_norm, sq_distances, whitened_eigs,
                  whitened_log)
from .partition import (METHODS, EnsembleSpec, LogZResult, log_z, log_z_exact_beta2,
                        log_z_monte_carlo, log_z_pfaffian_beta1, log_z_trilog,
                        phi_monte_carlo, phi_sigma, vandermonde_offset)
from .sampler import (ChainConfig, GaussianModel, RadialChain, haar, radial_log_density,
                      sample_gaussian_spd, sample_radial, to_log_normal_ensemble)
from .inference import (FitReport, MeanResult, SigmaResult, estimate_sigma, fit_gaussian,
                        frechet_mean, mean_sq_dist)
from .spectral import (SpectralDensity, asymptotic_cdf, compare_empirical, density_eval,
                       density_params, total_mass, xi_for)
from .siegel import (MobiusMap, PolarFactor, SiegelGaussianModel, check_siegel, cross_ratio,
                     log_z_acosh_mc, log_z_acosh_n1, mobius_to_origin, polar_factor,
                     sample_siegel_gaussian, sample_siegel_radial, siegel_distance,
                     siegel_metric_inner, siegel_proposal_scale,
                     siegel_radial_log_density)
from .matrix_io import read_matrices, write_matrices
