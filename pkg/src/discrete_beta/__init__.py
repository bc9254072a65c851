"""Discrete beta-ensembles: kernels, configurations, equilibrium measures and finite-N experiments."""

from ._accel import HAVE_NUMBA
from .configurations import (ParticleConfig, discrete_energy, empirical_measure, from_line, log_weight,
                             positions, quantile_config, to_line, validate)
from .ensembles import (EnsembleSpec, JackParams, WellposednessError, cauchy_ensemble, jack_ensemble,
                        jack_partition_closed, mcmc_run, mcmc_sample, partition_exact, wellposedness_check)
from .equilibrium import (EquilibriumProblem, EquilibriumSolution, cauchy_density, effective_potential,
                          jack_density, rate_function, solve, variational_residual)
from .kernels import (INF, DomainError, SpherePoint, inverse_stereo, kernel_fv, kernel_kv, log_q_theta,
                      q_theta_sandwich, stereo, stereo_dist)
from .ldp import ScanResult, ball_probability_exact, free_energy_scan, ks_compare, scaled_log_partition
from .measures import (AtomicMeasure, GridMeasure, SphereMeasure, energy, energy_sphere, levy_distance,
                       mixed_energy, pushforward, truncate_measure)
from .potentials import (GrowthCert, Potential, cauchy_potential, jack_limit_potential, jack_potential,
                         table_potential)

__all__ = [name for name in dir() if not name.startswith("_")]
