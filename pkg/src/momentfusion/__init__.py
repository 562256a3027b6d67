"""Moment reconstruction from low-dimensional projections via Grassmannian cubature."""

from .cubature import (ConcentrationReport, CubatureRule, OptimizerConfig,
                       certify, concentration_experiment, minimize_potential,
                       potential, probabilistic_rule, solve_weights)
from .empirical import (DiscreteDistribution, SampleBatch, estimate_moments,
                        mc_trace_moment, project_moments, random_discrete,
                        sample, true_moments)
from .grassmann import (MeasurementEnsemble, Projector, e_matrix, haar_sample,
                        projector_from_measurement)
from .moments import MomentTensor, ProjectedMomentSet, multi_indices
from .reconstruct import (fusion_constants, polarize, pushforward,
                          rank1_coefficients, reconstruct_general,
                          reconstruct_rank1, reconstruct_sphere,
                          spanning_family, spanning_reconstruct)
from .trace_moments import (GramPair, TraceMomentCoefficients, coefficients,
                            gaussian_pair_moment, lambda_t, mu_mixed, mu_rank1,
                            mu_t, sphere_bilinear_integral)

__version__ = "0.1.0"
