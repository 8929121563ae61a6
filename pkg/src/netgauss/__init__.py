"""Distributed Gaussian parameter estimation over time-varying directed graphs.

A simulation library for networks of agents that estimate a common
parameter from heterogeneous Gaussian observations by mixing
precision-weighted beliefs over column-stochastic (push-sum style)
communication, plus two published baseline estimators, the closed-form
O(1/k) mean-error bound, and a reproducible Monte Carlo harness.
"""

from .algorithms import (AlgorithmSpec, EstimatorState, TrajectoryRecord,
                         initial_state, lwr_step, precision_weighted_step,
                         run_trajectory, running_average_step)
from .analysis import (BoundInputs, Summary, bound_inputs_from, check_bound,
                       loglog_slope, mc_mean_error, mean_error_bound,
                       transition_step)
from .graphs import (DirectedGraph, GraphConstants, GraphSequence, TopologySpec,
                     build_weight_matrix, column_spread, empirical_delta,
                     generate_graph_sequence, is_regular, is_strongly_connected,
                     matrix_product, mixing_constants, validate_b_connectivity)
from .harness import (ConfigError, ExperimentConfig, averaging_matrix,
                      emit_reference_curve, list_presets, load_config,
                      load_preset, parse_config, run_experiment)
from .models import (AgentProfile, Gaussian, Population, hetero_variance_population,
                     iid_population, kl_gaussian, linear_population, objective,
                     optimal_theta, sample_observation)
from .seeding import agent_stream, derive_trial_seed

__version__ = "0.1.0"
