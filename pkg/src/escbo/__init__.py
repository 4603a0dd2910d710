"""Consensus-based derivative-free global optimization.

A swarm of particles drifts toward a softmin-weighted average of its own
positions, diffuses with a shared per-iteration Gaussian, and optionally
takes an extra step along a forward-difference gradient estimate (the ESCBO
scheme, with a mini-batch variant for expensive objectives).  The package
bundles the steppers with benchmark objectives, a sigmoid-MLP training
target, computable convergence bounds, and a seeded experiment harness.
"""

from .benchmarks import BenchmarkSpec, available, lookup
from .harness import (AggregateReport, DiagnosticReport, ExperimentConfig,
                      RunRecord, diagnose, emit_report, run_many, run_once,
                      table_preset)
from .neural import (MLPArchitecture, SyntheticDataset, dnn_objective,
                     flatten, forward, generate_synthetic, load_dataset,
                     save_dataset, test_error, train_error, unflatten)
from .objective import (ConfigurationError, EstimationError, FiniteDiffConfig,
                        LipschitzData, Objective, estimate_lipschitz,
                        forward_difference_gradient, gradient_bounds,
                        minibatch_gradients)
from .swarm import (CBOParams, ComponentGaussian, ConsensusPoint,
                    DivergenceError, RngStream, StepSchedule, SwarmState,
                    UniformBox, check_stop, consensus_point, draw_noise,
                    escbo_step, fescbo_step, init_swarm, refresh_values,
                    softmin_weights, swarm_diameter, vanilla_cbo_step)
from .theory import (BoundSeries, ComplexityConstants, ConsensusCondition,
                     EmptyIndicatorError, ErrorBoundCheck,
                     GrowthConditionParams, InvalidParametersError,
                     ParameterConditionWarning, ProximityResult,
                     check_consensus_condition, check_error_bound_condition,
                     consensus_bound, consensus_bound_series,
                     consensus_distance_bound, contraction_constants,
                     error_budget, growth_margin, growth_radius,
                     iteration_budget, laplace_value, max_on_ball,
                     perturbation_series)

__version__ = "0.1.0"
