"""Finite-volume simulation and discrete Lyapunov/ISS certificates for 1-D
linear hyperbolic balance laws with boundary feedback."""

from .errors import (ConfigError, HyplyapError, InvalidParameterError, InvalidWeightError,
                     NoCertificateError, NumericalBlowupError, SingularGainError,
                     SteadyStateError, UnsupportedShapeError)
from .model import (ExplicitWeights, ExponentialWeights, FeedbackMatrix, GridSpec, StateField,
                    SystemCoefficients, build_grid, linear_example, realize_weights)
from .solver import (LyapunovSeries, SimulationResult, apply_boundary, simulate, source_step,
                     transport_step)
from .stability import (ConditionReport, check_boundary_matrix, check_conditions, check_continuous,
                        check_source_matrix, check_theta, decay_rate_exponential, feedback_bounds,
                        gronwall_envelope, iss_bound_check, lyapunov_value, min_eig_symmetric,
                        weight_bounds)
from .config import RunConfig, load_config, parse_config

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
