"""Positivity-preserving symplectic splitting schemes for the stochastic Lotka-Volterra model."""

from .brownian import BrownianPath, generate_path, increment_between, steps_for
from .errors import (
    AnalyticJacobianUnavailable,
    ConfigError,
    IncompatibleStepError,
    KUndefinedError,
    LevelTooLargeError,
    LogDomainError,
    NonDiagonalGammaError,
    NumericalOverflow,
    ParameterError,
)
from .integrators import (
    Scheme,
    TrajectoryRecord,
    flow1,
    flow2,
    integrate_ensemble,
    integrate_trajectory,
    step_em,
    step_lie_trotter,
    step_strang,
)
from .model import ModelParams, State, hamiltonians, ito_coefficients, noise_lambda, validate_params

__version__ = "0.1.0"
