"""Gain-based scheduling of stochastic gradient updates for linear regression tasks."""

from gainsched.core_model import (
    ContractViolation,
    NotPositiveDefinite,
    SpectralInfo,
    TaskSpec,
    contraction_factor,
    exact_gain,
    exact_gradient,
    exact_objective,
    max_stepsize,
)
from gainsched.data import DataBatch, EmptyBatch, RngStream, cholesky_factor, sample_batch
from gainsched.estimator import (
    GainEstimate,
    GainMode,
    empirical_hessian,
    empirical_objective,
    estimated_gain,
    stochastic_gradient,
)
from gainsched.policies import (
    PolicyConfig,
    PolicyKind,
    ScheduleDecision,
    baseline_select,
    gradient_norm_select,
    greedy_gain_select,
    threshold_decide,
)
from gainsched.simulator import Ensemble, SimConfig, SimulationError, Trajectory, monte_carlo, run
from gainsched.theory import (
    BoundKind,
    BoundReport,
    GradientNoise,
    check_bounds,
    communication_budget,
    convergence_envelope,
    equilibrium_gradient_covariance,
)

__version__ = "0.1.0"
