"""Sampling-based MPC via binary quadratic energies.

A receding-horizon controller that condenses a linearized vehicle model into
a QUBO over binarized control deviations, draws from its Boltzmann
distribution with a Gibbs sampler, and rounds the bit means into the control
update — plus continuous Gaussian-MPPI baselines and the experiment harness
that compares them on spline-tracking scenarios.
"""

from .controllers import (
    ControlStepResult,
    DegenerateWeightsError,
    IsingMppiConfig,
    LinearMppiConfig,
    ReferenceMppiConfig,
    TrialResult,
    ising_mppi_step,
    non_ising_linear_mppi_step,
    reference_mppi_step,
    run_closed_loop,
)
from .dynamics import Control, DomainError, ModelParams, State
from .qubo import CostWeights, QuboProblem
from .sampler import GibbsConfig, SampleResult, gibbs_sample
from .scenarios import ReferenceTrajectory, generate_reference

__all__ = [
    "Control",
    "ControlStepResult",
    "CostWeights",
    "DegenerateWeightsError",
    "DomainError",
    "GibbsConfig",
    "IsingMppiConfig",
    "LinearMppiConfig",
    "ModelParams",
    "QuboProblem",
    "ReferenceMppiConfig",
    "ReferenceTrajectory",
    "SampleResult",
    "State",
    "TrialResult",
    "generate_reference",
    "gibbs_sample",
    "ising_mppi_step",
    "non_ising_linear_mppi_step",
    "reference_mppi_step",
    "run_closed_loop",
]
