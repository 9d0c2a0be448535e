"""The three receding-horizon controllers and the closed-loop trial runner.

All three share the same outer shape — start each control step from a zero
nominal sequence, refine it over M iterations, apply the first control — and
differ in how an iteration proposes the refinement:

* ising:     linearize, condense, binarize, Gibbs-sample the QUBO, round the
             bit means, decode through the expansion, add to the nominal.
* linear:    linearize, condense, keep the deviation continuous, score S
             Gaussian perturbations under the quadratic cost, add the
             Boltzmann-weighted mean.
* reference: no linearization — roll the nonlinear model under S Gaussian
             perturbations of the full sequence and Boltzmann-average them.

Every step is a pure function of (state, reference window, config, seed);
the runner derives per-step seeds from one trial seed so whole trials replay
bit-identically.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import qubo
from .dynamics import (
    CONTROL_DIM,
    STATE_DIM,
    Control,
    DomainError,
    ModelParams,
    State,
    linearize_along,
    rollout_batch,
    step_nonlinear,
)
from .qubo import CostWeights
from .rng import SeedStream, mask64
from .sampler import GibbsConfig, gibbs_sample
from .scenarios import ReferenceTrajectory


class DegenerateWeightsError(RuntimeError):
    """All sampled rollouts received zero Boltzmann weight (non-finite costs)."""


def default_weights() -> CostWeights:
    """Tracking cost used throughout: heavy on position, light on heading."""
    return CostWeights.from_diagonals([1000.0, 1000.0, 1.0, 0.0, 0.0], [1.0, 1.0])


@dataclass(frozen=True)
class IsingMppiConfig:
    horizon: int = 8
    iterations: int = 4
    sweeps: int = 200
    lam: float = 0.1
    bits: int = 5
    magnitudes: tuple[float, ...] = (15.0, 2.2)
    dt: float = 0.1
    weights: CostWeights = field(default_factory=default_weights)
    wheelbase: float = 1.0
    # Start each Gibbs chain at a = 0 (the nominal sequence itself).  At this
    # cost scale lam = 0.1 is effectively zero temperature, so a chain started
    # from random bits freezes into whatever local minimum it first reaches —
    # frequently one with H > 0, i.e. an update worse than doing nothing, and
    # those corrupt the nominal sequence until the vehicle leaves the model
    # domain.  From a = 0 a frozen chain can only descend below H(0) = 0.
    init: str = "zeros"
    warm_start: bool = False

    def __post_init__(self):
        if min(self.horizon, self.iterations, self.sweeps, self.bits) < 1:
            raise ValueError("horizon, iterations, sweeps and bits must all be >= 1")
        if not self.lam > 0:
            raise ValueError(f"lam must be positive, got {self.lam}")


@dataclass(frozen=True)
class LinearMppiConfig:
    """Gaussian MPPI on the condensed quadratic (the binary expansion removed).

    noise_sigma defaults to a third of the bit-code magnitudes (15, 2.2), so
    the Gaussian covers at 3 sigma the same deviation range the binary
    controller's code book spans — the continuous analog of the same search
    space, not a narrowed one.
    """

    horizon: int = 8
    iterations: int = 4
    samples: int = 1000
    lam: float = 0.1
    noise_sigma: tuple[float, ...] = (5.0, 0.73)
    dt: float = 0.1
    weights: CostWeights = field(default_factory=default_weights)
    wheelbase: float = 1.0
    warm_start: bool = False

    def __post_init__(self):
        _check_gaussian_cfg(self)


@dataclass(frozen=True)
class ReferenceMppiConfig:
    """Gaussian MPPI rolling the nonlinear model directly.

    noise_sigma defaults to ~10% of the bit-code magnitudes: the nonlinear
    rollouts make small local perturbations informative, and wider noise only
    adds steady-state jitter (measured over the default scenario corpus).
    """

    horizon: int = 8
    iterations: int = 4
    samples: int = 1000
    lam: float = 0.1
    noise_sigma: tuple[float, ...] = (1.5, 0.3)
    dt: float = 0.1
    weights: CostWeights = field(default_factory=default_weights)
    wheelbase: float = 1.0
    warm_start: bool = False

    def __post_init__(self):
        _check_gaussian_cfg(self)


def _check_gaussian_cfg(cfg) -> None:
    if min(cfg.horizon, cfg.iterations, cfg.samples) < 1:
        raise ValueError("horizon, iterations and samples must all be >= 1")
    if not cfg.lam > 0:
        raise ValueError(f"lam must be positive, got {cfg.lam}")
    if len(cfg.noise_sigma) != CONTROL_DIM or any(s <= 0 for s in cfg.noise_sigma):
        raise ValueError(f"noise_sigma must be {CONTROL_DIM} positive values, got {cfg.noise_sigma}")


@dataclass(frozen=True)
class ControlStepResult:
    u0: Control
    ubar: np.ndarray                   # (N, 2) nominal sequence after all iterations
    per_iteration_energy: np.ndarray   # (M,) diagnostic, see each step's docstring
    wall_time: float


@dataclass(frozen=True)
class TrialResult:
    realized: np.ndarray               # (T+1, 5) visited states
    reference: np.ndarray              # (n, 5) full reference sequence
    mse: float
    per_step: tuple[ControlStepResult, ...]
    diverged: bool = False


def _check_window(window: np.ndarray, horizon: int) -> np.ndarray:
    window = np.asarray(window, dtype=float)
    if window.shape != (horizon, STATE_DIM):
        raise ValueError(f"reference window must be ({horizon}, {STATE_DIM}), got {window.shape}")
    return window


def ising_mppi_step(
    x0: State,
    xref_window: np.ndarray,
    cfg: IsingMppiConfig,
    seed: int,
    ubar_init: np.ndarray | None = None,
) -> ControlStepResult:
    """One Ising-MPPI control step.

    Each iteration relinearizes around the current nominal sequence, builds
    the symmetrized QUBO over control deviations, Gibbs-samples it at
    temperature lam, rounds the bit means, and decodes the rounded bits back
    into a continuous deviation added to the nominal.  per_iteration_energy
    records H(rounded) for each iteration's problem.
    """
    window = _check_window(xref_window, cfg.horizon)
    start = time.perf_counter()
    stream = SeedStream(mask64(seed))
    params = ModelParams(wheelbase=cfg.wheelbase)
    ex = qubo.build_expansion(cfg.bits, cfg.magnitudes, cfg.horizon)
    ubar = np.zeros((cfg.horizon, CONTROL_DIM)) if ubar_init is None else ubar_init.copy()
    energies = np.empty(cfg.iterations)
    for it in range(cfg.iterations):
        steps = linearize_along(x0, ubar, cfg.dt, params)
        hm = qubo.build_horizon(steps, cfg.dt)
        raw = qubo.assemble_qubo(
            hm, ex, cfg.weights, x0.as_array(), ubar.ravel(), window.ravel(),
            lambda_hint=cfg.lam)
        problem = qubo.symmetrize(raw)
        result = gibbs_sample(problem, GibbsConfig(
            sweeps=cfg.sweeps, lam=cfg.lam, seed=stream.next_u64(), init=cfg.init))
        a_hat = result.rounded
        energies[it] = qubo.energy(problem, a_hat)
        ubar = ubar + (ex.Eblk @ a_hat).reshape(cfg.horizon, CONTROL_DIM)
    return ControlStepResult(
        u0=Control.from_array(ubar[0]),
        ubar=ubar,
        per_iteration_energy=energies,
        wall_time=time.perf_counter() - start,
    )


def _boltzmann_weights(costs: np.ndarray, lam: float) -> np.ndarray:
    """Normalized exp(-(cost - min finite cost) / lam); non-finite costs get weight 0."""
    finite = np.isfinite(costs)
    if not np.any(finite):
        raise DegenerateWeightsError("every sampled rollout had non-finite cost")
    shifted = np.where(finite, costs - costs[finite].min(), np.inf)
    w = np.where(finite, np.exp(-shifted / lam), 0.0)
    total = w.sum()
    if not total > 0:
        raise DegenerateWeightsError("Boltzmann weights summed to zero")
    return w / total


def non_ising_linear_mppi_step(
    x0: State,
    xref_window: np.ndarray,
    cfg: LinearMppiConfig,
    seed: int,
    ubar_init: np.ndarray | None = None,
) -> ControlStepResult:
    """One Gaussian-MPPI step on the condensed quadratic cost.

    Identical pipeline to the Ising step up to the cost over continuous
    deviations du, which is then explored with S Gaussian perturbations and
    updated with their Boltzmann-weighted mean.  per_iteration_energy records
    the quadratic cost of each iteration's chosen update.
    """
    window = _check_window(xref_window, cfg.horizon)
    start = time.perf_counter()
    stream = SeedStream(mask64(seed))
    params = ModelParams(wheelbase=cfg.wheelbase)
    sigma_stack = np.tile(np.asarray(cfg.noise_sigma), cfg.horizon)
    ubar = np.zeros((cfg.horizon, CONTROL_DIM)) if ubar_init is None else ubar_init.copy()
    energies = np.empty(cfg.iterations)
    for it in range(cfg.iterations):
        steps = linearize_along(x0, ubar, cfg.dt, params)
        hm = qubo.build_horizon(steps, cfg.dt)
        cost = qubo.assemble_linear_cost(hm, cfg.weights, x0.as_array(), ubar.ravel(), window.ravel())
        gauss = np.random.default_rng(stream.next_u64())
        eps = gauss.standard_normal((cfg.samples, cfg.horizon * CONTROL_DIM)) * sigma_stack
        weights = _boltzmann_weights(cost.value(eps), cfg.lam)
        update = weights @ eps
        energies[it] = cost.value(update)
        ubar = ubar + update.reshape(cfg.horizon, CONTROL_DIM)
    return ControlStepResult(
        u0=Control.from_array(ubar[0]),
        ubar=ubar,
        per_iteration_energy=energies,
        wall_time=time.perf_counter() - start,
    )


def _wrap_angle(x: np.ndarray) -> np.ndarray:
    return (x + np.pi) % (2.0 * np.pi) - np.pi


def _rollout_costs(states: np.ndarray, controls: np.ndarray, window: np.ndarray,
                   w: CostWeights) -> np.ndarray:
    """Stage cost per rollout: sum_n (x_n - ref_n)' Q (x_n - ref_n) + u_n' R u_n.

    The heading component of the error is wrapped before squaring; non-finite
    rollouts come out as +inf.
    """
    err = states - window[None, :, :]
    err[:, :, 2] = _wrap_angle(err[:, :, 2])
    q_diag = np.diag(w.Q)
    r_diag = np.diag(w.R)
    costs = np.einsum("knj,j->k", err * err, q_diag) + np.einsum("knj,j->k", controls * controls, r_diag)
    return np.where(np.isfinite(costs), costs, np.inf)


def reference_mppi_step(
    x0: State,
    xref_window: np.ndarray,
    cfg: ReferenceMppiConfig,
    seed: int,
    ubar_init: np.ndarray | None = None,
) -> ControlStepResult:
    """One Gaussian-MPPI step against the nonlinear model itself.

    per_iteration_energy records the Boltzmann-weighted mean rollout cost.
    """
    window = _check_window(xref_window, cfg.horizon)
    start = time.perf_counter()
    stream = SeedStream(mask64(seed))
    sigma = np.asarray(cfg.noise_sigma)
    x0_arr = x0.as_array()
    ubar = np.zeros((cfg.horizon, CONTROL_DIM)) if ubar_init is None else ubar_init.copy()
    energies = np.empty(cfg.iterations)
    for it in range(cfg.iterations):
        gauss = np.random.default_rng(stream.next_u64())
        eps = gauss.standard_normal((cfg.samples, cfg.horizon, CONTROL_DIM)) * sigma
        controls = ubar[None, :, :] + eps
        states = rollout_batch(x0_arr, controls, cfg.dt, cfg.wheelbase)
        costs = _rollout_costs(states, controls, window, cfg.weights)
        weights = _boltzmann_weights(costs, cfg.lam)
        finite = np.isfinite(costs)
        energies[it] = float(weights[finite] @ costs[finite])
        ubar = ubar + np.einsum("k,knj->nj", weights, eps)
    return ControlStepResult(
        u0=Control.from_array(ubar[0]),
        ubar=ubar,
        per_iteration_energy=energies,
        wall_time=time.perf_counter() - start,
    )


StepFn = Callable[..., ControlStepResult]


def tracking_mse(realized: np.ndarray, reference: np.ndarray) -> float:
    """Mean squared position error over executed steps.

    realized[k] (the state after k control steps) is matched with
    reference[k]; index 0 is the shared start point and is excluded.
    """
    T = realized.shape[0] - 1
    if T < 1:
        raise ValueError("need at least one executed step")
    diff = realized[1:T + 1, 0:2] - reference[1:T + 1, 0:2]
    return float(np.mean(np.sum(diff * diff, axis=1)))


def _shift_ubar(ubar: np.ndarray) -> np.ndarray:
    shifted = np.roll(ubar, -1, axis=0)
    shifted[-1] = ubar[-1]
    return shifted


def run_closed_loop(
    scenario: ReferenceTrajectory,
    step_fn: StepFn,
    cfg,
    seed: int,
) -> TrialResult:
    """Drive the vehicle along a scenario with one controller; see tracking_mse.

    At step t the window is reference states t+1 .. t+N (the states the next
    N controls should reach), so a scenario of n states executes n - N steps
    and stops once fewer than N reference states remain ahead of the vehicle.
    Divergence (leaving the model domain, or a fully degenerate sample batch)
    ends the trial with mse = +inf rather than raising.
    """
    refs = scenario.states
    N = cfg.horizon
    T = refs.shape[0] - N
    if T < 1:
        raise ValueError(f"scenario too short: {refs.shape[0]} states for horizon {N}")
    stream = SeedStream(mask64(seed))
    x = scenario.initial_state
    realized = [x.as_array()]
    per_step: list[ControlStepResult] = []
    ubar_prev: np.ndarray | None = None
    diverged = False
    for t in range(T):
        window = refs[t + 1:t + 1 + N]
        step_seed = stream.next_u64()
        try:
            init = _shift_ubar(ubar_prev) if (cfg.warm_start and ubar_prev is not None) else None
            res = step_fn(x, window, cfg, step_seed, ubar_init=init)
            x = step_nonlinear(x, res.u0, cfg.dt, ModelParams(wheelbase=cfg.wheelbase))
        except (DomainError, DegenerateWeightsError):
            diverged = True
            break
        per_step.append(res)
        realized.append(x.as_array())
        ubar_prev = res.ubar
    realized_arr = np.asarray(realized)
    mse = float("inf") if diverged else tracking_mse(realized_arr, refs)
    return TrialResult(
        realized=realized_arr,
        reference=refs,
        mse=mse,
        per_step=tuple(per_step),
        diverged=diverged,
    )
