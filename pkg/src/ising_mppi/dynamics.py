"""Kinematic bicycle model with steering dynamics.

State x = [px, py, theta, v, delta], control u = [accel, steer_rate]:

    px'    = v cos(theta)
    py'    = v sin(theta)
    theta' = (v / wheelbase) * tan(delta)
    v'     = accel
    delta' = steer_rate

The model is linearized on demand around a nominal rollout; the per-step
Jacobians and affine residuals feed the horizon condensation in qubo.py.
Integration is explicit Euler everywhere so the condensed prediction and the
stepped simulation agree exactly for linear systems.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

STATE_DIM = 5
CONTROL_DIM = 2


class DomainError(ValueError):
    """Raised when a state leaves the model's valid domain.

    Covers the tan singularity (|delta| >= pi/2) and non-finite states; the
    closed-loop runner treats it as trial divergence.
    """


@dataclass(frozen=True)
class State:
    """Vehicle pose. theta is stored unwrapped (no modular reduction)."""

    px: float
    py: float
    theta: float
    v: float
    delta: float

    def __post_init__(self):
        if not all(math.isfinite(f) for f in (self.px, self.py, self.theta, self.v, self.delta)):
            raise DomainError(f"non-finite state: {self}")

    def as_array(self) -> np.ndarray:
        return np.array([self.px, self.py, self.theta, self.v, self.delta])

    @classmethod
    def from_array(cls, arr) -> "State":
        px, py, theta, v, delta = (float(x) for x in arr)
        return cls(px, py, theta, v, delta)


@dataclass(frozen=True)
class Control:
    accel: float
    steer_rate: float

    def __post_init__(self):
        if not (math.isfinite(self.accel) and math.isfinite(self.steer_rate)):
            raise DomainError(f"non-finite control: {self}")

    def as_array(self) -> np.ndarray:
        return np.array([self.accel, self.steer_rate])

    @classmethod
    def from_array(cls, arr) -> "Control":
        a, w = (float(x) for x in arr)
        return cls(a, w)


@dataclass(frozen=True)
class ModelParams:
    wheelbase: float = 1.0

    def __post_init__(self):
        if not (self.wheelbase > 0):
            raise ValueError(f"wheelbase must be positive, got {self.wheelbase}")


@dataclass(frozen=True)
class LinearizedStep:
    """One step of a linearization: f(x, u) ~= A (x - x_nom) + B (u - u_nom) + f(x_nom, u_nom).

    residual = f(x_nom, u_nom) - A x_nom - B u_nom, so the affine model is
    exactly A x + B u + residual.
    """

    A: np.ndarray          # (5, 5)
    B: np.ndarray          # (5, 2)
    residual: np.ndarray   # (5,)
    x_nom: np.ndarray      # (5,)
    u_nom: np.ndarray      # (2,)


def _check_delta(delta: float) -> None:
    if not math.isfinite(delta) or abs(delta) >= math.pi / 2:
        raise DomainError(f"steering angle {delta!r} outside (-pi/2, pi/2)")


def _derivative_array(x: np.ndarray, u: np.ndarray, wheelbase: float) -> np.ndarray:
    theta, v, delta = x[2], x[3], x[4]
    return np.array([
        v * math.cos(theta),
        v * math.sin(theta),
        v * math.tan(delta) / wheelbase,
        u[0],
        u[1],
    ])


def derivative(x: State, u: Control, params: ModelParams = ModelParams()) -> np.ndarray:
    """Continuous-time state derivative; raises DomainError at |delta| >= pi/2."""
    _check_delta(x.delta)
    return _derivative_array(x.as_array(), u.as_array(), params.wheelbase)


def jacobians(x: State, u: Control, params: ModelParams = ModelParams()) -> tuple[np.ndarray, np.ndarray]:
    """Analytic Jacobians (A, B) = (df/dx, df/du) at (x, u)."""
    _check_delta(x.delta)
    return _jacobians_array(x.as_array(), params.wheelbase)


def _jacobians_array(x: np.ndarray, wheelbase: float) -> tuple[np.ndarray, np.ndarray]:
    theta, v, delta = x[2], x[3], x[4]
    sin_t, cos_t = math.sin(theta), math.cos(theta)
    cos_d = math.cos(delta)
    A = np.zeros((STATE_DIM, STATE_DIM))
    A[0, 2] = -v * sin_t
    A[0, 3] = cos_t
    A[1, 2] = v * cos_t
    A[1, 3] = sin_t
    A[2, 3] = math.tan(delta) / wheelbase
    A[2, 4] = v / (wheelbase * cos_d * cos_d)
    B = np.zeros((STATE_DIM, CONTROL_DIM))
    B[3, 0] = 1.0
    B[4, 1] = 1.0
    return A, B


def step_nonlinear(x: State, u: Control, dt: float, params: ModelParams = ModelParams()) -> State:
    """One explicit-Euler step x + dt * f(x, u)."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    deriv = derivative(x, u, params)
    return State.from_array(x.as_array() + dt * deriv)


def step_linearized(step: LinearizedStep, x: np.ndarray, u: np.ndarray, dt: float) -> np.ndarray:
    """Euler step of the affine model: (I + A dt) x + B dt u + residual dt."""
    return x + dt * (step.A @ x + step.B @ u + step.residual)


def linearize_along(
    x0: State,
    controls: np.ndarray,
    dt: float,
    params: ModelParams = ModelParams(),
) -> list[LinearizedStep]:
    """Linearize along the nonlinear rollout of `controls` (shape (N, 2)) from x0.

    The nominal states come from the nonlinear model itself, so at each
    (x_nom, u_nom) the affine model reproduces the rollout exactly.
    """
    controls = np.asarray(controls, dtype=float)
    if controls.ndim != 2 or controls.shape[1] != CONTROL_DIM:
        raise ValueError(f"controls must have shape (N, {CONTROL_DIM}), got {controls.shape}")
    if controls.shape[0] < 1:
        raise ValueError("horizon must be at least 1")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")

    x = x0.as_array()
    steps = []
    for u in controls:
        if not np.all(np.isfinite(x)):
            raise DomainError("nominal rollout diverged to a non-finite state")
        _check_delta(float(x[4]))
        f = _derivative_array(x, u, params.wheelbase)
        A, B = _jacobians_array(x, params.wheelbase)
        residual = f - A @ x - B @ u
        steps.append(LinearizedStep(A=A, B=B, residual=residual, x_nom=x.copy(), u_nom=u.copy()))
        x = x + dt * f
    return steps


def rollout_batch(x0: np.ndarray, controls: np.ndarray, dt: float, wheelbase: float = 1.0) -> np.ndarray:
    """Euler-roll a batch of control sequences, vectorized over samples.

    controls has shape (K, N, 2); returns the visited states (K, N, 5),
    i.e. the state after each of the N steps.  No steering guard: sampled
    rollouts that wander past |delta| = pi/2 just pick up garbage headings
    and huge costs, which the Boltzmann weighting suppresses.
    """
    K, N, _ = controls.shape
    out = np.empty((K, N, STATE_DIM))
    x = np.broadcast_to(x0, (K, STATE_DIM)).copy()
    with np.errstate(all="ignore"):
        for n in range(N):
            theta, v, delta = x[:, 2], x[:, 3], x[:, 4]
            dx = np.empty_like(x)
            dx[:, 0] = v * np.cos(theta)
            dx[:, 1] = v * np.sin(theta)
            dx[:, 2] = v * np.tan(delta) / wheelbase
            dx[:, 3] = controls[:, n, 0]
            dx[:, 4] = controls[:, n, 1]
            x = x + dt * dx
            out[:, n, :] = x
    return out
