"""Gibbs sampling over binary quadratic energies, plus exact small-instance oracles.

The sampler emulates a probabilistic-bit annealer in software: each bit is
resampled from its logistic conditional p(a_i = 1 | rest) = sigma(-f_i / lam)
where f_i = h_i + 2 sum_j J_ij a_j is the local field, and the state after
each full sweep counts as one sample.  All randomness flows through the
SplitMix64 stream in rng.py, so a (problem, config) pair fully determines
the output.

The hot loop is compiled with numba; the uncompiled local_field /
conditional_prob functions are the readable reference the kernel is tested
against, and exact_boltzmann / brute_force_min enumerate small instances
exhaustively for use as oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TextIO

import numpy as np
from numba import njit
from scipy.special import logsumexp

from .qubo import QuboProblem, energy_batch
from .rng import mask64

_ENUM_LIMIT = 20          # largest d we'll enumerate exhaustively (2^20 states)
_EXP_CLAMP = 700.0        # |argument| beyond which the logistic saturates

_U64_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_U64_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_U64_MIX2 = np.uint64(0x94D049BB133111EB)

INIT_MODES = ("uniform", "zeros")
SCAN_MODES = ("cyclic", "random")


@dataclass(frozen=True)
class GibbsConfig:
    """Knobs for one sampling run.

    sweeps is S, the number of recorded full sweeps; lam the sampling
    temperature; init chooses the starting state ("uniform" bits or "zeros");
    scan the update schedule ("cyclic" is the deterministic 0..d-1 order,
    "random" picks a bit per update).  burn_in sweeps run first and are
    discarded.  record_states keeps the (S, d) sweep states on the result
    for diagnostics.
    """

    sweeps: int
    lam: float
    seed: int
    init: str = "uniform"
    scan: str = "cyclic"
    burn_in: int = 0
    record_states: bool = False

    def __post_init__(self):
        if self.sweeps < 1:
            raise ValueError(f"sweeps must be >= 1, got {self.sweeps}")
        if not self.lam > 0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        if self.burn_in < 0:
            raise ValueError(f"burn_in must be >= 0, got {self.burn_in}")
        if self.init not in INIT_MODES:
            raise ValueError(f"init must be one of {INIT_MODES}, got {self.init!r}")
        if self.scan not in SCAN_MODES:
            raise ValueError(f"scan must be one of {SCAN_MODES}, got {self.scan!r}")


@dataclass(frozen=True)
class SampleResult:
    bit_means: np.ndarray                # (d,) in [0, 1]
    rounded: np.ndarray                  # (d,) int8, 1 where bit_means > 0.5
    final_state: np.ndarray              # (d,) int8
    energy_trace: np.ndarray             # (S,) H after each recorded sweep
    states: np.ndarray | None = None     # (S, d) int8 when recorded


def local_field(q: QuboProblem, a: np.ndarray, i: int) -> float:
    """f_i = h_i + 2 sum_{j != i} J_ij a_j (zero diagonal makes the sum unrestricted)."""
    if not 0 <= i < q.d:
        raise IndexError(f"bit index {i} out of range for d={q.d}")
    a = np.asarray(a, dtype=float)
    return float(q.h[i] + 2.0 * (q.J[i] @ a))


def conditional_prob(q: QuboProblem, a: np.ndarray, i: int, lam: float) -> float:
    """p(a_i = 1 | rest) = logistic(-f_i / lam), saturating past |z| = 700."""
    z = -local_field(q, a, i) / lam
    if z >= _EXP_CLAMP:
        return 1.0
    if z <= -_EXP_CLAMP:
        return 0.0
    return 1.0 / (1.0 + math.exp(-z))


def round_mean(bit_means: np.ndarray) -> np.ndarray:
    """Threshold bit means at strictly 0.5 (a mean of exactly 0.5 rounds to 0)."""
    bit_means = np.asarray(bit_means, dtype=float)
    if np.any(bit_means < 0.0) or np.any(bit_means > 1.0):
        raise ValueError("bit means must lie in [0, 1]")
    return (bit_means > 0.5).astype(np.int8)


@njit(cache=True)
def _sm_next(state):
    """One SplitMix64 step on a uint64 state; returns (next_state, output word)."""
    state = state + _U64_GAMMA
    z = state
    z = (z ^ (z >> np.uint64(30))) * _U64_MIX1
    z = (z ^ (z >> np.uint64(27))) * _U64_MIX2
    z = z ^ (z >> np.uint64(31))
    return state, z


@njit(cache=True)
def _gibbs_kernel(J, h, sweeps, burn_in, lam, seed, init_uniform, random_scan):
    d = h.shape[0]
    state = seed
    a = np.zeros(d)
    if init_uniform:
        for i in range(d):
            state, z = _sm_next(state)
            u = np.float64(z >> np.uint64(11)) * 1.1102230246251565e-16
            if u < 0.5:
                a[i] = 1.0

    # Local fields, maintained incrementally across single-bit flips.
    f = h + 2.0 * (J @ a)

    d_u64 = np.uint64(d)
    states = np.empty((sweeps, d), np.int8)
    trace = np.empty(sweeps)
    for sweep in range(burn_in + sweeps):
        for step in range(d):
            if random_scan:
                state, z = _sm_next(state)
                i = np.int64(z % d_u64)
            else:
                i = np.int64(step)
            arg = -f[i] / lam
            if arg >= _EXP_CLAMP:
                p1 = 1.0
            elif arg <= -_EXP_CLAMP:
                p1 = 0.0
            else:
                p1 = 1.0 / (1.0 + math.exp(-arg))
            state, z = _sm_next(state)
            u = np.float64(z >> np.uint64(11)) * 1.1102230246251565e-16
            new = 1.0 if u < p1 else 0.0
            if new != a[i]:
                delta = 2.0 * (new - a[i])
                a[i] = new
                for j in range(d):
                    f[j] += delta * J[j, i]
        k = sweep - burn_in
        if k >= 0:
            for j in range(d):
                states[k, j] = np.int8(a[j])
            # a.(f + h) double-counts the coupling term exactly once:
            # a.f = a.h + 2 a'Ja, so H = a'Ja + a.h = (a.f + a.h) / 2.
            acc = 0.0
            for j in range(d):
                acc += a[j] * (f[j] + h[j])
            trace[k] = 0.5 * acc
    return states, trace


def _require_symmetrized(q: QuboProblem) -> None:
    if not np.array_equal(q.J, q.J.T) or np.any(np.diag(q.J) != 0.0):
        raise ValueError("sampling requires a symmetrized problem (J = J', zero diagonal)")


def gibbs_sample(q: QuboProblem, cfg: GibbsConfig) -> SampleResult:
    """Run burn_in + sweeps full Gibbs sweeps and average the recorded states.

    Deterministic in (q, cfg): the same problem and config always return the
    same result, on any platform.
    """
    _require_symmetrized(q)
    states, trace = _gibbs_kernel(
        np.ascontiguousarray(q.J),
        np.ascontiguousarray(q.h),
        cfg.sweeps,
        cfg.burn_in,
        cfg.lam,
        np.uint64(mask64(cfg.seed)),
        cfg.init == "uniform",
        cfg.scan == "random",
    )
    bit_means = states.mean(axis=0)
    return SampleResult(
        bit_means=bit_means,
        rounded=round_mean(bit_means),
        final_state=states[-1].copy(),
        energy_trace=trace,
        states=states if cfg.record_states else None,
    )


def _check_enumerable(d: int) -> None:
    if d > _ENUM_LIMIT:
        raise ValueError(f"exhaustive enumeration capped at d={_ENUM_LIMIT}, got d={d}")


def state_codes(states: np.ndarray) -> np.ndarray:
    """Encode binary rows as integers, bit i of the code = component i (LSB at index 0)."""
    states = np.asarray(states)
    d = states.shape[-1]
    weights = (1 << np.arange(d)).astype(np.int64)
    return states.astype(np.int64) @ weights

def code_to_state(code: int, d: int) -> np.ndarray:
    return ((code >> np.arange(d)) & 1).astype(np.int8)


def all_energies(q: QuboProblem) -> np.ndarray:
    """H over all 2^d states, indexed by state code; chunked to bound memory."""
    _check_enumerable(q.d)
    n = 1 << q.d
    out = np.empty(n)
    chunk = 1 << 14
    for start in range(0, n, chunk):
        codes = np.arange(start, min(start + chunk, n), dtype=np.int64)
        bits = ((codes[:, None] >> np.arange(q.d)) & 1).astype(float)
        out[start:start + len(codes)] = energy_batch(q, bits)
    return out


def exact_boltzmann(q: QuboProblem, lam: float) -> np.ndarray:
    """Exact Boltzmann table p(a) = exp(-H(a)/lam)/Z over all 2^d state codes."""
    if not lam > 0:
        raise ValueError(f"lam must be positive, got {lam}")
    logw = -all_energies(q) / lam
    return np.exp(logw - logsumexp(logw))


def brute_force_min(q: QuboProblem) -> tuple[np.ndarray, float]:
    """Exhaustive global minimizer; ties go to the lowest state code."""
    energies = all_energies(q)
    best = int(np.argmin(energies))
    return code_to_state(best, q.d), float(energies[best])


def write_energy_trace(result: SampleResult, fh: TextIO) -> None:
    """Dump the per-sweep energy trace as `sweep,energy` CSV."""
    fh.write("sweep,energy\n")
    for s, e in enumerate(result.energy_trace):
        fh.write(f"{s},{float(e)!r}\n")
