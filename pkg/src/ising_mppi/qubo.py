"""Horizon condensation and QUBO assembly.

Starting from per-step affine models x_{k+1} = (I + A_k dt) x_k + B_k dt u_k
+ residual_k dt, the whole horizon is condensed into stacked closed forms

    x_stack = Ablk x0 + Bblk u_stack + cvec,

a quadratic tracking cost over the stacked states is folded through a binary
expansion u_stack = ubar + Eblk a, and the result is a binary quadratic
energy H(a) = a' J a + h' a over a in {0,1}^d.  The same machinery minus the
expansion yields the continuous quadratic used by the Gaussian baseline.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence, TextIO

import numpy as np

from .dynamics import CONTROL_DIM, STATE_DIM, LinearizedStep


@dataclass(frozen=True)
class HorizonMatrices:
    """Stacked prediction x_stack = Ablk x0 + Bblk u_stack + cvec.

    Row block j-1 (j = 1..N) predicts x_j; Bblk is block-lower-triangular in
    s-by-m blocks (controls cannot affect earlier states).
    """

    Ablk: np.ndarray   # (N*s, s)
    Bblk: np.ndarray   # (N*s, N*m)
    cvec: np.ndarray   # (N*s,)
    N: int
    s: int
    m: int


@dataclass(frozen=True)
class ExpansionMatrix:
    """Binary expansion u_stack = Eblk @ a, block-diagonal per (timestep, input).

    Each input at each timestep owns L consecutive bits, least significant
    first; the last (most significant) bit carries weight -K so the encoded
    range is the uniform grid {-K, ..., K - K/2^(L-1)} with spacing K/2^(L-1).
    """

    Eblk: np.ndarray             # (N*m, N*L*m)
    bits_per_input: int
    magnitudes: np.ndarray       # (m,)

    @property
    def d(self) -> int:
        return self.Eblk.shape[1]


@dataclass(frozen=True)
class CostWeights:
    """Diagonal tracking cost: state penalty Q (PSD) and control penalty R (PD)."""

    Q: np.ndarray   # (s, s) diagonal
    R: np.ndarray   # (m, m) diagonal

    def __post_init__(self):
        for name, mat in (("Q", self.Q), ("R", self.R)):
            if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
                raise ValueError(f"{name} must be square, got shape {mat.shape}")
            if np.any(mat != np.diag(np.diag(mat))):
                raise ValueError(f"{name} must be diagonal")
        if np.any(np.diag(self.Q) < 0):
            raise ValueError("Q must be positive semidefinite")
        if np.any(np.diag(self.R) <= 0):
            raise ValueError("R must be positive definite")

    @classmethod
    def from_diagonals(cls, q_diag: Sequence[float], r_diag: Sequence[float]) -> "CostWeights":
        return cls(Q=np.diag(np.asarray(q_diag, dtype=float)),
                   R=np.diag(np.asarray(r_diag, dtype=float)))

    def q_stack(self, N: int) -> np.ndarray:
        return np.kron(np.eye(N), self.Q)

    def r_stack(self, N: int) -> np.ndarray:
        return np.kron(np.eye(N), self.R)


@dataclass(frozen=True)
class QuboProblem:
    """Binary quadratic energy H(a) = a' J a + h' a with a sampling temperature hint."""

    J: np.ndarray         # (d, d)
    h: np.ndarray         # (d,)
    lambda_hint: float
    d: int

    def __post_init__(self):
        if self.J.shape != (self.d, self.d) or self.h.shape != (self.d,):
            raise ValueError(
                f"inconsistent shapes: J {self.J.shape}, h {self.h.shape}, d={self.d}")
        if not (np.all(np.isfinite(self.J)) and np.all(np.isfinite(self.h))):
            raise ValueError("QUBO coefficients must be finite")
        if not self.lambda_hint > 0:
            raise ValueError(f"lambda_hint must be positive, got {self.lambda_hint}")


class QuadraticCost(NamedTuple):
    """Continuous quadratic H(du) = du' J du + h' du over stacked control deviations."""

    J: np.ndarray   # (Nm, Nm)
    h: np.ndarray   # (Nm,)

    def value(self, du: np.ndarray) -> np.ndarray:
        """Evaluate H for one deviation (Nm,) or a batch (K, Nm)."""
        du = np.asarray(du, dtype=float)
        if du.ndim == 1:
            return float(du @ self.J @ du + self.h @ du)
        return np.einsum("ki,ij,kj->k", du, self.J, du) + du @ self.h


def phi(i: int, j: int, steps: Sequence[LinearizedStep], dt: float) -> np.ndarray:
    """State transition of the affine model from step i to step j.

    Returns the product of (I + A_k dt) for k = i..j-1 with later factors on
    the left (forward-time composition); identity when i == j.
    """
    if not 0 <= i <= j <= len(steps):
        raise IndexError(f"need 0 <= i <= j <= {len(steps)}, got i={i}, j={j}")
    s = STATE_DIM
    out = np.eye(s)
    for k in range(i, j):
        out = (np.eye(s) + dt * steps[k].A) @ out
    return out


def build_horizon(steps: Sequence[LinearizedStep], dt: float) -> HorizonMatrices:
    """Condense per-step affine models into the stacked prediction matrices.

    Built by iterating the one-step map blockwise: row block j is the
    previous row pushed through (I + A_j dt) plus that step's own B and
    residual contributions, which keeps the result consistent with the
    step-by-step recursion by construction.
    """
    N = len(steps)
    if N < 1:
        raise ValueError("horizon must contain at least one step")
    s, m = STATE_DIM, CONTROL_DIM
    Ablk = np.zeros((N * s, s))
    Bblk = np.zeros((N * s, N * m))
    cvec = np.zeros(N * s)

    prev_A = np.eye(s)
    prev_B = np.zeros((s, N * m))
    prev_c = np.zeros(s)
    for j, step in enumerate(steps):
        F = np.eye(s) + dt * step.A
        row_A = F @ prev_A
        row_B = F @ prev_B
        row_B[:, j * m:(j + 1) * m] = dt * step.B
        row_c = F @ prev_c + dt * step.residual
        Ablk[j * s:(j + 1) * s] = row_A
        Bblk[j * s:(j + 1) * s] = row_B
        cvec[j * s:(j + 1) * s] = row_c
        prev_A, prev_B, prev_c = row_A, row_B, row_c
    return HorizonMatrices(Ablk=Ablk, Bblk=Bblk, cvec=cvec, N=N, s=s, m=m)


def expansion_row(n_bits: int, magnitude: float) -> np.ndarray:
    """Bit weights for one input: K 2^(i-1) / 2^(L-1) for i = 1..L-1, then -K."""
    if n_bits < 1:
        raise ValueError("need at least one bit per input")
    if not magnitude > 0:
        raise ValueError(f"bit magnitude must be positive, got {magnitude}")
    row = np.array([magnitude * 2.0 ** (i - 1) / 2.0 ** (n_bits - 1) for i in range(1, n_bits + 1)])
    row[-1] = -magnitude
    return row


def build_expansion(n_bits: int, magnitudes: Sequence[float], horizon: int) -> ExpansionMatrix:
    """Assemble the block-diagonal expansion for `horizon` steps of len(magnitudes) inputs.

    Bit order within a: timestep-major, then input-major, then bit index
    (LSB first, signed MSB last).
    """
    mags = np.asarray(magnitudes, dtype=float)
    m = mags.shape[0]
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    per_step = np.zeros((m, n_bits * m))
    for k in range(m):
        per_step[k, k * n_bits:(k + 1) * n_bits] = expansion_row(n_bits, float(mags[k]))
    Eblk = np.kron(np.eye(horizon), per_step)
    return ExpansionMatrix(Eblk=Eblk, bits_per_input=n_bits, magnitudes=mags)


def _bias_terms(hm: HorizonMatrices, w: CostWeights, x0, ubar, xref):
    """Shared pieces of both cost assemblies: (B'QB + R, 2 Q-weighted tracking error through B)."""
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    ubar = np.asarray(ubar, dtype=float).reshape(-1)
    xref = np.asarray(xref, dtype=float).reshape(-1)
    if x0.shape != (hm.s,):
        raise ValueError(f"x0 must have length {hm.s}, got {x0.shape}")
    if ubar.shape != (hm.N * hm.m,):
        raise ValueError(f"ubar must have length {hm.N * hm.m}, got {ubar.shape}")
    if xref.shape != (hm.N * hm.s,):
        raise ValueError(f"xref must have length {hm.N * hm.s}, got {xref.shape}")
    Qblk = w.q_stack(hm.N)
    Rblk = w.r_stack(hm.N)
    J_u = hm.Bblk.T @ Qblk @ hm.Bblk + Rblk
    base = hm.Ablk @ x0 + hm.Bblk @ ubar + hm.cvec
    h_u = 2.0 * (hm.Bblk.T @ (Qblk @ (base - xref)))
    return J_u, h_u


def assemble_linear_cost(hm: HorizonMatrices, w: CostWeights, x0, ubar, xref) -> QuadraticCost:
    """Quadratic tracking cost over continuous control deviations du.

    H(du) = du' (B'QB + R) du + 2 (A x0 + B ubar + c - xref)' Q B du; the
    du-independent constant is dropped.  R regularizes the deviation itself,
    not the full control, so H(0) = 0 at the nominal sequence.
    """
    J_u, h_u = _bias_terms(hm, w, x0, ubar, xref)
    return QuadraticCost(J=J_u, h=h_u)


def assemble_qubo(
    hm: HorizonMatrices,
    ex: ExpansionMatrix,
    w: CostWeights,
    x0,
    ubar,
    xref,
    lambda_hint: float = 1.0,
) -> QuboProblem:
    """Fold the continuous cost through the binary expansion: J = E'(B'QB+R)E.

    Returns the raw (generally nonzero-diagonal) problem; pass through
    symmetrize() before sampling.
    """
    if ex.Eblk.shape[0] != hm.N * hm.m:
        raise ValueError(
            f"expansion rows {ex.Eblk.shape[0]} != stacked control size {hm.N * hm.m}")
    J_u, h_u = _bias_terms(hm, w, x0, ubar, xref)
    J = ex.Eblk.T @ J_u @ ex.Eblk
    h = ex.Eblk.T @ h_u
    return QuboProblem(J=J, h=h, lambda_hint=lambda_hint, d=ex.d)


def symmetrize(q: QuboProblem) -> QuboProblem:
    """Canonical form: symmetrize J, absorb its diagonal into h, zero the diagonal.

    Energy-preserving for binary a because a_i^2 = a_i.
    """
    J = 0.5 * (q.J + q.J.T)
    h = q.h + np.diag(J)
    J = J - np.diag(np.diag(J))
    return QuboProblem(J=J, h=h, lambda_hint=q.lambda_hint, d=q.d)


def energy(q: QuboProblem, a: np.ndarray) -> float:
    """H(a) = a' J a + h' a for one binary vector."""
    a = np.asarray(a, dtype=float).reshape(-1)
    if a.shape != (q.d,):
        raise ValueError(f"a must have length {q.d}, got {a.shape}")
    if not np.all((a == 0.0) | (a == 1.0)):
        raise ValueError("a must be a 0/1 vector")
    return float(a @ q.J @ a + q.h @ a)


def energy_batch(q: QuboProblem, A: np.ndarray) -> np.ndarray:
    """H(a) row-wise for a (K, d) batch of binary vectors (no domain checks)."""
    A = np.asarray(A, dtype=float)
    return np.einsum("ki,ij,kj->k", A, q.J, A) + A @ q.h


class LoadedInstance(NamedTuple):
    problem: QuboProblem
    horizon: int
    bits: int
    inputs: int


def write_instance(q: QuboProblem, fh: TextIO, horizon: int, bits: int, inputs: int) -> None:
    """Write the plain-text instance format.

    Line 1 is `d N L m lambda`; then d lines `i h_i`; then one line
    `i j J_ij` per strictly-upper-triangular nonzero of the symmetrized J.
    Floats are written with repr so a round trip is bit-exact.
    """
    fh.write(f"{q.d} {horizon} {bits} {inputs} {float(q.lambda_hint)!r}\n")
    for i in range(q.d):
        fh.write(f"{i} {float(q.h[i])!r}\n")
    for i in range(q.d):
        row = q.J[i]
        for j in range(i + 1, q.d):
            if row[j] != 0.0:
                fh.write(f"{i} {j} {float(row[j])!r}\n")


def read_instance(fh: TextIO) -> LoadedInstance:
    """Parse the format written by write_instance; J comes back symmetric."""
    header = fh.readline().split()
    if len(header) != 5:
        raise ValueError(f"malformed instance header: {header}")
    d, horizon, bits, inputs = (int(t) for t in header[:4])
    lam = float(header[4])
    h = np.zeros(d)
    J = np.zeros((d, d))
    for _ in range(d):
        idx, val = fh.readline().split()
        h[int(idx)] = float(val)
    for line in fh:
        line = line.strip()
        if not line:
            continue
        i_s, j_s, val = line.split()
        i, j = int(i_s), int(j_s)
        J[i, j] = J[j, i] = float(val)
    problem = QuboProblem(J=J, h=h, lambda_hint=lam, d=d)
    return LoadedInstance(problem=problem, horizon=horizon, bits=bits, inputs=inputs)
