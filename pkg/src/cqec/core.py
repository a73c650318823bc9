"""State and syndrome algebra for the three-qubit bit-flip code.

Error states are labelled by the integer 0..7 whose binary expansion
(most-significant bit = qubit 1) records which qubits have suffered a net
flip relative to |000>, e.g. 5 <-> |101>.  The two stabilizer syndromes
S1 = Z1 Z2 and S2 = Z2 Z3 are pure functions of that label.

Also provides the Markov error models shared by every module: the
bit-flip rate matrix Q, the amplitude-damping rate matrix Q', their
finite-step transition matrices J = exp(Q dt), and the deterministic
per-trajectory randomness contract (`RngStream`).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

N_STATES = 8

# XOR mask that flips qubit q (qubit 1 is the most significant bit).
QUBIT_MASKS = (4, 2, 1)

_UINT64_MASK = 0xFFFF_FFFF_FFFF_FFFF


def state_bits(state):
    """Return (b1, b2, b3) net-flip indicator bits of a state label."""
    s = np.asarray(state)
    return (s >> 2) & 1, (s >> 1) & 1, s & 1


def syndromes_of(state):
    """Syndrome eigenvalue pair (S1, S2) of the subspace holding `state`.

    S1 = (-1)^(b1 xor b2), S2 = (-1)^(b2 xor b3).  Accepts scalars or
    integer arrays and broadcasts.
    """
    b1, b2, b3 = state_bits(state)
    s1 = 1 - 2 * (b1 ^ b2)
    s2 = 1 - 2 * (b2 ^ b3)
    return s1, s2


# Precomputed (8, 2) table of syndrome pairs, float valued for signal means.
SYNDROME_TABLE = np.stack(syndromes_of(np.arange(N_STATES)), axis=1).astype(float)

# Population of the "excited" region: states within Hamming distance 1 of
# |111>, i.e. recoverable to |111> by majority vote.
EXCITED_STATES = (7, 6, 5, 3)


def apply_flip(state, qubit: int):
    """Toggle one qubit's net-flip bit.  Involution: applying twice is id."""
    if qubit not in (1, 2, 3):
        raise ValueError(f"qubit must be 1, 2 or 3, got {qubit}")
    return state ^ QUBIT_MASKS[qubit - 1]


def flip_mask(qubits) -> int:
    """XOR mask combining a collection of qubit flips (1, 2 and/or 3)."""
    mask = 0
    for q in qubits:
        mask ^= QUBIT_MASKS[q - 1]
    return mask


def mask_qubits(mask: int) -> tuple[int, ...]:
    """Inverse of `flip_mask`: the sorted qubits a mask flips."""
    return tuple(q for q in (1, 2, 3) if mask & QUBIT_MASKS[q - 1])


def syndrome_change_qubit(old_pair, new_pair) -> int | None:
    """Single qubit whose flip maps syndrome pair `old` to `new`.

    Returns None when the pairs are equal.  The mapping follows the
    standard diagnosis table: S1 flips alone -> qubit 1, both flip ->
    qubit 2, S2 flips alone -> qubit 3.
    """
    d1 = old_pair[0] != new_pair[0]
    d2 = old_pair[1] != new_pair[1]
    if not d1 and not d2:
        return None
    if d1 and d2:
        return 2
    return 1 if d1 else 3


# ----------------------------------------------------------------------
# Markov error models
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class RateMatrix:
    """8x8 generator of the error Markov chain, rows are source states.

    Every row sums to zero and off-diagonal entries are non-negative.
    `kind` is "bit-flip" (symmetric Pauli-X errors at rate gamma per
    qubit) or "damping" (each excited bit relaxes at rate gamma, ground
    state absorbing).
    """

    entries: np.ndarray
    kind: str
    gamma: float

    def __post_init__(self):
        object.__setattr__(self, "entries", np.asarray(self.entries, dtype=float))


def rate_matrix(kind: str, gamma: float) -> RateMatrix:
    """Build the bit-flip rate matrix Q or the damping rate matrix Q'."""
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    q = np.zeros((N_STATES, N_STATES))
    if kind == "bit-flip":
        for i in range(N_STATES):
            for j in range(N_STATES):
                if i == j:
                    q[i, j] = -3.0 * gamma
                elif (i ^ j) in (1, 2, 4):
                    q[i, j] = gamma
    elif kind == "damping":
        # From state i each set bit relaxes independently at rate gamma.
        for i in range(N_STATES):
            n_exc = bin(i).count("1")
            q[i, i] = -gamma * n_exc
            for mask in QUBIT_MASKS:
                if i & mask:
                    q[i, i ^ mask] = gamma
    else:
        raise ValueError(f"unknown rate matrix kind {kind!r}")
    return RateMatrix(entries=q, kind=kind, gamma=gamma)


def expm(a: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring with a Taylor series.

    Intended for small (8x8), mildly scaled matrices; the series is
    summed to machine precision after scaling the norm below 1/2.
    """
    a = np.asarray(a, dtype=float)
    norm = np.abs(a).sum(axis=1).max()
    n_squarings = max(0, int(math.ceil(math.log2(norm / 0.5))) if norm > 0.5 else 0)
    b = a / (2 ** n_squarings)
    result = np.eye(a.shape[0])
    term = np.eye(a.shape[0])
    for k in range(1, 40):
        term = term @ b / k
        result = result + term
        if np.abs(term).max() < 1e-18 * max(1.0, np.abs(result).max()):
            break
    for _ in range(n_squarings):
        result = result @ result
    return result


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic finite-step transition matrix J = exp(Q dt).

    Entry (i, j) is p(s_t = j | s_{t-1} = i).
    """

    entries: np.ndarray
    dt: float


def transition_matrix(q: RateMatrix | np.ndarray, dt: float) -> TransitionMatrix:
    """Exponentiate a rate matrix over one step of length `dt` seconds."""
    if dt < 0:
        raise ValueError(f"dt must be >= 0, got {dt}")
    entries = q.entries if isinstance(q, RateMatrix) else np.asarray(q, dtype=float)
    j = expm(entries * dt)
    # Clip round-off negatives and renormalize rows; the correction is
    # within 1e-12 of the raw exponential.
    j = np.clip(j, 0.0, None)
    j /= j.sum(axis=1, keepdims=True)
    return TransitionMatrix(entries=j, dt=dt)


# ----------------------------------------------------------------------
# Deterministic randomness
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class RngStream:
    """One independent random stream per trajectory.

    The (seed, stream_id) pair fully determines the sample sequence, so
    trajectory i is bit-identical regardless of execution order, worker
    count or batch size.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        entropy = [self.seed & _UINT64_MASK, self.stream_id & _UINT64_MASK]
        return np.random.default_rng(np.random.SeedSequence(entropy))


def sample_step_errors(state: int, gamma: float, dt: float,
                       rng: np.random.Generator) -> int:
    """Apply one step of Poisson-sampled bit-flip errors to a state.

    For each qubit independently draws n_q ~ Poisson(gamma*dt) and
    toggles that qubit's bit n_q times; only the parity of n_q matters.
    Errors are deemed to occur at the start of the step.
    """
    if gamma * dt >= 0.1:
        warnings.warn(
            f"gamma*dt = {gamma * dt:.3g} outside the small-step regime",
            stacklevel=2,
        )
    counts = rng.poisson(gamma * dt, size=3)
    for q in (1, 2, 3):
        if counts[q - 1] % 2:
            state = state ^ QUBIT_MASKS[q - 1]
    return state


def sample_flip_masks(draws: np.ndarray) -> np.ndarray:
    """Reduce Poisson flip counts of shape (..., 3) to XOR state masks."""
    parity = draws % 2
    return (parity[..., 0] * 4 + parity[..., 1] * 2 + parity[..., 2]).astype(np.uint8)


def simulate_error_chain(initial: int, kind: str, gamma: float, dt: float,
                         n_steps: int, n_traj: int,
                         rng: np.random.Generator) -> np.ndarray:
    """Vectorized Monte Carlo of the error Markov chain.

    Returns the (n_traj, n_steps + 1) array of state labels including the
    initial state, with errors applied at the start of each step.  Used
    as the sampling oracle against exp(Q T) populations and the analytic
    excited-population formulas.
    """
    states = np.empty((n_traj, n_steps + 1), dtype=np.uint8)
    states[:, 0] = initial
    current = np.full(n_traj, initial, dtype=np.uint8)
    if kind == "bit-flip":
        for t in range(n_steps):
            counts = rng.poisson(gamma * dt, size=(n_traj, 3))
            current = current ^ sample_flip_masks(counts)
            states[:, t + 1] = current
    elif kind == "damping":
        p_decay = 1.0 - math.exp(-gamma * dt)
        for t in range(n_steps):
            u = rng.random(size=(n_traj, 3))
            for q, mask in enumerate(QUBIT_MASKS):
                decays = ((current & mask) > 0) & (u[:, q] < p_decay)
                current = np.where(decays, current ^ mask, current)
            states[:, t + 1] = current
    else:
        raise ValueError(f"unknown chain kind {kind!r}")
    return states
