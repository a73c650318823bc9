"""Synthetic syndrome-measurement trajectories, Schemes A-D.

Scheme A is the idealized record: means at the syndrome eigenvalues plus
white Gaussian noise of per-sample variance tau_m/dt.  Scheme B adds
short-lag auto-correlated noise, Scheme C adds 94-step resonator
transients after every flip, Scheme D adds a per-sequence linear drift
of the means.  Errors are applied at the start of each step and the
measurement mean reflects the post-error state (modulo transients).

All randomness is pre-drawn per trajectory from its own `RngStream` in a
fixed order (error draws first, then noise innovations), so a trajectory
is reproduced bit-identically by any execution path: the scalar
generator, the batched generator, and the feedback engines all consume
the same arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .core import (
    N_STATES,
    QUBIT_MASKS,
    SYNDROME_TABLE,
    RngStream,
    sample_flip_masks,
)
from .noise import NoiseModel, generate_noise
from .transients import (
    TEMPLATE_STEPS,
    ResonatorParams,
    build_transient_templates,
    template_table,
)

SCHEMES = ("A", "B", "C", "D")

# Reference acquisition constants: measurement time and step length in
# seconds (per-sample noise variance tau_m/dt = 5.94) and the lag-1..4
# noise correlation fractions estimated from the reference device.
TAU_M_DEFAULT = 1.9e-7
DT_DEFAULT = 3.2e-8
LAG_CORRELATIONS_DEFAULT = (0.61, 0.25, 0.10, 0.05)


@dataclass(frozen=True)
class SchemeConfig:
    """Full description of one simulated measurement scheme.

    gamma is the per-qubit error rate in 1/s; `error_kind` selects the
    Markov error model ("bit-flip", "damping", or "bernoulli" for the
    one-or-zero flips per step used by the annealing unraveling).
    `drift_total` and `n_sequences` define the Scheme D cross-sequence
    drift Delta_i = drift_total * i / n_sequences.
    """

    scheme: str = "A"
    tau_m: float = TAU_M_DEFAULT
    dt: float = DT_DEFAULT
    gamma: float = 0.0
    error_kind: str = "bit-flip"
    lag_correlations: tuple[float, ...] = LAG_CORRELATIONS_DEFAULT
    resonator: ResonatorParams = field(default_factory=ResonatorParams)
    drift_total: float = 0.4
    n_sequences: int = 1

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.tau_m <= 0 or self.dt <= 0:
            raise ValueError("tau_m and dt must be positive")
        object.__setattr__(self, "lag_correlations",
                           tuple(float(c) for c in self.lag_correlations))

    @property
    def variance(self) -> float:
        """Per-sample noise variance tau_m/dt."""
        return self.tau_m / self.dt

    @property
    def correlated(self) -> bool:
        return self.scheme in ("B", "C", "D")

    @property
    def with_transients(self) -> bool:
        return self.scheme in ("C", "D")

    @property
    def with_drift(self) -> bool:
        return self.scheme == "D"

    def noise_model(self) -> NoiseModel:
        lags = self.lag_correlations if self.correlated else ()
        return _noise_model(self.variance, lags)

    def transient_means(self) -> np.ndarray:
        """(64, 94, 2) template lookup keyed by pre*8 + post."""
        return _template_table(self.resonator, self.dt)

    def drift(self, sequence_index) -> np.ndarray:
        """Mean offset added to both channels of sequence i (Scheme D)."""
        if not self.with_drift:
            return np.zeros_like(np.asarray(sequence_index, dtype=float))
        return self.drift_total * np.asarray(sequence_index, dtype=float) \
            / self.n_sequences


@lru_cache(maxsize=16)
def _noise_model(variance: float, lags: tuple[float, ...]) -> NoiseModel:
    return NoiseModel(variance=variance, correlations=lags)


@lru_cache(maxsize=8)
def _template_table(resonator: ResonatorParams, dt: float) -> np.ndarray:
    templates = build_transient_templates(resonator, dt)
    table = template_table(templates)
    table.setflags(write=False)
    return table


# ----------------------------------------------------------------------
# Pre-drawn per-trajectory randomness
# ----------------------------------------------------------------------

def draw_randomness(cfg: SchemeConfig, stream: RngStream, n_steps: int):
    """Draw one trajectory's randomness in the canonical order.

    Returns (error_draws, innovations): error draws of shape (T, 3)
    (Poisson counts for the bit-flip kind, uniforms otherwise) and
    standard-normal noise innovations of shape (T, 2).
    """
    rng = stream.generator()
    if cfg.error_kind == "bit-flip":
        errors = rng.poisson(cfg.gamma * cfg.dt, size=(n_steps, 3))
    elif cfg.error_kind in ("damping", "bernoulli"):
        errors = rng.random(size=(n_steps, 3))
    else:
        raise ValueError(f"unknown error kind {cfg.error_kind!r}")
    innovations = rng.standard_normal(size=(n_steps, 2))
    return errors, innovations


# ----------------------------------------------------------------------
# Stepwise batch process
# ----------------------------------------------------------------------

class SignalProcess:
    """Stepwise measurement-record generator for a batch of trajectories.

    The process owns the true error-state labels and the noise; callers
    advance it one step at a time and may inject correction masks, which
    is how the active-correction engines close the feedback loop.  With
    no corrections the emitted record is identical to the passive
    generator's output for the same streams.
    """

    def __init__(self, cfg: SchemeConfig, initial_states, n_steps: int,
                 seed: int, stream_ids, sequence_indices=None,
                 injected: tuple[int, int] | None = None):
        initial_states = np.atleast_1d(np.asarray(initial_states, dtype=np.uint8))
        stream_ids = np.atleast_1d(np.asarray(stream_ids, dtype=np.int64))
        if stream_ids.shape != initial_states.shape:
            raise ValueError("initial_states and stream_ids must align")
        if np.any(initial_states > 7):
            raise ValueError("state labels must lie in 0..7")
        if injected is not None and not (0 <= injected[1] < n_steps):
            raise ValueError("injected flip step must lie within the trajectory")
        if cfg.error_kind == "bit-flip" and cfg.gamma * cfg.dt >= 0.1:
            raise ValueError("gamma*dt >= 0.1 is outside the model's regime")

        self.cfg = cfg
        self.n_steps = n_steps
        self.batch = initial_states.size
        self.states = initial_states.copy()
        self.stream_ids = stream_ids
        self.injected = injected
        if sequence_indices is None:
            sequence_indices = np.zeros(self.batch, dtype=np.int64)
        self.sequence_indices = np.atleast_1d(np.asarray(sequence_indices))

        error_draws = np.empty((self.batch, n_steps, 3))
        innovations = np.empty((self.batch, n_steps, 2))
        for b in range(self.batch):
            stream = RngStream(seed, int(stream_ids[b]))
            error_draws[b], innovations[b] = draw_randomness(cfg, stream, n_steps)
        self._error_draws = error_draws
        self.noise = _noise_from_innovations(cfg.noise_model(), innovations)

        self._drift = cfg.drift(self.sequence_indices)
        self._steady = SYNDROME_TABLE
        self._table = cfg.transient_means() if cfg.with_transients else None
        # steps since the last state change, saturated beyond the template
        self._since_change = np.full(self.batch, TEMPLATE_STEPS, dtype=np.int64)
        self._keys = self.states.astype(np.int64) * N_STATES + self.states
        self._decay_prob = 1.0 - math.exp(-cfg.gamma * cfg.dt)
        self._flip_prob = cfg.gamma * cfg.dt
        self.t = 0

    def _sample_errors(self) -> np.ndarray:
        """XOR masks of this step's sampled errors, per trajectory."""
        draws = self._error_draws[:, self.t, :]
        if self.cfg.error_kind == "bit-flip":
            return sample_flip_masks(draws)
        if self.cfg.error_kind == "bernoulli":
            flips = draws < self._flip_prob
            return (flips[:, 0] * 4 + flips[:, 1] * 2 + flips[:, 2]).astype(np.uint8)
        # damping: only excited bits can relax
        mask = np.zeros(self.batch, dtype=np.uint8)
        for q, bit in enumerate(QUBIT_MASKS):
            decays = ((self.states & bit) > 0) & (draws[:, q] < self._decay_prob)
            mask |= np.uint8(bit) * decays.astype(np.uint8)
        return mask

    def step(self, corrections: np.ndarray | None = None):
        """Advance one step and emit the measurement pair.

        `corrections` is an optional (batch,) XOR mask of decoder
        corrections, applied at the start of the step together with this
        step's sampled errors.  Returns (signals (batch, 2), states
        (batch,), change_mask (batch,)) where `states` are the true
        labels after the step's transitions and `change_mask` the net
        XOR applied (corrections and errors combined).
        """
        if self.t >= self.n_steps:
            raise RuntimeError("process already ran its configured steps")
        prev = self.states
        new = prev.copy()
        if corrections is not None:
            new ^= np.asarray(corrections, dtype=np.uint8)
        new ^= self._sample_errors()
        if self.injected is not None and self.t == self.injected[1]:
            new = new ^ np.uint8(QUBIT_MASKS[self.injected[0] - 1])
        change = prev ^ new
        self.states = new

        if self._table is not None:
            changed = change != 0
            self._since_change[changed] = 0
            self._keys[changed] = prev[changed].astype(np.int64) * N_STATES \
                + new[changed]
            in_transient = self._since_change < TEMPLATE_STEPS
            means = np.where(
                in_transient[:, None],
                self._table[self._keys, np.minimum(self._since_change,
                                                   TEMPLATE_STEPS - 1)],
                self._steady[new],
            )
            self._since_change += 1
        else:
            means = self._steady[new]

        means = means + self._drift[:, None]
        signals = means + self.noise[:, self.t, :]
        self.last_means = means
        self.t += 1
        return signals, new.copy(), change

    def run(self, n_steps: int | None = None):
        """Run with no feedback; returns (states, means, signals) arrays.

        Shapes are (batch, T) and (batch, T, 2); `means` excludes noise
        but includes transients and drift.
        """
        total = self.n_steps if n_steps is None else n_steps
        states = np.empty((self.batch, total), dtype=np.uint8)
        means = np.empty((self.batch, total, 2))
        signals = np.empty((self.batch, total, 2))
        for t in range(total):
            sig, st, _ = self.step()
            states[:, t] = st
            means[:, t] = self.last_means
            signals[:, t] = sig
        return states, means, signals


def _noise_from_innovations(model: NoiseModel, innovations: np.ndarray) -> np.ndarray:
    """(B, T, 2) correlated noise; channels are independent."""
    out = np.empty_like(innovations)
    for k in (0, 1):
        out[:, :, k] = generate_noise(model, innovations[:, :, k])
    return out


# ----------------------------------------------------------------------
# Trajectories and datasets
# ----------------------------------------------------------------------

@dataclass
class Trajectory:
    """One generated measurement record with its ground truth."""

    config: SchemeConfig
    seed: int
    stream_id: int
    sequence_index: int
    initial_state: int
    true_states: np.ndarray   # (T,) state label after each step's errors
    means: np.ndarray         # (T, 2) noiseless signal means
    signals: np.ndarray       # (T, 2) measured values
    injected: tuple[int, int] | None = None


def generate_trajectory(cfg: SchemeConfig, initial: int, n_steps: int,
                        sequence_index: int, stream: RngStream,
                        injected_flip: tuple[int, int] | None = None) -> Trajectory:
    """Generate a single trajectory from its own random stream."""
    proc = SignalProcess(cfg, [initial], n_steps, stream.seed,
                         [stream.stream_id], [sequence_index],
                         injected=injected_flip)
    states, means, signals = proc.run()
    return Trajectory(
        config=cfg, seed=stream.seed, stream_id=stream.stream_id,
        sequence_index=sequence_index, initial_state=initial,
        true_states=states[0], means=means[0], signals=signals[0],
        injected=injected_flip,
    )


@dataclass
class Dataset:
    """A batch of trajectories sharing one scheme configuration."""

    config: SchemeConfig
    seed: int
    initial_states: np.ndarray    # (N,)
    stream_ids: np.ndarray        # (N,)
    sequence_indices: np.ndarray  # (N,)
    true_states: np.ndarray       # (N, T)
    means: np.ndarray             # (N, T, 2)
    signals: np.ndarray           # (N, T, 2)
    injected: tuple[int, int] | None = None

    @property
    def n_traj(self) -> int:
        return self.true_states.shape[0]

    @property
    def n_steps(self) -> int:
        return self.true_states.shape[1]


def generate_dataset(cfg: SchemeConfig, initial_states, n_steps: int,
                     seed: int, stream_offset: int = 0,
                     sequence_offset: int = 0,
                     injected_flip: tuple[int, int] | None = None,
                     chunk: int = 4096) -> Dataset:
    """Generate a dataset; trajectory i uses stream_id = stream_offset + i.

    `initial_states` may be an int (shared by every trajectory) or an
    array of per-trajectory labels; sequence indices run from
    `sequence_offset` so that Scheme D spreads its drift across the
    dataset (and across chunked generation of a larger one).
    """
    initial_states = np.atleast_1d(np.asarray(initial_states, dtype=np.uint8))
    n = initial_states.size
    stream_ids = stream_offset + np.arange(n, dtype=np.int64)
    sequence_indices = sequence_offset + np.arange(n, dtype=np.int64)
    total = sequence_offset + n
    cfg_n = cfg if cfg.n_sequences >= total else replace(cfg, n_sequences=total)

    true_states = np.empty((n, n_steps), dtype=np.uint8)
    means = np.empty((n, n_steps, 2))
    signals = np.empty((n, n_steps, 2))
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        proc = SignalProcess(cfg_n, initial_states[lo:hi], n_steps, seed,
                             stream_ids[lo:hi], sequence_indices[lo:hi],
                             injected=injected_flip)
        true_states[lo:hi], means[lo:hi], signals[lo:hi] = proc.run()
    return Dataset(
        config=cfg_n, seed=seed, initial_states=initial_states,
        stream_ids=stream_ids, sequence_indices=sequence_indices,
        true_states=true_states, means=means, signals=signals,
        injected=injected_flip,
    )


def generate_injected_dataset(cfg: SchemeConfig, initial: int,
                              flip: tuple[int, int] | None, n_traj: int,
                              n_steps: int, seed: int,
                              stream_offset: int = 0) -> Dataset:
    """Dataset with no random errors and one deterministic injected flip.

    Used for detection-time statistics and averaged-signal checks; the
    scheme's gamma is forced to zero so the injected flip (if any) is the
    only state change.
    """
    if flip is not None and not (0 <= flip[1] < n_steps):
        raise ValueError("injected flip step must lie within the trajectory")
    quiet = replace(cfg, gamma=0.0)
    initials = np.full(n_traj, initial, dtype=np.uint8)
    return generate_dataset(quiet, initials, n_steps, seed,
                            stream_offset=stream_offset, injected_flip=flip)
