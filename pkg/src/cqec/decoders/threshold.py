"""Double-threshold error diagnosis: exponential filtering + two thresholds.

The raw signals are low-pass filtered with averaging time tau; a
diagnosis is made only when both filtered channels sit outside the
uncertainty band (theta1, theta2).  The quadrant then fixes the
syndrome pair and the implied correction: (+,+) none, (-,+) X1,
(-,-) X2, (+,-) X3.  On every correction (or accepted diagnosis change
in tracking mode) the filters are reset to the new reference syndromes,
eliminating the filter lag that would otherwise re-trigger corrections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import SYNDROME_TABLE, syndrome_change_qubit


@dataclass(frozen=True)
class ThresholdConfig:
    """Averaging time (s) and the two thresholds (signal units)."""

    tau: float
    theta1: float
    theta2: float

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if not self.theta1 < self.theta2:
            raise ValueError("theta1 must be < theta2")


def filter_step(filtered, signals, tau: float, dt: float):
    """One exact step of the first-order filter df/dt = (I - f)/tau."""
    a = math.exp(-dt / tau)
    return a * np.asarray(filtered) + (1 - a) * np.asarray(signals)


def classify(filtered, cfg: ThresholdConfig):
    """Diagnose one filtered pair.

    Returns (syndromes, correction_qubit): ((s1, s2), qubit or None) for
    a certain diagnosis on the standard code-space reference, or
    (None, None) when either channel lies inside the uncertainty band.
    """
    f1, f2 = filtered
    if cfg.theta1 < f1 < cfg.theta2 or cfg.theta1 < f2 < cfg.theta2:
        return None, None
    s1 = 1 if f1 >= cfg.theta2 else -1
    s2 = 1 if f2 >= cfg.theta2 else -1
    return (s1, s2), syndrome_change_qubit((1, 1), (s1, s2))


def classify_batch(filtered: np.ndarray, cfg: ThresholdConfig):
    """Vectorized diagnosis: (s1, s2, certain) arrays for (B, 2) filters."""
    above = filtered >= cfg.theta2
    below = filtered <= cfg.theta1
    certain = np.all(above | below, axis=-1)
    s1 = np.where(above[..., 0], 1, -1)
    s2 = np.where(above[..., 1], 1, -1)
    return s1, s2, certain


def correct_and_reset(filtered, reference_syndromes):
    """Reset both filtered values to the post-correction reference."""
    filtered = np.asarray(filtered, dtype=float)
    out = np.broadcast_to(np.asarray(reference_syndromes, dtype=float),
                          filtered.shape).copy()
    return out


def _correction_masks(s1, s2, ref1, ref2):
    """XOR masks mapping reference syndromes to diagnosed ones."""
    d1 = s1 != ref1
    d2 = s2 != ref2
    return (4 * (d1 & ~d2) + 2 * (d1 & d2) + 1 * (~d1 & d2)).astype(np.uint8)


class ThresholdTracker:
    """Sequential state tracker over a batch of trajectories.

    Maintains a believed state per trajectory; a certain diagnosis whose
    syndromes differ from the believed ones flips the implied qubit and
    resets the filters to the newly diagnosed syndrome values.
    """

    def __init__(self, cfg: ThresholdConfig, initial_states, dt: float):
        self.cfg = cfg
        self.dt = dt
        self.believed = np.atleast_1d(np.asarray(initial_states, dtype=np.uint8)).copy()
        self.filters = SYNDROME_TABLE[self.believed].copy()

    def observe(self, signals: np.ndarray) -> np.ndarray:
        self.filters = filter_step(self.filters, signals, self.cfg.tau, self.dt)
        s1, s2, certain = classify_batch(self.filters, self.cfg)
        ref = SYNDROME_TABLE[self.believed]
        masks = _correction_masks(s1, s2, ref[:, 0], ref[:, 1])
        change = certain & (masks != 0)
        self.believed[change] ^= masks[change]
        self.filters[change, 0] = s1[change]
        self.filters[change, 1] = s2[change]
        return self.believed.copy()


class ThresholdActive:
    """Active corrector relative to a fixed reference state.

    Emits the quadrant-implied correction whenever both filters leave the
    uncertainty band with syndromes differing from the reference, then
    resets the filters to the reference values; an optional tau_ignore
    freeze discards the filter input after each correction (used when
    resonator transients pollute the signals).
    """

    def __init__(self, cfg: ThresholdConfig, reference_state: int, batch: int,
                 dt: float, tau_ignore: int = 0):
        self.cfg = cfg
        self.dt = dt
        self.tau_ignore = tau_ignore
        self.reference = reference_state
        self.ref_synd = (int(SYNDROME_TABLE[reference_state, 0]),
                         int(SYNDROME_TABLE[reference_state, 1]))
        self.filters = np.tile(SYNDROME_TABLE[reference_state], (batch, 1))
        self.resume_at = np.zeros(batch, dtype=np.int64)
        self.t = 0

    def observe(self, signals: np.ndarray) -> np.ndarray:
        active = self.t >= self.resume_at
        updated = filter_step(self.filters, signals, self.cfg.tau, self.dt)
        self.filters = np.where(active[:, None], updated, self.filters)
        s1, s2, certain = classify_batch(self.filters, self.cfg)
        masks = _correction_masks(s1, s2, *self.ref_synd)
        fire = active & certain & (masks != 0)
        corrections = np.where(fire, masks, 0).astype(np.uint8)
        self.filters[fire] = SYNDROME_TABLE[self.reference]
        self.resume_at[fire] = self.t + 1 + self.tau_ignore
        self.t += 1
        return corrections

    def final_pattern(self) -> np.ndarray:
        """Currently diagnosed error pattern relative to the reference."""
        s1, s2, certain = classify_batch(self.filters, self.cfg)
        masks = _correction_masks(s1, s2, *self.ref_synd)
        return np.where(certain, masks, 0).astype(np.uint8)


# ----------------------------------------------------------------------
# Parameter optimization
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ThresholdGrid:
    """Exhaustive search grid; theta1 = -theta2 unless `asymmetric`."""

    taus: tuple[float, ...]
    theta2s: tuple[float, ...]
    asymmetric: bool = False

    def configs(self):
        for tau in self.taus:
            for t2 in self.theta2s:
                if self.asymmetric:
                    for t1 in self.theta2s:
                        yield ThresholdConfig(tau=tau, theta1=-t1, theta2=t2)
                else:
                    yield ThresholdConfig(tau=tau, theta1=-t2, theta2=t2)


def default_grid() -> ThresholdGrid:
    return ThresholdGrid(
        taus=tuple(np.linspace(0.1e-6, 2.0e-6, 20)),
        theta2s=tuple(np.linspace(0.1, 0.9, 9)),
    )


def tracking_fidelity(dataset, cfg: ThresholdConfig) -> float:
    """Fraction of trajectories whose final believed state is the truth."""
    tracker = ThresholdTracker(cfg, dataset.initial_states, dataset.config.dt)
    preds = None
    for t in range(dataset.n_steps):
        preds = tracker.observe(dataset.signals[:, t, :])
    return float(np.mean(preds == dataset.true_states[:, -1]))


def optimize_params(dataset, grid: ThresholdGrid | None = None,
                    objective="tracking") -> ThresholdConfig:
    """Grid-search the threshold parameters on a training dataset.

    `objective` is "tracking" (final-state fidelity on the dataset), or a
    callable cfg -> score for task-specific objectives such as the
    excited-state population of an active-correction run.  Ties break
    toward larger tau, then toward symmetric thresholds.
    """
    grid = grid or default_grid()
    configs = list(grid.configs())
    if not configs:
        raise ValueError("empty threshold search grid")
    if objective == "tracking":
        score_fn = lambda cfg: tracking_fidelity(dataset, cfg)  # noqa: E731
    elif callable(objective):
        score_fn = objective
    else:
        raise ValueError(f"unknown objective {objective!r}")
    best = None
    best_key = None
    for cfg in configs:
        key = (score_fn(cfg), cfg.tau, -abs(cfg.theta1 + cfg.theta2))
        if best_key is None or key > best_key:
            best, best_key = cfg, key
    return best
