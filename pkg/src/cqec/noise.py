"""Correlated Gaussian noise with a short-lag Toeplitz covariance.

The measurement noise has per-sample variance V = tau_m / dt and
covariances V * rho_j at lags j = 1..4 (rho = (0.61, 0.25, 0.10, 0.05)
for the reference device).  Sampling and likelihood evaluation both need
the conditional law of one sample given the previous h <= 4 samples:

    mean = w_h . history          (history most-recent first)
    var  = V - c_h . w_h,   w_h = Sigma_h^{-1} c_h

where Sigma_h is the h x h Toeplitz covariance of the history block and
c_h the covariance vector between the new sample and the history.  The
growing-history weights (h = 0..depth) are precomputed once per model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_LAGS = 4


@dataclass(frozen=True)
class NoiseModel:
    """Stationary Gaussian noise model for one syndrome channel.

    `variance` is the per-sample variance tau_m/dt; `correlations` the
    lag-1.. correlation coefficients (empty for white noise).  The
    conditional-law coefficients for every history length are derived at
    construction and an invalid (non positive-definite) covariance
    sequence raises ValueError.
    """

    variance: float
    correlations: tuple[float, ...] = ()
    weights: tuple[np.ndarray, ...] = field(init=False, repr=False, compare=False)
    cond_vars: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.variance <= 0:
            raise ValueError(f"variance must be > 0, got {self.variance}")
        corr = tuple(float(c) for c in self.correlations)
        if len(corr) > MAX_LAGS:
            raise ValueError(f"at most {MAX_LAGS} lag correlations supported")
        object.__setattr__(self, "correlations", corr)
        weights, cond_vars = _conditional_coefficients(self.variance, corr)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "cond_vars", cond_vars)

    @property
    def depth(self) -> int:
        return len(self.correlations)

    @property
    def covariances(self) -> np.ndarray:
        """Lag-1.. covariances in raw units (variance * correlations)."""
        return self.variance * np.asarray(self.correlations)

    def conditional_mean(self, history: np.ndarray) -> np.ndarray:
        """Conditional mean of the next centered sample.

        `history` has the most recent sample in the last axis position 0
        and may be shorter than the model depth during start-up.
        """
        history = np.asarray(history)
        h = history.shape[-1]
        if h == 0:
            return np.zeros(history.shape[:-1])
        return history @ self.weights[h]

    def conditional_var(self, history_len: int) -> float:
        return self.cond_vars[history_len]


def _conditional_coefficients(variance, correlations):
    depth = len(correlations)
    cov = variance * np.asarray(correlations)
    weights = [np.zeros(0)]
    cond_vars = [variance]
    for h in range(1, depth + 1):
        sigma = np.empty((h, h))
        for i in range(h):
            for j in range(h):
                lag = abs(i - j)
                sigma[i, j] = variance if lag == 0 else cov[lag - 1]
        w = np.linalg.solve(sigma, cov[:h])
        var = variance - float(cov[:h] @ w)
        if var <= 0:
            raise ValueError(
                "covariance sequence is not positive definite "
                f"(conditional variance {var:.3g} at history length {h})"
            )
        weights.append(w)
        cond_vars.append(var)
    return tuple(weights), tuple(cond_vars)


def correlated_noise_step(history, model: NoiseModel,
                          rng: np.random.Generator) -> float:
    """Draw the next centered noise sample given the recent history.

    `history` holds the last <= depth centered samples, most recent
    first.  With an empty history this is an unconditional draw at the
    full per-sample variance.
    """
    history = np.asarray(history, dtype=float)
    h = min(history.shape[-1], model.depth) if history.size else 0
    mean = model.conditional_mean(history[..., :h]) if h else 0.0
    std = np.sqrt(model.conditional_var(h))
    return float(mean + std * rng.standard_normal())


def generate_noise(model: NoiseModel, innovations: np.ndarray) -> np.ndarray:
    """Transform i.i.d. standard normal innovations into correlated noise.

    `innovations` has shape (..., T); time is the last axis.  The first
    `depth` samples use the growing-history conditionals, after which the
    recursion is a stationary AR(depth) process whose autocovariances
    match the model at lags 0..depth exactly.  Deterministic given the
    innovations, which is what makes trajectory generation replayable.
    """
    innovations = np.asarray(innovations, dtype=float)
    t_total = innovations.shape[-1]
    out = np.empty_like(innovations)
    depth = model.depth
    if depth == 0:
        np.multiply(innovations, np.sqrt(model.variance), out=out)
        return out
    stds = [np.sqrt(v) for v in model.cond_vars]
    for t in range(t_total):
        h = min(t, depth)
        if h == 0:
            out[..., 0] = stds[0] * innovations[..., 0]
            continue
        # history slice reversed so index 0 is the most recent sample
        history = out[..., t - h:t][..., ::-1]
        out[..., t] = history @ model.weights[h] + stds[h] * innovations[..., t]
    return out


def ar_extension(model: NoiseModel, max_lag: int) -> np.ndarray:
    """Autocovariances at lags 0..max_lag implied by the AR recursion.

    Lags 0..depth reproduce the configured values; beyond the depth the
    stationary process extends them through the Yule-Walker recursion.
    """
    depth = model.depth
    gamma = np.empty(max_lag + 1)
    gamma[0] = model.variance
    head = min(depth, max_lag)
    gamma[1:head + 1] = model.covariances[:head]
    if max_lag <= depth:
        return gamma
    w = model.weights[depth]
    for lag in range(depth + 1, max_lag + 1):
        gamma[lag] = sum(w[i] * gamma[lag - 1 - i] for i in range(depth))
    return gamma
