"""Discrete Bayesian classifier over the eight error states.

Recursive filter: a Markov prediction through J = exp(Q dt) followed by
a correlated-Gaussian measurement update per syndrome channel,

    mu_k    = S_k + c^T Sigma^{-1} (m_k - S_k 1)
    sigma^2 = tau_m/dt - c^T Sigma^{-1} c

with S_k the hypothesized syndrome and m_k the recent raw samples.  All
filtering runs in log space with a max-subtraction renormalization each
step, since per-step densities at variance ~6 span many orders of
magnitude over long records.

The active corrector works in the physical frame: when the posterior
argmax leaves the reference state for tau_streak consecutive steps it
emits the XOR-decomposed corrections, permutes the posterior to reflect
them, sign-adjusts the stored signal history on the affected channels,
and freezes measurement updates for tau_ignore steps (Markov prediction
still runs while frozen, since errors keep occurring).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..core import SYNDROME_TABLE, rate_matrix, transition_matrix
from ..noise import NoiseModel

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class BayesConfig:
    """Model parameters assumed by the classifier.

    `gamma_assumed` is the error rate fed to the Markov prior (1/s);
    `kind` selects the bit-flip or damping rate matrix.  `history_depth`
    caps how many past samples condition each likelihood (<= 4 and <=
    the number of configured lag correlations).
    """

    gamma_assumed: float
    tau_m: float
    dt: float
    lag_correlations: tuple[float, ...] = ()
    kind: str = "bit-flip"
    history_depth: int = 4
    tau_ignore: int = 0
    tau_streak: int = 1

    def __post_init__(self):
        if not 0 <= self.history_depth <= 4:
            raise ValueError("history_depth must lie in 0..4")
        object.__setattr__(self, "lag_correlations",
                           tuple(float(c) for c in self.lag_correlations))

    @property
    def depth(self) -> int:
        return min(self.history_depth, len(self.lag_correlations))

    @property
    def variance(self) -> float:
        return self.tau_m / self.dt

    def noise_model(self) -> NoiseModel:
        return _noise_model(self.variance, self.lag_correlations[:self.depth])

    def transition(self) -> np.ndarray:
        return _transition(self.kind, self.gamma_assumed, self.dt)


@lru_cache(maxsize=32)
def _noise_model(variance, lags):
    return NoiseModel(variance=variance, correlations=lags)


@lru_cache(maxsize=32)
def _transition(kind, gamma, dt):
    j = transition_matrix(rate_matrix(kind, gamma), dt).entries
    j.setflags(write=False)
    return j


def predict(posterior: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Markov prediction p~(j) = sum_i p(i) J_ij, renormalized."""
    out = np.asarray(posterior) @ j
    return out / out.sum(axis=-1, keepdims=True)


def _log_likelihood_pair(value, history, model: NoiseModel):
    """Log densities of `value` under S = +1 and S = -1.

    `history` holds the last h raw samples, most recent first; the
    conditional mean is S + w . (history - S), evaluated for both
    hypothesized syndromes at once.
    """
    history = np.asarray(history, dtype=float)
    h = history.shape[-1]
    var = model.conditional_var(h)
    norm = -0.5 * (LOG_2PI + math.log(var))
    if h:
        w = model.weights[h]
        wsum = float(w.sum())
        base = history @ w
        mu_plus = (1.0 - wsum) + base
        mu_minus = -(1.0 - wsum) + base
    else:
        mu_plus, mu_minus = 1.0, -1.0
    value = np.asarray(value, dtype=float)
    lp = norm - 0.5 * (value - mu_plus) ** 2 / var
    lm = norm - 0.5 * (value - mu_minus) ** 2 / var
    return lp, lm


def likelihood(value: float, state: int, channel: int, history,
               cfg: BayesConfig) -> float:
    """Gaussian density of one sample under a hypothesized error state."""
    history = np.asarray(history, dtype=float)
    if history.shape[-1] > cfg.depth:
        history = history[..., :cfg.depth]
    lp, lm = _log_likelihood_pair(value, history, cfg.noise_model())
    synd = SYNDROME_TABLE[state, channel - 1]
    return float(np.exp(lp if synd > 0 else lm))


def _log_posterior_update(log_prior, i1, i2, hist1, hist2, model):
    """Add both channel log likelihoods to a log prior and renormalize."""
    lp1, lm1 = _log_likelihood_pair(i1, hist1, model)
    lp2, lm2 = _log_likelihood_pair(i2, hist2, model)
    s_plus = SYNDROME_TABLE[:, 0] > 0
    s2_plus = SYNDROME_TABLE[:, 1] > 0
    log_like = (np.where(s_plus, lp1[..., None], lm1[..., None])
                + np.where(s2_plus, lp2[..., None], lm2[..., None]))
    out = log_prior + log_like
    out -= out.max(axis=-1, keepdims=True)
    with np.errstate(divide="ignore"):
        out -= np.log(np.exp(out).sum(axis=-1, keepdims=True))
    return out


def update(posterior, i1, i2, history1, history2, cfg: BayesConfig) -> np.ndarray:
    """One measurement update of a (predicted) posterior, renormalized."""
    posterior = np.asarray(posterior, dtype=float)
    with np.errstate(divide="ignore"):
        log_post = np.log(posterior)
    h1 = np.asarray(history1, dtype=float)[..., :cfg.depth]
    h2 = np.asarray(history2, dtype=float)[..., :cfg.depth]
    log_post = _log_posterior_update(log_post, i1, i2, h1, h2,
                                     cfg.noise_model())
    return np.exp(log_post)


def permute_on_correction(posterior, qubit: int) -> np.ndarray:
    """Swap probabilities of states differing on the corrected qubit."""
    return permute_mask(posterior, (4, 2, 1)[qubit - 1])


def permute_mask(posterior, mask: int) -> np.ndarray:
    """p'(s) = p(s XOR mask); involution for any fixed mask."""
    posterior = np.asarray(posterior)
    return posterior[..., np.arange(8) ^ mask]


def decide(posterior) -> int:
    """Most probable state; ties break toward the lower index."""
    return int(np.argmax(posterior, axis=-1)) if np.ndim(posterior) == 1 \
        else np.argmax(posterior, axis=-1)


def log_bayes_factor(i_t, i_prev, rho: float, tau: float):
    """Per-sample syndrome evidence 2 (I_t - rho I_{t-1}) / (tau (1 + rho)).

    `tau` is the per-sample variance scale, consistent with the
    likelihood convention used throughout.
    """
    if rho <= -1 or rho >= 1:
        raise ValueError("rho must lie in (-1, 1)")
    return 2.0 * (np.asarray(i_t) - rho * np.asarray(i_prev)) / (tau * (1.0 + rho))


def expected_log_bayes_factor(rho: float, tau: float) -> float:
    """Magnitude of E[log phi] when sampling at the true syndrome."""
    return 2.0 * (1.0 - rho) / (tau * (1.0 + rho))


# ----------------------------------------------------------------------
# Sequential filters
# ----------------------------------------------------------------------

class BayesFilter:
    """Batched recursive filter for state tracking (no corrections)."""

    def __init__(self, cfg: BayesConfig, initial_states, batch: int | None = None):
        initial = np.atleast_1d(np.asarray(initial_states, dtype=np.int64))
        if batch is not None and initial.size == 1:
            initial = np.full(batch, initial[0], dtype=np.int64)
        self.cfg = cfg
        self.j = cfg.transition()
        self.model = cfg.noise_model()
        self.batch = initial.size
        self.log_post = np.full((self.batch, 8), -np.inf)
        self.log_post[np.arange(self.batch), initial] = 0.0
        # raw sample history, most recent first
        self._hist = np.zeros((self.batch, 2, cfg.depth))
        self._seen = 0

    def _histories(self):
        h = min(self._seen, self.cfg.depth)
        return self._hist[:, 0, :h], self._hist[:, 1, :h]

    def _push_history(self, signals):
        if self.cfg.depth:
            self._hist = np.roll(self._hist, 1, axis=2)
            self._hist[:, :, 0] = signals
        self._seen += 1

    def _predict_in_log(self):
        post = np.exp(self.log_post)
        with np.errstate(divide="ignore"):
            self.log_post = np.log(predict(post, self.j))

    def step(self, signals: np.ndarray) -> np.ndarray:
        """Advance one measurement pair; returns the argmax states."""
        signals = np.atleast_2d(np.asarray(signals, dtype=float))
        self._predict_in_log()
        h1, h2 = self._histories()
        self.log_post = _log_posterior_update(
            self.log_post, signals[:, 0], signals[:, 1], h1, h2, self.model)
        self._push_history(signals)
        return np.argmax(self.log_post, axis=-1)

    @property
    def posterior(self) -> np.ndarray:
        return np.exp(self.log_post)


class BayesActive(BayesFilter):
    """Active corrector in the physical frame with permutation updates."""

    def __init__(self, cfg: BayesConfig, reference_state: int, batch: int):
        super().__init__(cfg, np.full(batch, reference_state, dtype=np.int64))
        self.reference = reference_state
        self.resume_at = np.zeros(batch, dtype=np.int64)
        self.streak_cand = np.full(batch, reference_state, dtype=np.int64)
        self.streak_len = np.zeros(batch, dtype=np.int64)
        self.t = 0

    def observe(self, signals: np.ndarray) -> np.ndarray:
        signals = np.atleast_2d(np.asarray(signals, dtype=float))
        active = self.t >= self.resume_at

        self._predict_in_log()
        h1, h2 = self._histories()
        updated = _log_posterior_update(
            self.log_post, signals[:, 0], signals[:, 1], h1, h2, self.model)
        self.log_post = np.where(active[:, None], updated, self.log_post)
        self._push_history(signals)

        preds = np.argmax(self.log_post, axis=-1)
        changed = active & (preds != self.reference)
        same_cand = changed & (preds == self.streak_cand)
        self.streak_len = np.where(same_cand, self.streak_len + 1, 0)
        self.streak_len[changed & ~same_cand] = 1
        self.streak_cand = np.where(changed, preds, self.reference)

        fire = changed & (self.streak_len >= self.cfg.tau_streak)
        masks = np.where(fire, preds ^ self.reference, 0).astype(np.uint8)
        if np.any(fire):
            self._apply_corrections(masks, fire)
        self.t += 1
        return masks

    def _apply_corrections(self, masks, fire):
        idx = np.nonzero(fire)[0]
        cols = np.arange(8)
        for b in idx:
            self.log_post[b] = self.log_post[b, cols ^ int(masks[b])]
            # channels whose syndrome the correction flips see their past
            # means negated; keep the stored history coherent
            if SYNDROME_TABLE[masks[b], 0] < 0:
                self._hist[b, 0] *= -1.0
            if SYNDROME_TABLE[masks[b], 1] < 0:
                self._hist[b, 1] *= -1.0
        self.resume_at[fire] = self.t + 1 + self.cfg.tau_ignore
        self.streak_len[fire] = 0
        self.streak_cand[fire] = self.reference

    def final_pattern(self) -> np.ndarray:
        """Believed error pattern relative to the reference state."""
        return (np.argmax(self.log_post, axis=-1) ^ self.reference).astype(np.uint8)
