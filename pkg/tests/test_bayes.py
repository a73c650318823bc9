import math

import numpy as np
import pytest

from cqec.core import SYNDROME_TABLE, RngStream, rate_matrix, transition_matrix
from cqec.decoders.bayes import (
    BayesActive,
    BayesConfig,
    BayesFilter,
    decide,
    expected_log_bayes_factor,
    likelihood,
    log_bayes_factor,
    permute_mask,
    permute_on_correction,
    predict,
    update,
)
from cqec.signals import SchemeConfig, generate_dataset

TAU_M = 1.9e-7
DT = 3.2e-8
V = TAU_M / DT
LAGS = (0.61, 0.25, 0.10, 0.05)

WHITE = BayesConfig(gamma_assumed=0.04e6, tau_m=TAU_M, dt=DT)
CORR = BayesConfig(gamma_assumed=0.04e6, tau_m=TAU_M, dt=DT,
                   lag_correlations=LAGS)


def test_config_validation():
    with pytest.raises(ValueError):
        BayesConfig(gamma_assumed=1.0, tau_m=TAU_M, dt=DT, history_depth=5)


def test_predict_identity():
    p = np.array([0.1, 0.2, 0.05, 0.05, 0.3, 0.1, 0.1, 0.1])
    assert np.allclose(predict(p, np.eye(8)), p)


def test_predict_delta_spreads_symmetrically():
    j = WHITE.transition()
    p = np.zeros(8)
    p[0] = 1.0
    out = predict(p, j)
    assert out[1] == pytest.approx(out[2]) == pytest.approx(out[4])
    assert out[1] == pytest.approx(j[0, 1])


def test_predict_uniform_invariant():
    j = WHITE.transition()
    uniform = np.full(8, 1 / 8)
    assert np.allclose(predict(uniform, j), uniform, atol=1e-12)


def test_likelihood_white_noise():
    # reduces to N(S, tau_m/dt) when no correlations are configured
    val = likelihood(0.4, 0, 1, [], WHITE)
    expected = math.exp(-(0.4 - 1.0) ** 2 / (2 * V)) / math.sqrt(2 * math.pi * V)
    assert val == pytest.approx(expected, rel=1e-12)


def test_likelihood_lag1_mean_shift():
    cfg = BayesConfig(gamma_assumed=0.04e6, tau_m=TAU_M, dt=DT,
                      lag_correlations=(0.61,), history_depth=1)
    m = 2.0
    # mu = S + rho (m - S)
    for state, channel in ((0, 1), (2, 1), (1, 2)):
        s = SYNDROME_TABLE[state, channel - 1]
        mu = s + 0.61 * (m - s)
        var = V * (1 - 0.61 ** 2)
        expected = math.exp(-(0.9 - mu) ** 2 / (2 * var)) \
            / math.sqrt(2 * math.pi * var)
        assert likelihood(0.9, state, channel, [m], cfg) == \
            pytest.approx(expected, rel=1e-9)


def test_likelihood_ratio_equals_bayes_factor():
    # lag-1 case: log L(+1)/L(-1) reproduces the closed-form evidence
    cfg = BayesConfig(gamma_assumed=0.04e6, tau_m=TAU_M, dt=DT,
                      lag_correlations=(0.61,), history_depth=1)
    rng = RngStream(4).generator()
    for _ in range(25):
        i_t, i_prev = rng.standard_normal(2) * 3
        ratio = math.log(likelihood(i_t, 0, 1, [i_prev], cfg)
                         / likelihood(i_t, 4, 1, [i_prev], cfg))
        assert ratio == pytest.approx(log_bayes_factor(i_t, i_prev, 0.61, V),
                                      rel=1e-9, abs=1e-12)


def test_update_flat_likelihood_returns_prior():
    prior = np.array([0.3, 0.1, 0.1, 0.1, 0.2, 0.05, 0.05, 0.1])
    # both channels at the syndrome-agnostic point I = 0 with no history:
    # the two syndrome hypotheses have equal density, so the posterior
    # equals the prior
    post = update(prior, 0.0, 0.0, [], [], WHITE)
    assert np.allclose(post, prior, atol=1e-12)
    assert post.sum() == pytest.approx(1.0, abs=1e-10)


def test_update_strong_signal_picks_syndrome():
    prior = np.full(8, 1 / 8)
    post = update(prior, -30.0, 30.0, [], [], WHITE)
    s1, s2 = SYNDROME_TABLE[np.argmax(post)]
    assert (s1, s2) == (-1, 1)


def test_posterior_convergence_on_clean_stream():
    cfg = WHITE
    filt = BayesFilter(cfg, [0])
    rng = RngStream(9).generator()
    true_state = 4
    for _ in range(400):
        sig = SYNDROME_TABLE[true_state] + rng.standard_normal(2) * math.sqrt(V)
        preds = filt.step(sig[None, :])
    post = filt.posterior[0]
    synd_mass = post[[s for s in range(8)
                      if tuple(SYNDROME_TABLE[s]) == (-1.0, 1.0)]].sum()
    assert synd_mass > 0.99
    assert preds[0] in (4, 3)


def test_permutation_examples():
    p = np.arange(8) / 28.0
    swapped = permute_on_correction(p, 2)
    assert swapped[0] == p[2] and swapped[2] == p[0]
    assert swapped[1] == p[3] and swapped[3] == p[1]
    assert swapped[4] == p[6] and swapped[5] == p[7]
    assert np.allclose(permute_on_correction(swapped, 2), p)
    uniform = np.full(8, 1 / 8)
    assert np.allclose(permute_on_correction(uniform, 1), uniform)


def test_permutation_equivariance():
    # permuting the posterior then updating with flipped hypotheses equals
    # updating then permuting
    rng = RngStream(14).generator()
    for mask in (1, 2, 4, 3, 7):
        prior = rng.random(8)
        prior /= prior.sum()
        i1, i2 = rng.standard_normal(2) * 2
        h1 = rng.standard_normal(2)
        h2 = rng.standard_normal(2)
        cfg = BayesConfig(gamma_assumed=0.04e6, tau_m=TAU_M, dt=DT,
                          lag_correlations=LAGS[:2], history_depth=2)
        a = permute_mask(update(prior, i1, i2, h1, h2, cfg), mask)
        b = update(permute_mask(prior, mask),
                   i1 * SYNDROME_TABLE[mask, 0], i2 * SYNDROME_TABLE[mask, 1],
                   h1 * SYNDROME_TABLE[mask, 0], h2 * SYNDROME_TABLE[mask, 1],
                   cfg)
        assert np.allclose(a, b, atol=1e-10)


def test_decide_ties_and_deltas():
    assert decide(np.eye(8)[0]) == 0
    assert decide(np.eye(8)[5]) == 5
    tie = np.zeros(8)
    tie[0] = tie[4] = 0.5
    assert decide(tie) == 0


def test_log_bayes_factor_white():
    assert log_bayes_factor(1.5, 0.7, 0.0, V) == pytest.approx(2 * 1.5 / V)
    with pytest.raises(ValueError):
        log_bayes_factor(1.0, 1.0, -1.0, V)


def test_log_bayes_factor_monte_carlo():
    # E|log phi| at the true syndrome matches 2(1-rho)/(tau(1+rho))
    rho = 0.5
    n = 10 ** 6
    rng = RngStream(21).generator()
    z1 = rng.standard_normal(n)
    z2 = rng.standard_normal(n)
    i_prev = 1.0 + math.sqrt(V) * z1
    i_t = 1.0 + math.sqrt(V) * (rho * z1 + math.sqrt(1 - rho ** 2) * z2)
    sample = log_bayes_factor(i_t, i_prev, rho, V)
    expected = expected_log_bayes_factor(rho, V)
    stderr = sample.std(ddof=1) / math.sqrt(n)
    assert abs(sample.mean() - expected) < 3 * stderr


def test_posterior_normalization_property():
    cfg = CORR
    filt = BayesFilter(cfg, np.arange(8))
    rng = RngStream(33).generator()
    for _ in range(200):
        filt.step(rng.standard_normal((8, 2)) * 2.0)
        total = filt.posterior.sum(axis=1)
        assert np.allclose(total, 1.0, atol=1e-10)


def test_wonham_limit_consistency():
    # J(dt) -> I + Q dt with O(dt^2) error as dt -> 0
    q = rate_matrix("bit-flip", 0.04e6)
    errs = []
    for dt in (1e-7, 5e-8):
        j = transition_matrix(q, dt).entries
        errs.append(np.abs(j - (np.eye(8) + q.entries * dt)).max())
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)


def test_active_corrects_injected_flip():
    cfg = BayesConfig(gamma_assumed=0.04e6, tau_m=TAU_M, dt=DT,
                      tau_streak=1)
    active = BayesActive(cfg, reference_state=7, batch=2)
    rng = RngStream(41).generator()
    fired = []
    state = np.array([7, 7])
    for t in range(300):
        if t == 50:
            state = np.array([5, 7])  # X2 on trajectory 0
        sig = SYNDROME_TABLE[state] + rng.standard_normal((2, 2)) * math.sqrt(V)
        corr = active.observe(sig)
        if corr[0]:
            fired.append((t, int(corr[0])))
            state[0] ^= corr[0]
    assert fired and fired[0][0] >= 50
    assert fired[0][1] == 2
    assert not np.any(state != 7) or fired[-1][1] != 0


def test_active_streak_requirement():
    # a single-step excursion does not trigger with tau_streak = 3
    cfg = BayesConfig(gamma_assumed=0.04e6, tau_m=TAU_M, dt=DT, tau_streak=3)
    active = BayesActive(cfg, reference_state=0, batch=1)
    clean = np.array([[1.0, 1.0]])
    bad = np.array([[-6.0, 1.0]])
    corr = active.observe(bad)  # one outlier step
    assert corr[0] == 0
    for _ in range(5):
        corr = active.observe(clean)
        assert corr[0] == 0
    # a persistent deviation does fire after the streak builds up
    fired = 0
    for _ in range(10):
        fired = max(fired, int(active.observe(bad)[0]))
    assert fired == 4


def test_optimality_against_threshold():
    # per-step accuracy of the matched Bayes filter is at least the
    # optimized double threshold's on Scheme A data
    from cqec.decoders.threshold import ThresholdConfig, ThresholdTracker

    cfg = SchemeConfig(scheme="A", gamma=0.04e6)
    ds = generate_dataset(cfg, np.tile(np.arange(8, dtype=np.uint8), 30),
                          625, seed=77)
    bayes = BayesFilter(BayesConfig(gamma_assumed=0.04e6, tau_m=TAU_M, dt=DT),
                        ds.initial_states)
    dt_cfg = ThresholdConfig(tau=0.3e-6, theta1=-0.8, theta2=0.8)
    tracker = ThresholdTracker(dt_cfg, ds.initial_states, DT)
    hits_b = hits_t = 0
    for t in range(ds.n_steps):
        hits_b += int((bayes.step(ds.signals[:, t]) == ds.true_states[:, t]).sum())
        hits_t += int((tracker.observe(ds.signals[:, t]) == ds.true_states[:, t]).sum())
    assert hits_b >= hits_t
