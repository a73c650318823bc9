import math

import numpy as np
import pytest

from cqec.core import RngStream
from cqec.decoders.threshold import (
    ThresholdActive,
    ThresholdConfig,
    ThresholdGrid,
    ThresholdTracker,
    classify,
    classify_batch,
    correct_and_reset,
    default_grid,
    filter_step,
    optimize_params,
    tracking_fidelity,
)
from cqec.signals import SchemeConfig, generate_dataset

DT = 3.2e-8
CFG = ThresholdConfig(tau=0.5e-6, theta1=-0.5, theta2=0.5)


def test_config_validation():
    with pytest.raises(ValueError):
        ThresholdConfig(tau=0.0, theta1=-0.5, theta2=0.5)
    with pytest.raises(ValueError):
        ThresholdConfig(tau=1e-6, theta1=0.5, theta2=-0.5)


def test_filter_fixed_point():
    assert filter_step(0.7, 0.7, 1e-6, DT) == pytest.approx(0.7)


def test_filter_closed_form_step():
    # one step with dt == tau from 0 toward 1
    out = filter_step(0.0, 1.0, DT, DT)
    assert out == pytest.approx(1 - math.exp(-1))
    assert out == pytest.approx(0.6321, abs=1e-4)


def test_filter_infinite_tau_freezes():
    assert filter_step(0.3, 5.0, 1e9, DT) == pytest.approx(0.3, abs=1e-12)


def test_filter_linearity():
    rng = RngStream(3).generator()
    a = rng.standard_normal(50)
    b = rng.standard_normal(50)
    fa = fb = fab = 0.0
    for t in range(50):
        fa = filter_step(fa, a[t], CFG.tau, DT)
        fb = filter_step(fb, b[t], CFG.tau, DT)
        fab = filter_step(fab, a[t] + b[t], CFG.tau, DT)
        assert fab == pytest.approx(fa + fb, abs=1e-12)


def test_classify_quadrants():
    assert classify((1.0, 1.0), CFG) == ((1, 1), None)
    assert classify((-0.9, 0.9), CFG) == ((-1, 1), 1)
    assert classify((-0.9, -0.9), CFG) == ((-1, -1), 2)
    assert classify((0.9, -0.9), CFG) == ((1, -1), 3)
    assert classify((0.2, 0.9), CFG) == (None, None)
    assert classify((0.9, 0.2), CFG) == (None, None)


def test_classify_batch_matches_scalar():
    rng = RngStream(5).generator()
    f = rng.uniform(-1.5, 1.5, size=(200, 2))
    s1, s2, certain = classify_batch(f, CFG)
    for i in range(200):
        synd, _ = classify(tuple(f[i]), CFG)
        if synd is None:
            assert not certain[i]
        else:
            assert certain[i]
            assert (s1[i], s2[i]) == synd


def test_correct_and_reset():
    out = correct_and_reset(np.array([0.3, -0.2]), (1.0, 1.0))
    assert np.array_equal(out, [1.0, 1.0])
    # idempotent
    assert np.array_equal(correct_and_reset(out, (1.0, 1.0)), out)


def test_crossing_time_closed_form():
    # noiseless jump -1 -> +1: filter crosses theta2 after
    # tau * ln(2 / (1 - theta2)), verified within one step
    tau = 0.5e-6
    cfg = ThresholdConfig(tau=tau, theta1=-0.6, theta2=0.6)
    filt = -1.0
    steps = 0
    while filt < cfg.theta2:
        filt = filter_step(filt, 1.0, tau, DT)
        steps += 1
    expected = tau * math.log(2 / (1 - cfg.theta2)) / DT
    assert abs(steps - expected) <= 1.0


def test_reset_prevents_retrigger():
    # after a detected flip, a decoder without filter reset re-triggers
    # within about tau/dt steps on clean signals
    cfg = ThresholdConfig(tau=0.4e-6, theta1=-0.5, theta2=0.5)
    signals = np.full((1, 400, 2), 1.0)
    signals[0, 100:, 0] = -1.0  # X1-like syndrome change, then constant

    corrections_with, corrections_without = [], []
    for reset in (True, False):
        filt = np.array([[1.0, 1.0]])
        believed = (1, 1)
        count = 0
        for t in range(400):
            filt = filter_step(filt, signals[:, t], cfg.tau, DT)
            s1, s2, certain = classify_batch(filt, cfg)
            if certain[0] and (s1[0], s2[0]) != believed:
                count += 1
                believed = (s1[0], s2[0])
                if reset:
                    filt = np.array([[s1[0], s2[0]]], dtype=float)
        (corrections_with if reset else corrections_without).append(count)
    assert corrections_with == [1]
    assert corrections_without[0] >= 1


def test_symmetric_detection_times():
    # +1 -> -1 and -1 -> +1 jumps should be detected with the same lag on
    # symmetric thresholds and mirrored noise
    cfg = ThresholdConfig(tau=0.3e-6, theta1=-0.4, theta2=0.4)
    rng = RngStream(8).generator()
    noise = rng.standard_normal((500, 300)) * 1.2
    lags_up, lags_down = [], []
    for sign, store in ((1.0, lags_down), (-1.0, lags_up)):
        means = np.full(300, sign)
        means[150:] = -sign
        for row in noise[:250]:
            filt = sign
            for t in range(150, 300):
                filt = filter_step(filt, means[t] + row[t], cfg.tau, DT)
                if (sign > 0 and filt <= cfg.theta1) or \
                        (sign < 0 and filt >= cfg.theta2):
                    store.append(t - 150)
                    break
    assert abs(np.mean(lags_up) - np.mean(lags_down)) < 3.0


def test_tracker_follows_jump():
    cfg = ThresholdConfig(tau=0.3e-6, theta1=-0.5, theta2=0.5)
    tracker = ThresholdTracker(cfg, [0], DT)
    for _ in range(50):
        preds = tracker.observe(np.array([[1.0, 1.0]]))
    assert preds[0] == 0
    for _ in range(100):
        preds = tracker.observe(np.array([[-1.0, 1.0]]))
    assert preds[0] == 4


def test_active_corrects_and_freezes():
    cfg = ThresholdConfig(tau=0.2e-6, theta1=-0.5, theta2=0.5)
    active = ThresholdActive(cfg, reference_state=7, batch=1, dt=DT,
                             tau_ignore=20)
    fired_at = None
    for t in range(120):
        corr = active.observe(np.array([[-1.0, 1.0]]))  # persistent X1 look
        if corr[0]:
            fired_at = t
            break
    assert fired_at is not None
    assert corr[0] == 4
    # frozen: repeated bad signals do not re-trigger during tau_ignore
    refire = [active.observe(np.array([[-1.0, 1.0]]))[0] for _ in range(19)]
    assert all(c == 0 for c in refire)


def test_optimize_params_single_point_grid():
    cfg = SchemeConfig(scheme="A", gamma=0.04e6)
    ds = generate_dataset(cfg, np.tile(np.arange(8, dtype=np.uint8), 15),
                          200, seed=2)
    grid = ThresholdGrid(taus=(0.5e-6,), theta2s=(0.5,))
    best = optimize_params(ds, grid)
    assert best == ThresholdConfig(tau=0.5e-6, theta1=-0.5, theta2=0.5)


def test_optimize_params_monotone_objective():
    order = []
    grid = ThresholdGrid(taus=(0.2e-6, 0.4e-6), theta2s=(0.3, 0.6))

    def objective(cfg):
        order.append(cfg)
        return cfg.tau * 1e6 + cfg.theta2  # monotone: max at (0.4us, 0.6)

    best = optimize_params(None, grid, objective=objective)
    assert best == ThresholdConfig(tau=0.4e-6, theta1=-0.6, theta2=0.6)
    assert len(order) == 4


def test_optimize_params_tie_breaks_to_larger_tau():
    grid = ThresholdGrid(taus=(0.2e-6, 0.4e-6), theta2s=(0.5,))
    best = optimize_params(None, grid, objective=lambda cfg: 1.0)
    assert best.tau == pytest.approx(0.4e-6)


def test_optimize_params_rejects_empty_grid():
    with pytest.raises(ValueError):
        optimize_params(None, ThresholdGrid(taus=(), theta2s=()))


def test_default_grid_shape():
    grid = default_grid()
    assert len(list(grid.configs())) == 20 * 9


def test_optimized_beats_strawman():
    cfg = SchemeConfig(scheme="A", gamma=0.04e6)
    train = generate_dataset(cfg, np.tile(np.arange(8, dtype=np.uint8), 40),
                             625, seed=31)
    held = generate_dataset(cfg, np.tile(np.arange(8, dtype=np.uint8), 40),
                            625, seed=32, stream_offset=10_000)
    grid = ThresholdGrid(taus=tuple(np.linspace(0.1e-6, 2.0e-6, 8)),
                         theta2s=(0.3, 0.5, 0.7, 0.9))
    best = optimize_params(train, grid)
    strawman = ThresholdConfig(tau=DT, theta1=-0.01, theta2=0.01)
    assert tracking_fidelity(held, best) > tracking_fidelity(held, strawman)
