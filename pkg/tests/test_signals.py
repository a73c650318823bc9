import math

import numpy as np
import pytest

from cqec.core import RngStream
from cqec.signals import (
    SchemeConfig,
    SignalProcess,
    generate_dataset,
    generate_injected_dataset,
    generate_trajectory,
)

GAMMA = 0.04e6


def test_default_variance_scale():
    cfg = SchemeConfig()
    assert cfg.variance == pytest.approx(5.94, rel=0.01)


def test_invalid_scheme_rejected():
    with pytest.raises(ValueError):
        SchemeConfig(scheme="E")


def test_scheme_a_quiet_trajectory():
    cfg = SchemeConfig(scheme="A", gamma=0.0)
    tr = generate_trajectory(cfg, 0, 100_000, 0, RngStream(2, 0))
    assert np.all(tr.true_states == 0)
    assert np.all(tr.means == 1.0)
    tol = 3 * math.sqrt(cfg.variance / 100_000)
    assert abs(tr.signals[:, 0].mean() - 1.0) < tol
    assert abs(tr.signals[:, 1].mean() - 1.0) < tol


def test_scheme_a_noise_variance():
    cfg = SchemeConfig(scheme="A", gamma=0.0)
    tr = generate_trajectory(cfg, 5, 50_000, 0, RngStream(9, 1))
    noise = tr.signals - tr.means
    n = noise.size
    v = cfg.variance
    assert abs(noise.var() - v) < 3 * math.sqrt(2.0 / n) * v


def test_drift_endpoints():
    cfg = SchemeConfig(scheme="D", drift_total=0.4, n_sequences=100)
    assert cfg.drift(0) == 0.0
    assert cfg.drift(100) == pytest.approx(0.4)
    quiet = SchemeConfig(scheme="A")
    assert quiet.drift(50) == 0.0


def test_drift_shifts_means_only():
    base = dict(gamma=GAMMA, n_sequences=10)
    cfg_c = SchemeConfig(scheme="C", **base)
    cfg_d = SchemeConfig(scheme="D", drift_total=0.4, **base)
    tr_c = generate_trajectory(cfg_c, 0, 400, 7, RngStream(21, 3))
    tr_d = generate_trajectory(cfg_d, 0, 400, 7, RngStream(21, 3))
    drift = cfg_d.drift(7)
    assert np.array_equal(tr_c.true_states, tr_d.true_states)
    assert np.allclose(tr_d.means - tr_c.means, drift)
    assert np.allclose(tr_d.signals - tr_c.signals, drift)
    assert np.allclose(tr_d.signals - tr_d.means, tr_c.signals - tr_c.means)


def test_scheme_c_injected_flip_follows_template():
    cfg = SchemeConfig(scheme="C", gamma=0.0)
    k = 37
    tr = generate_trajectory(cfg, 0, 200, 0, RngStream(4, 2),
                             injected_flip=(2, k))
    table = cfg.transient_means()
    pre, post = 0, 2
    assert np.all(tr.true_states[:k] == pre)
    assert np.all(tr.true_states[k:] == post)
    assert np.allclose(tr.means[k:k + 94], table[pre * 8 + post])
    assert np.allclose(tr.means[k + 94:], [-1.0, -1.0])


def test_overlapping_transient_restarts():
    cfg = SchemeConfig(scheme="C", gamma=0.0)
    proc = SignalProcess(cfg, [0], 150, seed=1, stream_ids=[0])
    table = cfg.transient_means()
    means = []
    for t in range(150):
        corr = None
        if t == 10:
            corr = np.array([4], dtype=np.uint8)   # X1
        elif t == 30:
            corr = np.array([2], dtype=np.uint8)   # X2 during the transient
        sig, state, _ = proc.step(corr)
        means.append(sig - proc.noise[0, t])
    means = np.asarray(means).reshape(150, 2)
    assert np.allclose(means[10:30], table[0 * 8 + 4][:20])
    assert np.allclose(means[30:124], table[4 * 8 + 6])


def test_byte_identical_regeneration():
    cfg = SchemeConfig(scheme="D", gamma=GAMMA, n_sequences=4)
    a = generate_trajectory(cfg, 3, 500, 2, RngStream(11, 7))
    b = generate_trajectory(cfg, 3, 500, 2, RngStream(11, 7))
    assert np.array_equal(a.signals, b.signals)
    assert np.array_equal(a.true_states, b.true_states)
    assert np.array_equal(a.means, b.means)


def test_dataset_chunking_invariant():
    cfg = SchemeConfig(scheme="B", gamma=GAMMA)
    initials = np.tile(np.arange(8, dtype=np.uint8), 3)
    ds1 = generate_dataset(cfg, initials, 120, seed=5, chunk=5)
    ds2 = generate_dataset(cfg, initials, 120, seed=5, chunk=1024)
    assert np.array_equal(ds1.signals, ds2.signals)
    assert np.array_equal(ds1.true_states, ds2.true_states)


def test_dataset_matches_scalar_generator():
    cfg = SchemeConfig(scheme="B", gamma=GAMMA)
    ds = generate_dataset(cfg, np.array([1, 6], dtype=np.uint8), 200, seed=8)
    for i, initial in enumerate((1, 6)):
        tr = generate_trajectory(ds.config, initial, 200, i, RngStream(8, i))
        assert np.array_equal(tr.signals, ds.signals[i])
        assert np.array_equal(tr.true_states, ds.true_states[i])


def test_damping_kind_only_decays():
    cfg = SchemeConfig(scheme="A", gamma=2e5, error_kind="damping")
    ds = generate_dataset(cfg, np.full(64, 7, dtype=np.uint8), 800, seed=3)
    s = ds.true_states.astype(np.int64)
    weight = (s & 1) + ((s >> 1) & 1) + ((s >> 2) & 1)
    assert np.all(np.diff(weight, axis=1) <= 0)
    assert weight.min() < 3  # some decay actually happened


def test_injected_dataset_contract():
    cfg = SchemeConfig(scheme="A", gamma=GAMMA)
    flat = generate_injected_dataset(cfg, 7, None, 16, 100, seed=6)
    assert np.all(flat.true_states == 7)
    flipped = generate_injected_dataset(cfg, 7, (2, 40), 16, 100, seed=6)
    changes = np.diff(flipped.true_states.astype(int), axis=1)
    rows, cols = np.nonzero(changes)
    assert np.array_equal(rows, np.arange(16))
    assert np.all(cols == 39)
    assert np.all(flipped.true_states[:, 40] == 5)
    with pytest.raises(ValueError):
        generate_injected_dataset(cfg, 7, (2, 100), 4, 100, seed=6)


def test_scheme_b_signal_autocovariance():
    cfg = SchemeConfig(scheme="B", gamma=0.0)
    tr = generate_trajectory(cfg, 0, 200_000, 0, RngStream(31, 0))
    noise = tr.signals[:, 0] - tr.means[:, 0]
    v = cfg.variance
    se = v * math.sqrt(3.0 / noise.size)
    for lag, rho in enumerate(cfg.lag_correlations, start=1):
        emp = np.mean(noise[lag:] * noise[:-lag])
        assert abs(emp - v * rho) < 3 * se


def test_process_guard_rails():
    cfg = SchemeConfig(scheme="A", gamma=GAMMA)
    proc = SignalProcess(cfg, [0], 3, seed=1, stream_ids=[0])
    for _ in range(3):
        proc.step()
    with pytest.raises(RuntimeError):
        proc.step()
    with pytest.raises(ValueError):
        SignalProcess(cfg, [9], 10, seed=1, stream_ids=[0])
    with pytest.raises(ValueError):
        SignalProcess(SchemeConfig(scheme="A", gamma=4e6), [0], 10,
                      seed=1, stream_ids=[0])
