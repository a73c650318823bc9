import numpy as np
import pytest

from cqec.dataio import (
    config_from_dict,
    config_to_dict,
    read_csv,
    read_dataset,
    write_binary,
    write_csv,
    write_dataset,
)
from cqec.signals import SchemeConfig, generate_dataset, generate_injected_dataset


@pytest.fixture(scope="module")
def dataset():
    cfg = SchemeConfig(scheme="D", gamma=0.04e6, n_sequences=6)
    return generate_dataset(cfg, np.array([0, 7, 3], dtype=np.uint8), 50, seed=12)


def _assert_equal(a, b):
    assert a.config == b.config
    assert a.seed == b.seed
    assert a.injected == b.injected
    assert np.array_equal(a.initial_states, b.initial_states)
    assert np.array_equal(a.stream_ids, b.stream_ids)
    assert np.array_equal(a.sequence_indices, b.sequence_indices)
    assert np.array_equal(a.true_states, b.true_states)
    assert np.array_equal(a.means, b.means)
    assert np.array_equal(a.signals, b.signals)


def test_config_dict_roundtrip():
    cfg = SchemeConfig(scheme="C", gamma=1.25e5, lag_correlations=(0.5, 0.1))
    assert config_from_dict(config_to_dict(cfg)) == cfg


def test_csv_roundtrip(dataset, tmp_path):
    path = tmp_path / "ds.csv"
    write_csv(dataset, path)
    _assert_equal(read_csv(path), dataset)


def test_binary_roundtrip(dataset, tmp_path):
    path = tmp_path / "ds.bin"
    write_binary(dataset, path)
    _assert_equal(read_dataset(path), dataset)


def test_injected_metadata_roundtrip(tmp_path):
    cfg = SchemeConfig(scheme="A", gamma=0.04e6)
    ds = generate_injected_dataset(cfg, 7, (2, 10), 4, 30, seed=5)
    path = tmp_path / "inj.csv"
    write_dataset(ds, path, fmt="csv")
    back = read_dataset(path)
    _assert_equal(back, ds)
    assert back.injected == (2, 10)


def test_format_detection(dataset, tmp_path):
    csv_path = tmp_path / "auto.csv"
    bin_path = tmp_path / "auto.bin"
    write_dataset(dataset, csv_path)
    write_dataset(dataset, bin_path)
    _assert_equal(read_dataset(csv_path), read_dataset(bin_path))


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"not a dataset")
    with pytest.raises(ValueError):
        read_dataset(path)
