"""Dataset persistence: a readable CSV form and a compact binary container.

Both formats hold one dataset per file: a header carrying the scheme
configuration and seed, then per trajectory a block of per-step records
(step, true_state, mean1, mean2, I1, I2).  Values round-trip losslessly
at double precision: the CSV writer uses shortest-repr floats and the
binary container stores fixed-width little-endian records.
"""

from __future__ import annotations

import io
import json
import struct
from pathlib import Path

import numpy as np

from .signals import Dataset, SchemeConfig
from .transients import ResonatorParams

_MAGIC = b"CQECDS1\x00"
_TRAJ_HEADER = struct.Struct("<qBq")
_STEP_DTYPE = np.dtype([("state", "u1"), ("mean", "<f8", (2,)),
                        ("signal", "<f8", (2,))])


def config_to_dict(cfg: SchemeConfig) -> dict:
    return {
        "scheme": cfg.scheme,
        "tau_m": cfg.tau_m,
        "dt": cfg.dt,
        "gamma": cfg.gamma,
        "error_kind": cfg.error_kind,
        "cov_lags": list(cfg.lag_correlations),
        "drift_total": cfg.drift_total,
        "n_sequences": cfg.n_sequences,
        "resonator": {
            "drive": cfg.resonator.drive,
            "detuning": cfg.resonator.detuning,
            "dispersive_shift": cfg.resonator.dispersive_shift,
            "linewidth": cfg.resonator.linewidth,
        },
    }


def config_from_dict(data: dict) -> SchemeConfig:
    res = data.get("resonator", {})
    return SchemeConfig(
        scheme=data["scheme"],
        tau_m=float(data["tau_m"]),
        dt=float(data["dt"]),
        gamma=float(data["gamma"]),
        error_kind=data.get("error_kind", "bit-flip"),
        lag_correlations=tuple(data.get("cov_lags", ())),
        resonator=ResonatorParams(
            drive=float(res.get("drive", 1.0)),
            detuning=float(res.get("detuning", 0.0)),
            dispersive_shift=float(res.get("dispersive_shift",
                                           ResonatorParams().dispersive_shift)),
            linewidth=float(res.get("linewidth", ResonatorParams().linewidth)),
        ),
        drift_total=float(data.get("drift_total", 0.4)),
        n_sequences=int(data.get("n_sequences", 1)),
    )


def _header_dict(ds: Dataset) -> dict:
    qubit, step = ds.injected if ds.injected is not None else (-1, -1)
    header = config_to_dict(ds.config)
    header.update({
        "seed": ds.seed,
        "injected_qubit": qubit,
        "injected_step": step,
    })
    return header


def _dataset_from_parts(header, stream_ids, initials, sequences,
                        states, means, signals) -> Dataset:
    injected = None
    if header.get("injected_qubit", -1) >= 0:
        injected = (int(header["injected_qubit"]), int(header["injected_step"]))
    return Dataset(
        config=config_from_dict(header),
        seed=int(header["seed"]),
        initial_states=initials,
        stream_ids=stream_ids,
        sequence_indices=sequences,
        true_states=states,
        means=means,
        signals=signals,
        injected=injected,
    )


# ----------------------------------------------------------------------
# CSV
# ----------------------------------------------------------------------

def write_csv(ds: Dataset, path) -> None:
    path = Path(path)
    with path.open("w") as fh:
        fh.write("# cqec-dataset v1 " + json.dumps(_header_dict(ds)) + "\n")
        fh.write("step,true_state,mean1,mean2,I1,I2\n")
        for i in range(ds.n_traj):
            fh.write(
                f"# trajectory index={i} stream_id={ds.stream_ids[i]} "
                f"initial={ds.initial_states[i]} "
                f"sequence={ds.sequence_indices[i]}\n"
            )
            rows = io.StringIO()
            for t in range(ds.n_steps):
                m = ds.means[i, t]
                s = ds.signals[i, t]
                rows.write(f"{t},{ds.true_states[i, t]},{float(m[0])!r},"
                           f"{float(m[1])!r},{float(s[0])!r},{float(s[1])!r}\n")
            fh.write(rows.getvalue())


def read_csv(path) -> Dataset:
    path = Path(path)
    header = None
    traj_meta = []
    rows = []
    per_traj_rows = []
    with path.open() as fh:
        first = fh.readline()
        if not first.startswith("# cqec-dataset v1 "):
            raise ValueError(f"{path} is not a cqec dataset CSV")
        header = json.loads(first[len("# cqec-dataset v1 "):])
        fh.readline()  # column header
        for line in fh:
            if line.startswith("# trajectory "):
                if rows:
                    per_traj_rows.append(rows)
                    rows = []
                meta = dict(kv.split("=") for kv in line[2:].split()[1:])
                traj_meta.append(meta)
            else:
                parts = line.rstrip("\n").split(",")
                rows.append((int(parts[1]), float(parts[2]), float(parts[3]),
                             float(parts[4]), float(parts[5])))
        if rows:
            per_traj_rows.append(rows)
    n = len(traj_meta)
    if n == 0:
        raise ValueError(f"{path} holds no trajectories")
    t_len = len(per_traj_rows[0])
    states = np.empty((n, t_len), dtype=np.uint8)
    means = np.empty((n, t_len, 2))
    signals = np.empty((n, t_len, 2))
    for i, rows_i in enumerate(per_traj_rows):
        arr = np.asarray(rows_i)
        states[i] = arr[:, 0].astype(np.uint8)
        means[i] = arr[:, 1:3]
        signals[i] = arr[:, 3:5]
    stream_ids = np.asarray([int(m["stream_id"]) for m in traj_meta])
    initials = np.asarray([int(m["initial"]) for m in traj_meta], dtype=np.uint8)
    sequences = np.asarray([int(m["sequence"]) for m in traj_meta])
    return _dataset_from_parts(header, stream_ids, initials, sequences,
                               states, means, signals)


# ----------------------------------------------------------------------
# Binary container
# ----------------------------------------------------------------------

def write_binary(ds: Dataset, path) -> None:
    path = Path(path)
    header = json.dumps(_header_dict(ds)).encode()
    with path.open("wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(struct.pack("<II", ds.n_traj, ds.n_steps))
        records = np.empty(ds.n_steps, dtype=_STEP_DTYPE)
        for i in range(ds.n_traj):
            fh.write(_TRAJ_HEADER.pack(int(ds.stream_ids[i]),
                                       int(ds.initial_states[i]),
                                       int(ds.sequence_indices[i])))
            records["state"] = ds.true_states[i]
            records["mean"] = ds.means[i]
            records["signal"] = ds.signals[i]
            fh.write(records.tobytes())


def read_binary(path) -> Dataset:
    path = Path(path)
    with path.open("rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ValueError(f"{path} is not a cqec binary dataset")
        (header_len,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(header_len))
        n, t_len = struct.unpack("<II", fh.read(8))
        stream_ids = np.empty(n, dtype=np.int64)
        initials = np.empty(n, dtype=np.uint8)
        sequences = np.empty(n, dtype=np.int64)
        states = np.empty((n, t_len), dtype=np.uint8)
        means = np.empty((n, t_len, 2))
        signals = np.empty((n, t_len, 2))
        block = _STEP_DTYPE.itemsize * t_len
        for i in range(n):
            stream_ids[i], initials[i], sequences[i] = _TRAJ_HEADER.unpack(
                fh.read(_TRAJ_HEADER.size))
            records = np.frombuffer(fh.read(block), dtype=_STEP_DTYPE)
            states[i] = records["state"]
            means[i] = records["mean"]
            signals[i] = records["signal"]
    return _dataset_from_parts(header, stream_ids, initials, sequences,
                               states, means, signals)


def write_dataset(ds: Dataset, path, fmt: str | None = None) -> None:
    """Write in the format implied by the extension (.csv or .bin)."""
    fmt = fmt or ("csv" if str(path).endswith(".csv") else "bin")
    if fmt == "csv":
        write_csv(ds, path)
    elif fmt == "bin":
        write_binary(ds, path)
    else:
        raise ValueError(f"unknown dataset format {fmt!r}")


def read_dataset(path) -> Dataset:
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
    return read_binary(path) if magic == _MAGIC else read_csv(path)
