"""Flat hierarchical key-value experiment configuration files.

Format: one `key = value` pair per line, `#` comments, blank lines
ignored.  Dots namespace the keys (threshold.tau_us, bayes.kind,
train.epochs ...).  Values parse as bool / int / float / string, and
comma-separated lists of those.  Every key can be overridden by the
matching CLI flag; the resolved configuration lands in the run manifest.

Recognized keys
---------------
task, scheme, decoder(s), gamma, trajectories, seed, workers, out,
duration_us
threshold.tau_us, threshold.theta1, threshold.theta2
bayes.gamma_assumed, bayes.history_depth, bayes.tau_ignore_steps,
bayes.tau_streak_steps, bayes.kind
rnn.checkpoint, rnn.hidden_size, rnn.cell
train.trajectories, train.duration_us, train.epochs, train.batch_size,
train.learning_rate, train.hidden_size, train.cell, train.seed,
train.s0_encoding
anneal.omega0_factor
detect.qubit, detect.time_us
"""

from __future__ import annotations

from pathlib import Path


def _parse_scalar(raw: str):
    raw = raw.strip()
    low = raw.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw.strip("\"'")


def parse_value(raw: str):
    raw = raw.strip()
    if "," in raw:
        return tuple(_parse_scalar(part) for part in raw.split(",") if part.strip())
    return _parse_scalar(raw)


def load_config(path) -> dict:
    """Parse a config file into a flat {dotted.key: value} dict."""
    path = Path(path)
    out: dict = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', "
                             f"got {stripped!r}")
        key, raw = stripped.split("=", 1)
        out[key.strip()] = parse_value(raw)
    return out


def dump_config(values: dict) -> str:
    lines = []
    for key in sorted(values):
        value = values[key]
        if isinstance(value, (tuple, list)):
            value = ",".join(str(v) for v in value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def as_tuple(value) -> tuple:
    if value is None:
        return ()
    if isinstance(value, (tuple, list)):
        return tuple(value)
    return (value,)
