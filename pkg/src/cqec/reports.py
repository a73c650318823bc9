"""Experiment outputs: delimited reports, manifests, and rendered figures.

Every metric table is a `Report`: named columns in a deterministic
order, one stderr column for every Monte Carlo mean, plus a metadata
dict recording the resolved configuration.  Reports serialize to CSV
(column order = insertion order) and to JSON; `render_figures` draws the
standard comparison plots from a results directory into PNG files next
to the delimited output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class Report:
    name: str
    columns: dict[str, list] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def add_row(self, **values) -> None:
        if not self.columns:
            for key in values:
                self.columns[key] = []
        if set(values) != set(self.columns):
            raise ValueError(
                f"row keys {sorted(values)} do not match report columns "
                f"{sorted(self.columns)}")
        for key in self.columns:
            self.columns[key].append(values[key])

    @property
    def n_rows(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0


def _scalar(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value


def emit_report(report: Report, out_dir, formats=("csv", "json")) -> list[Path]:
    """Write a report deterministically; returns the created paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    try:
        if "csv" in formats:
            path = out_dir / f"{report.name}.csv"
            with path.open("w") as fh:
                fh.write(",".join(report.columns) + "\n")
                for i in range(report.n_rows):
                    fh.write(",".join(
                        repr(_scalar(report.columns[k][i]))
                        if isinstance(_scalar(report.columns[k][i]), float)
                        else str(_scalar(report.columns[k][i]))
                        for k in report.columns) + "\n")
            written.append(path)
        if "json" in formats:
            path = out_dir / f"{report.name}.json"
            payload = {
                "name": report.name,
                "meta": report.meta,
                "columns": {k: [_scalar(v) for v in vals]
                            for k, vals in report.columns.items()},
            }
            path.write_text(json.dumps(payload, indent=1, sort_keys=False))
            written.append(path)
    except OSError as exc:
        raise OSError(f"failed writing report {report.name!r} under "
                      f"{out_dir}: {exc}") from exc
    return written


def read_report_csv(path) -> Report:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().rstrip("\n").split(",")
        columns = {k: [] for k in header}
        for line in fh:
            for key, raw in zip(header, line.rstrip("\n").split(",")):
                try:
                    value = int(raw)
                except ValueError:
                    try:
                        value = float(raw)
                    except ValueError:
                        value = raw
                columns[key].append(value)
    return Report(name=path.stem, columns=columns)


def write_manifest(out_dir, config: dict) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(config, indent=1, sort_keys=True, default=str))
    return path


# ----------------------------------------------------------------------
# Figures
# ----------------------------------------------------------------------

_DECODER_STYLE = {
    "dt": ("tab:green", "double threshold"),
    "bayes": ("tab:orange", "Bayesian"),
    "rnn": ("tab:blue", "RNN"),
    "uncorrected": ("tab:red", "uncorrected"),
    "bare": ("tab:purple", "bare qubit"),
}


def _style(decoder: str):
    return _DECODER_STYLE.get(decoder, ("tab:gray", decoder))


def _plt():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def render_figures(results_dir, out_dir=None) -> list[Path]:
    """Render PNG figures for every recognized report in a directory."""
    results_dir = Path(results_dir)
    out_dir = Path(out_dir) if out_dir else results_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    made = []
    renderers = {
        "tracking": _render_tracking,
        "population": _render_population,
        "logical_rate": _render_logical_rate,
        "detection": _render_detection,
        "annealing": _render_annealing,
    }
    for csv_path in sorted(results_dir.glob("*.csv")):
        for prefix, renderer in renderers.items():
            if csv_path.stem.startswith(prefix):
                made.append(renderer(read_report_csv(csv_path), out_dir))
                break
    return made


def _render_tracking(report: Report, out_dir: Path) -> Path:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    cols = report.columns
    for decoder in sorted(set(cols["decoder"])):
        idx = [i for i, d in enumerate(cols["decoder"]) if d == decoder]
        gammas = [cols["gamma_per_us"][i] for i in idx]
        fid = [cols["fidelity"][i] for i in idx]
        err = [cols["fidelity_stderr"][i] for i in idx]
        color, label = _style(decoder)
        ax.errorbar(gammas, fid, yerr=err, marker="o", color=color, label=label)
    ax.set_xlabel(r"$\gamma$ (1/$\mu$s)")
    ax.set_ylabel("final fidelity")
    ax.legend()
    fig.tight_layout()
    path = out_dir / f"{report.name}.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _render_population(report: Report, out_dir: Path) -> Path:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    cols = report.columns
    for decoder in sorted(set(cols["decoder"])):
        idx = [i for i, d in enumerate(cols["decoder"]) if d == decoder]
        t = [cols["time_us"][i] for i in idx]
        p = [cols["p_exc"][i] for i in idx]
        color, label = _style(decoder)
        ax.plot(t, p, color=color, label=label)
    ax.set_xlabel(r"t ($\mu$s)")
    ax.set_ylabel(r"$P_{exc}$")
    ax.set_ylim(0, 1.02)
    ax.legend()
    fig.tight_layout()
    path = out_dir / f"{report.name}.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _render_logical_rate(report: Report, out_dir: Path) -> Path:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    cols = report.columns
    for decoder in sorted(set(cols["decoder"])):
        idx = [i for i, d in enumerate(cols["decoder"]) if d == decoder]
        g = [cols["gamma_per_us"][i] for i in idx]
        rate = [cols["logical_rate_per_us"][i] for i in idx]
        color, label = _style(decoder)
        ax.loglog(g, rate, marker="s", color=color, label=label)
    ax.set_xlabel(r"$\gamma$ (1/$\mu$s)")
    ax.set_ylabel(r"$\Gamma_L$ (1/$\mu$s)")
    ax.legend()
    fig.tight_layout()
    path = out_dir / f"{report.name}.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _render_detection(report: Report, out_dir: Path) -> Path:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    cols = report.columns
    for decoder in sorted(set(cols["decoder"])):
        idx = [i for i, d in enumerate(cols["decoder"]) if d == decoder]
        t = [cols["detection_time_us"][i] for i in idx]
        density = [cols["density"][i] for i in idx]
        color, label = _style(decoder)
        ax.plot(t, density, color=color, label=label, drawstyle="steps-mid")
    ax.set_xlabel(r"detection time ($\mu$s)")
    ax.set_ylabel("density")
    ax.legend()
    fig.tight_layout()
    path = out_dir / f"{report.name}.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _render_annealing(report: Report, out_dir: Path) -> Path:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    cols = report.columns
    for decoder in sorted(set(cols["decoder"])):
        idx = [i for i, d in enumerate(cols["decoder"]) if d == decoder]
        g = [cols["gamma_per_us"][i] for i in idx]
        r = [cols["reduction_factor"][i] for i in idx]
        err = [cols["reduction_factor_stderr"][i] for i in idx]
        color, label = _style(decoder)
        ax.errorbar(g, r, yerr=err, marker="o", color=color, label=label)
    ax.axhline(1.0, color="k", lw=0.8, ls="--")
    ax.set_xlabel(r"$\gamma$ (1/$\mu$s)")
    ax.set_ylabel("reduction factor R")
    ax.set_xscale("log")
    ax.legend()
    fig.tight_layout()
    path = out_dir / f"{report.name}.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
