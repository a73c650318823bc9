"""Command line interface.

Subcommands: `generate` (datasets), `train` (network decoder),
`evaluate` (tracking / t1 / bitflip / detection), `anneal`, and
`report` (figures + summary from a results directory).  Every flag can
also come from a `--config` file (see cqec.config); flags win over the
file.  Each run writes a manifest.json with the fully resolved
configuration next to its outputs.
"""

from __future__ import annotations

import sys
from dataclasses import asdict
from pathlib import Path

import click
import numpy as np

from . import __version__
from .config import as_tuple, load_config
from .dataio import config_to_dict, write_dataset
from .decoders import rnn as rnn_mod
from .decoders import threshold as dt_mod
from .experiments import (
    ExperimentSpec,
    make_training_dataset,
    run_experiment,
    scheme_config,
    US,
)
from .reports import emit_report, render_figures, write_manifest
from .signals import generate_dataset, generate_injected_dataset


def _merge(config_path, flag_values: dict) -> dict:
    resolved = dict(load_config(config_path)) if config_path else {}
    for key, value in flag_values.items():
        if value is not None:
            resolved[key] = value
    return resolved


def _steps_for(duration_us: float) -> int:
    return int(round(duration_us * US / scheme_config("A", 0.0).dt))


common_options = [
    click.option("--scheme", type=click.Choice(["A", "B", "C", "D"]),
                 default=None, help="simulation scheme"),
    click.option("--gamma", "gammas", multiple=True, type=float,
                 help="per-qubit error rate in 1/us (repeatable)"),
    click.option("--trajectories", type=int, default=None),
    click.option("--seed", type=int, default=None),
    click.option("--workers", type=int, default=None),
    click.option("--config", "config_path",
                 type=click.Path(exists=True, dir_okay=False), default=None),
    click.option("--out", "out_dir", type=click.Path(file_okay=False),
                 default=None),
]


def add_options(options):
    def wrap(fn):
        for option in reversed(options):
            fn = option(fn)
        return fn
    return wrap


@click.group()
@click.version_option(version=__version__)
def main():
    """Continuous QEC testbed for the three-qubit bit-flip code."""


@main.command()
@add_options(common_options)
@click.option("--duration-us", type=float, default=None)
@click.option("--initial", type=int, default=None,
              help="initial basis state 0..7 (default: spread over all)")
@click.option("--inject-qubit", type=int, default=None)
@click.option("--inject-time-us", type=float, default=None)
@click.option("--format", "fmt", type=click.Choice(["csv", "bin"]),
              default=None)
def generate(scheme, gammas, trajectories, seed, workers, config_path,
             out_dir, duration_us, initial, inject_qubit, inject_time_us, fmt):
    """Generate a labeled measurement dataset and write it to a file."""
    cfg = _merge(config_path, {
        "scheme": scheme, "gamma": gammas or None,
        "trajectories": trajectories, "seed": seed, "out": out_dir,
        "duration_us": duration_us, "initial": initial,
        "inject.qubit": inject_qubit, "inject.time_us": inject_time_us,
        "format": fmt,
    })
    scheme = cfg.get("scheme", "A")
    gamma = as_tuple(cfg.get("gamma", (0.04,)))[0]
    n_traj = int(cfg.get("trajectories", 1000))
    seed = int(cfg.get("seed", 1))
    duration = float(cfg.get("duration_us", 20.0))
    out = Path(cfg.get("out", "datasets"))
    out.mkdir(parents=True, exist_ok=True)
    fmt = cfg.get("format", "bin")

    scfg = scheme_config(scheme, gamma, n_sequences=n_traj)
    steps = int(round(duration * US / scfg.dt))
    if cfg.get("inject.qubit") is not None:
        k = int(round(float(cfg.get("inject.time_us", 3.0)) * US / scfg.dt))
        ds = generate_injected_dataset(scfg, int(cfg.get("initial", 7)),
                                       (int(cfg["inject.qubit"]), k),
                                       n_traj, steps, seed)
    else:
        if cfg.get("initial") is not None:
            initials = np.full(n_traj, int(cfg["initial"]), dtype=np.uint8)
        else:
            initials = np.tile(np.arange(8, dtype=np.uint8),
                               n_traj // 8 + 1)[:n_traj]
        ds = generate_dataset(scfg, initials, steps, seed)
    path = out / f"dataset_{scheme}_g{gamma}_{fmt}.{'csv' if fmt == 'csv' else 'bin'}"
    write_dataset(ds, path, fmt=fmt)
    write_manifest(out, {"command": "generate", "version": __version__,
                         "config": config_to_dict(scfg), "seed": seed,
                         "trajectories": n_traj, "steps": steps,
                         "path": str(path)})
    click.echo(f"wrote {path}")


@main.command()
@add_options(common_options)
@click.option("--duration-us", type=float, default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--hidden-size", type=int, default=None)
@click.option("--cell", type=click.Choice(["lstm", "gru"]), default=None)
@click.option("--checkpoint", type=click.Path(), default=None,
              help="output checkpoint path (.npz)")
def train(scheme, gammas, trajectories, seed, workers, config_path, out_dir,
          duration_us, epochs, hidden_size, cell, checkpoint):
    """Train the recurrent decoder on synthesized trajectories."""
    cfg = _merge(config_path, {
        "scheme": scheme, "gamma": gammas or None,
        "train.trajectories": trajectories, "train.seed": seed,
        "out": out_dir, "train.duration_us": duration_us,
        "train.epochs": epochs, "train.hidden_size": hidden_size,
        "train.cell": cell, "rnn.checkpoint": checkpoint,
    })
    scheme = cfg.get("scheme", "A")
    gammas = as_tuple(cfg.get("gamma", (0.02, 0.04, 0.08)))
    n_traj = int(cfg.get("train.trajectories", 20000))
    seed = int(cfg.get("train.seed", 1))
    duration = float(cfg.get("train.duration_us", 20.0))
    out = Path(cfg.get("out", "runs"))
    out.mkdir(parents=True, exist_ok=True)

    train_cfg = rnn_mod.TrainConfig(
        hidden_size=int(cfg.get("train.hidden_size", 32)),
        cell=cfg.get("train.cell", "lstm"),
        batch_size=int(cfg.get("train.batch_size", 64)),
        learning_rate=float(cfg.get("train.learning_rate", 2e-3)),
        seed=seed,
        s0_encoding=cfg.get("train.s0_encoding", "onehot"),
        stages=((125, 2), (None, int(cfg.get("train.epochs", 6)))),
        tbptt_chunk=125, clip_norm=1.0, stage_lr_decay=0.7,
    )
    ds = make_training_dataset(scheme, gammas, n_traj, duration, seed)
    result = rnn_mod.train(ds, train_cfg)
    ckpt = Path(cfg.get("rnn.checkpoint") or out / f"rnn_{scheme}.npz")
    rnn_mod.save_checkpoint(result, ckpt)
    rnn_mod.save_curves_csv(result.curves, out / f"curves_{scheme}.csv")
    write_manifest(out, {"command": "train", "version": __version__,
                         "scheme": scheme, "gammas_per_us": list(gammas),
                         "trajectories": n_traj, "duration_us": duration,
                         "train": asdict(train_cfg), "checkpoint": str(ckpt)})
    last = result.curves[-1]
    click.echo(f"wrote {ckpt} (final val accuracy "
               f"{last.get('val_accuracy', float('nan')):.4f})")


def _experiment_spec(cfg: dict, task: str) -> ExperimentSpec:
    decoders = as_tuple(cfg.get("decoder", ("dt", "bayes")))
    dt_config = None
    if "threshold.tau_us" in cfg:
        dt_config = dt_mod.ThresholdConfig(
            tau=float(cfg["threshold.tau_us"]) * 1e-6,
            theta1=float(cfg.get("threshold.theta1", -0.5)),
            theta2=float(cfg.get("threshold.theta2", 0.5)))
    rnn_result = None
    if "rnn" in decoders:
        ckpt = cfg.get("rnn.checkpoint")
        if not ckpt:
            raise click.UsageError(
                "decoder 'rnn' needs rnn.checkpoint (train first)")
        rnn_result = rnn_mod.load_checkpoint(ckpt)
    return ExperimentSpec(
        task=task,
        scheme=cfg.get("scheme", "A"),
        decoders=decoders,
        gammas_per_us=as_tuple(cfg.get("gamma", (0.04,))),
        duration_us=cfg.get("duration_us"),
        n_traj=int(cfg.get("trajectories", 3000)),
        seed=int(cfg.get("seed", 1)),
        workers=int(cfg.get("workers", 1)),
        dt_config=dt_config,
        bayes_gamma_per_us=cfg.get("bayes.gamma_assumed"),
        history_depth=int(cfg.get("bayes.history_depth", 4)),
        tau_ignore=cfg.get("bayes.tau_ignore_steps"),
        tau_streak=cfg.get("bayes.tau_streak_steps"),
        rnn=rnn_result,
        omega0_factor=float(cfg.get("anneal.omega0_factor", 0.04)),
        inject_qubit=int(cfg.get("detect.qubit", 2)),
        inject_time_us=float(cfg.get("detect.time_us", 3.0)),
    )


@main.command()
@add_options(common_options)
@click.option("--task", type=click.Choice(["tracking", "t1", "bitflip",
                                           "detection"]), required=True)
@click.option("--decoder", "decoders", multiple=True,
              type=click.Choice(["dt", "bayes", "rnn"]))
@click.option("--duration-us", type=float, default=None)
@click.option("--rnn-checkpoint", type=click.Path(exists=True), default=None)
def evaluate(scheme, gammas, trajectories, seed, workers, config_path,
             out_dir, task, decoders, duration_us, rnn_checkpoint):
    """Run a quantum-memory experiment family and write reports."""
    task_names = {"tracking": "tracking", "t1": "t1-extension",
                  "bitflip": "bit-flip-protection",
                  "detection": "detection-stats"}
    cfg = _merge(config_path, {
        "scheme": scheme, "gamma": gammas or None,
        "trajectories": trajectories, "seed": seed, "workers": workers,
        "out": out_dir, "decoder": decoders or None,
        "duration_us": duration_us, "rnn.checkpoint": rnn_checkpoint,
    })
    spec = _experiment_spec(cfg, task_names[task])
    out = Path(cfg.get("out", f"results/{task}"))
    reports = run_experiment(spec)
    for report in reports:
        emit_report(report, out)
    write_manifest(out, {"command": f"evaluate:{task}",
                         "version": __version__, **_spec_manifest(spec)})
    click.echo(f"wrote {len(reports)} report(s) under {out}")


@main.command()
@add_options(common_options)
@click.option("--decoder", "decoders", multiple=True,
              type=click.Choice(["dt", "bayes", "rnn"]))
@click.option("--duration-us", type=float, default=None)
@click.option("--omega0-factor", type=float, default=None)
@click.option("--rnn-checkpoint", type=click.Path(exists=True), default=None)
def anneal(scheme, gammas, trajectories, seed, workers, config_path, out_dir,
           decoders, duration_us, omega0_factor, rnn_checkpoint):
    """Quantum annealing under bit-flip errors with active correction."""
    cfg = _merge(config_path, {
        "scheme": scheme, "gamma": gammas or None,
        "trajectories": trajectories, "seed": seed, "workers": workers,
        "out": out_dir, "decoder": decoders or None,
        "duration_us": duration_us, "anneal.omega0_factor": omega0_factor,
        "rnn.checkpoint": rnn_checkpoint,
    })
    spec = _experiment_spec(cfg, "annealing")
    out = Path(cfg.get("out", "results/annealing"))
    for report in run_experiment(spec):
        emit_report(report, out)
    write_manifest(out, {"command": "anneal", "version": __version__,
                         **_spec_manifest(spec)})
    click.echo(f"wrote annealing report under {out}")


@main.command()
@click.option("--results", "results_dir", type=click.Path(exists=True),
              required=True, help="directory of report CSVs")
@click.option("--out", "out_dir", type=click.Path(file_okay=False),
              default=None)
def report(results_dir, out_dir):
    """Render figures from result CSVs alongside the delimited output."""
    made = render_figures(results_dir, out_dir)
    for path in made:
        click.echo(f"rendered {path}")
    if not made:
        click.echo("no recognized report CSVs found", err=True)
        sys.exit(1)


def _spec_manifest(spec: ExperimentSpec) -> dict:
    data = asdict(spec)
    data["rnn"] = "checkpoint" if spec.rnn is not None else None
    return data


if __name__ == "__main__":
    main()
