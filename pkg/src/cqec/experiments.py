"""Experiment harness: the paper's four task families at desk scale.

Each task runs an ensemble of trajectories and reduces to a `Report`.
Trajectory i always draws from RngStream(seed, stream_offset + i), so
every experiment is bit-reproducible from its spec and the worker count
only partitions the ensemble without changing any number.

Tasks
-----
tracking               passive decoding, final-state fidelity vs gamma
t1-extension           active correction of |111> under amplitude damping
bit-flip-protection    active correction of |111> under bit flips,
                       with the initial logical error rate fit
detection-stats        detection times and false alarms on injected flips
annealing              encoded vs bare annealing, reduction factor
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .anneal import AnnealConfig, analytic_pexc, reduction_factor, run_bare, run_encoded
from .core import EXCITED_STATES, QUBIT_MASKS, simulate_error_chain, RngStream
from .decoders import bayes as bayes_mod
from .decoders import rnn as rnn_mod
from .decoders import threshold as dt_mod
from .reports import Report
from .signals import Dataset, SchemeConfig, SignalProcess, generate_dataset
from .transients import TEMPLATE_STEPS

GAMMA_UNIT = 1e6            # CLI gammas are 1/us, internals 1/s
US = 1e-6
GAMMA_M_REFERENCE = 4.7e6   # quoted measurement strength, 1/s

TASK_DURATIONS_US = {
    "tracking": 20.0,
    "t1-extension": 120.0,
    "bit-flip-protection": 5.0,
    "detection-stats": 10.0,
    "annealing": 120.0,
}

# post-correction input freeze and required prediction streak, per scheme
WRAPPER_DEFAULTS = {"A": (0, 1), "B": (0, 1),
                    "C": (TEMPLATE_STEPS, 3), "D": (TEMPLATE_STEPS, 3)}


@dataclass
class ExperimentSpec:
    """Resolved description of one experiment run."""

    task: str
    scheme: str = "A"
    decoders: tuple[str, ...] = ("dt", "bayes", "rnn")
    gammas_per_us: tuple[float, ...] = (0.04,)
    duration_us: float | None = None
    n_traj: int = 3000
    seed: int = 1
    workers: int = 1
    dt_config: dt_mod.ThresholdConfig | None = None
    bayes_gamma_per_us: float | None = None   # None: matched to the truth
    history_depth: int = 4
    tau_ignore: int | None = None             # None: scheme default
    tau_streak: int | None = None
    rnn: rnn_mod.TrainResult | None = None
    omega0_factor: float = 0.04
    inject_qubit: int = 2
    inject_time_us: float = 3.0

    def __post_init__(self):
        if self.task not in TASK_DURATIONS_US:
            raise ValueError(f"unknown task {self.task!r}")
        if self.n_traj < 100:
            raise ValueError("n_traj must be at least 100")
        if not self.gammas_per_us:
            raise ValueError("gamma sweep must be non-empty")
        for name in self.decoders:
            if name not in ("dt", "bayes", "rnn"):
                raise ValueError(f"unknown decoder {name!r}")

    @property
    def resolved_duration_us(self) -> float:
        return self.duration_us if self.duration_us is not None \
            else TASK_DURATIONS_US[self.task]

    def wrapper_params(self) -> tuple[int, int]:
        ti, ts = WRAPPER_DEFAULTS[self.scheme]
        if self.tau_ignore is not None:
            ti = self.tau_ignore
        if self.tau_streak is not None:
            ts = self.tau_streak
        return ti, ts


def scheme_config(scheme: str, gamma_per_us: float,
                  error_kind: str = "bit-flip",
                  n_sequences: int = 1) -> SchemeConfig:
    return SchemeConfig(scheme=scheme, gamma=gamma_per_us * GAMMA_UNIT,
                        error_kind=error_kind, n_sequences=n_sequences)


def _steps(spec: ExperimentSpec, cfg: SchemeConfig) -> int:
    return int(round(spec.resolved_duration_us * US / cfg.dt))


def _bayes_config(spec: ExperimentSpec, cfg: SchemeConfig, gamma_per_us: float,
                  kind: str) -> bayes_mod.BayesConfig:
    ti, ts = spec.wrapper_params()
    assumed = spec.bayes_gamma_per_us
    lags = cfg.lag_correlations if cfg.correlated else ()
    return bayes_mod.BayesConfig(
        gamma_assumed=(assumed if assumed is not None else gamma_per_us)
        * GAMMA_UNIT,
        tau_m=cfg.tau_m, dt=cfg.dt, lag_correlations=lags, kind=kind,
        history_depth=spec.history_depth, tau_ignore=ti, tau_streak=ts,
    )


def _require_rnn(spec: ExperimentSpec) -> rnn_mod.TrainResult:
    if spec.rnn is None:
        raise ValueError(
            "the rnn decoder needs a trained checkpoint; run the train "
            "command first or drop 'rnn' from the decoder list")
    return spec.rnn


def _map_chunks(fn, payload, n: int, workers: int, chunk: int):
    """Run fn(payload, lo, hi) over trajectory chunks, merging results.

    Result keys starting with "sum_" are added; all other values are
    concatenated along axis 0 in chunk order, so the output is identical
    for any worker count.
    """
    bounds = [(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]
    if workers > 1 and len(bounds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(fn, [payload] * len(bounds),
                                  [b[0] for b in bounds],
                                  [b[1] for b in bounds]))
    else:
        parts = [fn(payload, lo, hi) for lo, hi in bounds]
    merged = {}
    for key in parts[0]:
        if key.startswith("sum_"):
            merged[key] = sum(part[key] for part in parts)
        else:
            merged[key] = np.concatenate([part[key] for part in parts], axis=0)
    return merged


# ----------------------------------------------------------------------
# Tracking
# ----------------------------------------------------------------------

def _spread_initials(n: int) -> np.ndarray:
    """Equal portions of the eight basis states."""
    return np.tile(np.arange(8, dtype=np.uint8), n // 8 + 1)[:n]


def _track_dataset_chunk(payload, lo, hi):
    spec, cfg, steps = payload["spec"], payload["cfg"], payload["steps"]
    initials = _spread_initials(spec.n_traj)[lo:hi]
    ds = generate_dataset(
        replace(cfg, n_sequences=spec.n_traj), initials, steps, spec.seed,
        stream_offset=lo, sequence_offset=lo)
    out = {"truth_final": ds.true_states[:, -1]}
    for name in spec.decoders:
        preds, hits = _track_decoder(payload, name, ds)
        out[f"final_{name}"] = preds
        out[f"sum_hits_{name}"] = hits
    return out


def _track_decoder(payload, name: str, ds: Dataset):
    """Final predictions and summed per-step hits for one decoder."""
    if name == "dt":
        tracker = dt_mod.ThresholdTracker(payload["dt_config"],
                                          ds.initial_states, ds.config.dt)
        hits = 0
        preds = None
        for t in range(ds.n_steps):
            preds = tracker.observe(ds.signals[:, t, :])
            hits += int((preds == ds.true_states[:, t]).sum())
        return preds, hits
    if name == "bayes":
        filt = bayes_mod.BayesFilter(payload["bayes_cfg"], ds.initial_states)
        hits = 0
        preds = None
        for t in range(ds.n_steps):
            preds = filt.step(ds.signals[:, t, :])
            hits += int((preds == ds.true_states[:, t]).sum())
        return preds.astype(np.uint8), hits
    result = payload["rnn"]
    preds = rnn_mod.track_states(result, ds.signals, ds.initial_states)
    hits = int((preds == ds.true_states).sum())
    return preds[:, -1], hits


def run_tracking(spec: ExperimentSpec) -> Report:
    """Final fidelity against the initial state, per decoder and gamma."""
    report = Report("tracking_" + spec.scheme,
                    meta={"task": spec.task, "scheme": spec.scheme,
                          "n_traj": spec.n_traj, "seed": spec.seed,
                          "duration_us": spec.resolved_duration_us})
    for gamma in spec.gammas_per_us:
        cfg = scheme_config(spec.scheme, gamma)
        steps = _steps(spec, cfg)
        payload = {
            "spec": spec, "cfg": cfg, "steps": steps,
            "dt_config": _resolve_dt(spec, gamma),
            "bayes_cfg": _bayes_config(spec, cfg, gamma, "bit-flip"),
            "rnn": spec.rnn if "rnn" in spec.decoders else None,
        }
        if "rnn" in spec.decoders:
            _require_rnn(spec)
        merged = _map_chunks(_track_dataset_chunk, payload, spec.n_traj,
                             spec.workers, chunk=1024)
        truth = merged["truth_final"]
        for name in spec.decoders:
            fid = float(np.mean(merged[f"final_{name}"] == truth))
            stderr = math.sqrt(max(fid * (1 - fid), 1e-12) / spec.n_traj)
            report.add_row(
                decoder=name, gamma_per_us=gamma, fidelity=fid,
                fidelity_stderr=stderr,
                step_accuracy=merged[f"sum_hits_{name}"]
                / (spec.n_traj * steps),
                n_traj=spec.n_traj)
    return report


def _resolve_dt(spec: ExperimentSpec, gamma_per_us: float) -> dt_mod.ThresholdConfig:
    if spec.dt_config is not None:
        return spec.dt_config
    return optimize_threshold(spec.scheme, gamma_per_us,
                              n_traj=400, duration_us=20.0,
                              seed=spec.seed + 7919)


# ----------------------------------------------------------------------
# Active correction tasks
# ----------------------------------------------------------------------

def _make_active_decoder(payload, batch: int):
    name = payload["decoder"]
    spec: ExperimentSpec = payload["spec"]
    reference = payload["reference"]
    ti, ts = spec.wrapper_params()
    if name == "bayes":
        return bayes_mod.BayesActive(payload["bayes_cfg"], reference, batch)
    if name == "dt":
        return dt_mod.ThresholdActive(payload["dt_config"], reference, batch,
                                      payload["cfg"].dt, tau_ignore=ti)
    return rnn_mod.RnnActive(payload["rnn"], reference, batch,
                             tau_ignore=ti, tau_streak=ts)


def _active_chunk(payload, lo, hi):
    """One chunk of an active-correction run.

    Returns the chunk's excited-population counts as a (1, T) group row,
    so the merged result keeps one curve per chunk for group-wise error
    estimates while the total is just the sum over groups.
    """
    spec: ExperimentSpec = payload["spec"]
    cfg: SchemeConfig = payload["cfg"]
    steps = payload["steps"]
    batch = hi - lo
    proc = SignalProcess(
        cfg, np.full(batch, payload["reference"], dtype=np.uint8), steps,
        spec.seed, lo + np.arange(batch, dtype=np.int64),
        sequence_indices=lo + np.arange(batch, dtype=np.int64),
        injected=payload.get("injected"))
    decoder = _make_active_decoder(payload, batch) \
        if payload["decoder"] != "none" else None
    exc = np.zeros(steps, dtype=np.int64)
    record_events = payload.get("record_events", False)
    events = []
    corrections = None
    excited = np.asarray(EXCITED_STATES)
    for t in range(steps):
        signals, states, _ = proc.step(corrections)
        exc[t] += int(np.isin(states, excited).sum())
        if decoder is not None:
            corrections = decoder.observe(signals)
            if record_events and np.any(corrections):
                for b in np.nonzero(corrections)[0]:
                    events.append((lo + b, t, int(corrections[b])))
    out = {"group_exc": exc[None, :], "group_n": np.array([batch]),
           "final_states": proc.states.copy()}
    if record_events:
        out["events"] = np.asarray(events, dtype=np.int64).reshape(-1, 3)
    return out


def _active_run(spec, cfg, steps, decoder_name, gamma, kind, reference,
                injected=None, record_events=False, chunk=None):
    payload = {
        "spec": spec, "cfg": cfg, "steps": steps, "decoder": decoder_name,
        "reference": reference, "injected": injected,
        "record_events": record_events,
    }
    if decoder_name == "bayes":
        payload["bayes_cfg"] = _bayes_config(spec, cfg, gamma, kind)
    elif decoder_name == "dt":
        payload["dt_config"] = _resolve_dt(spec, gamma)
    elif decoder_name == "rnn":
        payload["rnn"] = _require_rnn(spec)
    if chunk is None:
        # ten chunks give group-wise curves for derivative error bars
        chunk = max(100, math.ceil(spec.n_traj / 10))
    return _map_chunks(_active_chunk, payload, spec.n_traj, spec.workers,
                       chunk=chunk), payload


def run_population_task(spec: ExperimentSpec) -> tuple[Report, Report | None]:
    """T1-extension or bit-flip-protection: P_exc(t) under active correction.

    Returns the population curve report and, for the bit-flip task, the
    logical-rate report with the quadratic-fit metadata.
    """
    kind = "damping" if spec.task == "t1-extension" else "bit-flip"
    curve = Report("population_" + ("t1_" if kind == "damping" else "bitflip_")
                   + spec.scheme,
                   meta={"task": spec.task, "scheme": spec.scheme,
                         "n_traj": spec.n_traj, "seed": spec.seed})
    rate_rows = []
    for gamma in spec.gammas_per_us:
        cfg = scheme_config(spec.scheme, gamma, error_kind=kind,
                            n_sequences=spec.n_traj)
        steps = _steps(spec, cfg)
        t_us = (np.arange(steps) + 1) * cfg.dt / US
        stride = max(1, steps // 200)

        def add_curve(decoder, pexc):
            for i in range(0, steps, stride):
                p = float(pexc[i])
                curve.add_row(
                    decoder=decoder, gamma_per_us=gamma,
                    time_us=float(t_us[i]), p_exc=p,
                    p_exc_stderr=math.sqrt(max(p * (1 - p), 1e-12)
                                           / spec.n_traj))

        # reference curves: uncorrected Markov ensemble, bare qubit, analytic
        chain = simulate_error_chain(7, kind, cfg.gamma, cfg.dt, steps,
                                     spec.n_traj,
                                     RngStream(spec.seed, 10**9).generator())
        unc = np.isin(chain[:, 1:], np.asarray(EXCITED_STATES)).mean(axis=0)
        add_curve("uncorrected", unc)
        if kind == "damping":
            bare = np.exp(-cfg.gamma * t_us * US)
        else:
            bare = (1 + np.exp(-2 * cfg.gamma * t_us * US)) / 2
        add_curve("bare", bare)
        add_curve("analytic", np.asarray(
            [analytic_pexc(kind, cfg.gamma, t) for t in t_us * US]))

        for name in spec.decoders:
            merged, _ = _active_run(spec, cfg, steps, name, gamma, kind,
                                    reference=7)
            pexc = merged["group_exc"].sum(axis=0) / spec.n_traj
            add_curve(name, pexc)
            if kind == "bit-flip":
                rate_rows.append(
                    (name, gamma,
                     *_logical_rate(merged["group_exc"], merged["group_n"],
                                    cfg.dt)))
    if kind != "bit-flip":
        return curve, None
    rates = Report("logical_rate_" + spec.scheme,
                   meta=dict(curve.meta))
    slopes = {}
    for name, gamma, rate, err in rate_rows:
        rates.add_row(decoder=name, gamma_per_us=gamma,
                      logical_rate_per_us=rate, logical_rate_stderr=err)
        slopes.setdefault(name, []).append((gamma, rate))
    for name, pts in slopes.items():
        if len(pts) >= 2:
            g = np.log([p[0] for p in pts])
            r = np.log([max(p[1], 1e-12) for p in pts])
            rates.meta[f"loglog_slope_{name}"] = float(np.polyfit(g, r, 1)[0])
    return curve, rates


def _logical_rate(group_exc: np.ndarray, group_n: np.ndarray, dt: float,
                  at_us: float = 3.0, half_window_us: float = 1.0):
    """-dP_exc/dt at `at_us` from group-wise local linear fits."""
    steps = group_exc.shape[1]
    t_us = (np.arange(steps) + 1) * dt / US
    sel = np.abs(t_us - at_us) <= half_window_us
    curves = group_exc / group_n[:, None]
    rates = np.asarray([-np.polyfit(t_us[sel], curve[sel], 1)[0]
                        for curve in curves])
    stderr = rates.std(ddof=1) / math.sqrt(len(rates)) if len(rates) > 1 \
        else math.nan
    # headline estimate from the combined curve (weighted by group sizes)
    total = group_exc.sum(axis=0) / group_n.sum()
    rate = -np.polyfit(t_us[sel], total[sel], 1)[0]
    return float(rate), float(stderr)


# ----------------------------------------------------------------------
# Detection statistics
# ----------------------------------------------------------------------

def run_detection_stats(spec: ExperimentSpec) -> tuple[Report, Report]:
    """Detection-time and false-alarm statistics on injected flips.

    Trajectories carry no random errors; a single flip of
    `spec.inject_qubit` lands at `spec.inject_time_us`.  A correction
    emitted while the system is error-free counts as a false alarm; the
    detection time is the span from the injected flip to the first
    correction involving the injected qubit.
    """
    gamma = spec.gammas_per_us[0]
    cfg = scheme_config(spec.scheme, 0.0, n_sequences=spec.n_traj)
    steps = _steps(spec, cfg)
    k_inj = int(round(spec.inject_time_us * US / cfg.dt))
    if not 0 <= k_inj < steps:
        raise ValueError("injection time lies outside the trajectory")
    inj_mask = QUBIT_MASKS[spec.inject_qubit - 1]
    reference = 7

    summary = Report("detection_summary_" + spec.scheme,
                     meta={"task": spec.task, "scheme": spec.scheme,
                           "n_traj": spec.n_traj, "seed": spec.seed,
                           "inject_qubit": spec.inject_qubit,
                           "inject_time_us": spec.inject_time_us,
                           "assumed_gamma_per_us": gamma})
    hist = Report("detection_hist_" + spec.scheme, meta=dict(summary.meta))

    duration_us = steps * cfg.dt / US
    for name in spec.decoders:
        merged, _ = _active_run(spec, cfg, steps, name, gamma, "bit-flip",
                                reference=reference, injected=(spec.inject_qubit,
                                                               k_inj),
                                record_events=True, chunk=2000)
        det_steps, false_alarms = _classify_events(
            merged["events"], spec.n_traj, k_inj, inj_mask, reference)
        detected = det_steps[det_steps > 0]
        det_us = detected * cfg.dt / US
        rate = false_alarms / (spec.n_traj * duration_us)
        summary.add_row(
            decoder=name,
            mean_detection_us=float(det_us.mean()) if det_us.size else math.nan,
            median_detection_us=float(np.median(det_us)) if det_us.size else math.nan,
            detected_fraction=detected.size / spec.n_traj,
            false_alarms=int(false_alarms),
            false_alarm_rate_per_us=float(rate))
        edges = np.linspace(0.0, max(2.0, float(det_us.max()) if det_us.size
                                     else 2.0), 41)
        counts, _ = np.histogram(det_us, bins=edges, density=True)
        centers = (edges[:-1] + edges[1:]) / 2
        for c, d in zip(centers, counts):
            hist.add_row(decoder=name, detection_time_us=float(c),
                         density=float(d))
    return summary, hist


def _classify_events(events: np.ndarray, n_traj: int, k_inj: int,
                     inj_mask: int, reference: int):
    """Per-trajectory detection step counts and total false alarms.

    Works in the error frame: the physical state is the reference XOR
    the injected mask (after injection) XOR all applied corrections.
    """
    det = np.zeros(n_traj, dtype=np.int64)
    false_alarms = 0
    # corrections are sparse; a per-trajectory scan is cheap and exact
    by_traj: dict[int, list] = {}
    if events.size:
        order = np.lexsort((events[:, 1], events[:, 0]))
        for traj, t, mask in events[order]:
            by_traj.setdefault(int(traj), []).append((int(t), int(mask)))
    for traj, evs in by_traj.items():
        applied = 0
        for t, mask in evs:
            state = reference ^ (inj_mask if t >= k_inj else 0) ^ applied
            if state == reference:
                false_alarms += 1
            elif det[traj] == 0 and t >= k_inj and (mask & inj_mask):
                det[traj] = t - k_inj + 1
            applied ^= mask
    return det, false_alarms


# ----------------------------------------------------------------------
# Annealing
# ----------------------------------------------------------------------

def _anneal_chunk(payload, lo, hi):
    spec = payload["spec"]
    cfg: AnnealConfig = payload["anneal_cfg"]
    if payload["decoder"] == "none":
        factory = None
    else:
        factory = lambda batch: _make_active_decoder(payload, batch)  # noqa: E731
    run = run_encoded(cfg, factory, hi - lo, spec.seed, stream_offset=lo)
    return {"fidelities": run.fidelities,
            "corrections": run.correction_counts,
            "flips": run.flip_counts}


def _bare_chunk(payload, lo, hi):
    cfg: AnnealConfig = payload["anneal_cfg"]
    fid = run_bare(cfg, hi - lo, payload["spec"].seed,
                   stream_offset=10**6 + lo)
    return {"fidelities": fid}


def run_annealing(spec: ExperimentSpec) -> Report:
    """Reduction factor vs gamma for each decoder."""
    report = Report("annealing_" + spec.scheme,
                    meta={"task": spec.task, "scheme": spec.scheme,
                          "n_traj": spec.n_traj, "seed": spec.seed,
                          "omega0_factor": spec.omega0_factor,
                          "duration_us": spec.resolved_duration_us})
    omega0 = spec.omega0_factor * GAMMA_M_REFERENCE
    for gamma in spec.gammas_per_us:
        cfg = scheme_config(spec.scheme, gamma, error_kind="bernoulli",
                            n_sequences=spec.n_traj)
        anneal_cfg = AnnealConfig(omega0=omega0,
                                  t_total=spec.resolved_duration_us * US,
                                  scheme=cfg)
        bare = _map_chunks(_bare_chunk,
                           {"spec": spec, "anneal_cfg": anneal_cfg},
                           spec.n_traj, spec.workers, chunk=1000)
        inf_une = 1.0 - bare["fidelities"]
        for name in spec.decoders:
            payload = {
                "spec": spec, "anneal_cfg": anneal_cfg, "decoder": name,
                "cfg": cfg, "reference": 0,
            }
            if name == "bayes":
                payload["bayes_cfg"] = _bayes_config(spec, cfg, gamma,
                                                     "bit-flip")
            elif name == "dt":
                payload["dt_config"] = _resolve_dt(spec, gamma)
            elif name == "rnn":
                payload["rnn"] = _require_rnn(spec)
            merged = _map_chunks(_anneal_chunk, payload, spec.n_traj,
                                 spec.workers, chunk=1000)
            inf_enc = 1.0 - merged["fidelities"]
            r, r_err = _ratio_with_stderr(inf_une, inf_enc)
            report.add_row(
                decoder=name, gamma_per_us=gamma, n_traj=spec.n_traj,
                mean_infidelity_encoded=float(inf_enc.mean()),
                mean_infidelity_encoded_stderr=float(
                    inf_enc.std(ddof=1) / math.sqrt(inf_enc.size)),
                mean_infidelity_unencoded=float(inf_une.mean()),
                mean_infidelity_unencoded_stderr=float(
                    inf_une.std(ddof=1) / math.sqrt(inf_une.size)),
                reduction_factor=r, reduction_factor_stderr=r_err,
                mean_corrections=float(merged["corrections"].mean()),
                mean_flips=float(merged["flips"].mean()))
    return report


def _ratio_with_stderr(numer: np.ndarray, denom: np.ndarray):
    a, b = numer.mean(), denom.mean()
    if b <= 0:
        return math.inf, math.nan
    r = reduction_factor(a, b)
    var = r * r * ((numer.std(ddof=1) ** 2 / numer.size) / a ** 2
                   + (denom.std(ddof=1) ** 2 / denom.size) / b ** 2)
    return float(r), float(math.sqrt(var))


# ----------------------------------------------------------------------
# Training and calibration helpers
# ----------------------------------------------------------------------

def merge_datasets(datasets: list[Dataset]) -> Dataset:
    """Concatenate datasets sharing acquisition constants (for mixed-rate
    training sets); the first config is kept for scale metadata."""
    first = datasets[0]
    for ds in datasets[1:]:
        if (ds.config.tau_m, ds.config.dt, ds.config.scheme) != \
                (first.config.tau_m, first.config.dt, first.config.scheme):
            raise ValueError("datasets are not compatible for merging")
    return Dataset(
        config=first.config, seed=first.seed,
        initial_states=np.concatenate([d.initial_states for d in datasets]),
        stream_ids=np.concatenate([d.stream_ids for d in datasets]),
        sequence_indices=np.concatenate([d.sequence_indices for d in datasets]),
        true_states=np.concatenate([d.true_states for d in datasets]),
        means=np.concatenate([d.means for d in datasets]),
        signals=np.concatenate([d.signals for d in datasets]),
    )


def make_training_dataset(scheme: str, gammas_per_us, n_traj: int,
                          duration_us: float, seed: int,
                          error_kind: str = "bit-flip") -> Dataset:
    """Labeled training data, initial states spread over all eight basis
    states and the rate sweep split evenly across the trajectories."""
    gammas = tuple(gammas_per_us)
    per = n_traj // len(gammas)
    parts = []
    for g_idx, gamma in enumerate(gammas):
        count = per if g_idx < len(gammas) - 1 else n_traj - per * (len(gammas) - 1)
        cfg = scheme_config(scheme, gamma, error_kind=error_kind,
                            n_sequences=n_traj)
        steps = int(round(duration_us * US / cfg.dt))
        parts.append(generate_dataset(cfg, _spread_initials(count), steps,
                                      seed, stream_offset=g_idx * n_traj))
    return merge_datasets(parts)


def train_rnn_decoder(scheme: str, gammas_per_us, n_traj: int,
                      duration_us: float, seed: int,
                      train_cfg: rnn_mod.TrainConfig | None = None,
                      error_kind: str = "bit-flip") -> rnn_mod.TrainResult:
    ds = make_training_dataset(scheme, gammas_per_us, n_traj, duration_us,
                               seed, error_kind=error_kind)
    return rnn_mod.train(ds, train_cfg or rnn_mod.TrainConfig(seed=seed))


def optimize_threshold(scheme: str, gamma_per_us: float, n_traj: int = 400,
                       duration_us: float = 20.0, seed: int = 7919,
                       grid: dt_mod.ThresholdGrid | None = None,
                       ) -> dt_mod.ThresholdConfig:
    """Grid-search the double-threshold parameters on fresh training data."""
    cfg = scheme_config(scheme, gamma_per_us)
    steps = int(round(duration_us * US / cfg.dt))
    ds = generate_dataset(cfg, _spread_initials(n_traj), steps, seed)
    return dt_mod.optimize_params(ds, grid)


def run_experiment(spec: ExperimentSpec):
    """Dispatch a spec to its task runner; returns a list of reports."""
    if spec.task == "tracking":
        return [run_tracking(spec)]
    if spec.task in ("t1-extension", "bit-flip-protection"):
        curve, rates = run_population_task(spec)
        return [curve] if rates is None else [curve, rates]
    if spec.task == "detection-stats":
        return list(run_detection_stats(spec))
    if spec.task == "annealing":
        return [run_annealing(spec)]
    raise ValueError(f"unknown task {spec.task!r}")
