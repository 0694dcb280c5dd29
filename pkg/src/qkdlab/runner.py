"""End-to-end runs: simulate a scenario into log files, and analyze logs into a report.

``simulate`` writes the receiver event log, the transmitter truth and the
per-second emission counts, then hands the files it just wrote to
``analyze``. The report of a simulation is therefore exactly what a later
``analyze`` of the same directory produces.
"""
from __future__ import annotations

import math
import shutil
import tempfile
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .errors import ConfigError, NoSinglePhotonBoundError
from .keyproc import (ReconciliationParams, extract_key, measure_statistics, resolve_clicks, sift,
                      snr_filter)
from .linkgeom import Trajectory, interpolate_position, time_of_flight, tof_rate
from .polcomp import (PolarizationTransform, apply_to_states, optimize_compensation, predicted_qber,
                      rotation_matrix, stokes_from_counts, waveplate_transform)
from .qkdsim import LossSeries, SourceConfig, simulate_link, tomography_counts
from .scenario import Scenario
from .timesync import TimingConfig, apply_window, correct_tof, find_phase, fold
from .tracksim import pointing_coupling, simulate_tracking, trajectory_path


# ---------------------------------------------------------------- simulation stages

def tracking_loss_series(sc: Scenario, traj: Trajectory, tx):
    """Tracking run plus the loss per controller tick it implies.

    With ``normalize_pointing`` the per-tick coupling is rescaled so its
    mean after acquisition equals the budget's receiver-pointing loss; the
    tracking run then supplies the fluctuations and dropouts only. Ticks
    inside the field of view can end up with less loss than the budget
    figure, which is an average that includes the dropouts.
    """
    run = simulate_tracking(trajectory_path(traj, tx, target_is_observer=True), sc.vibration,
                            sc.controller, sc.duration_s, seed=sc.seed,
                            acquisition_time=sc.acquisition_s, initial_offset=sc.initial_offset_deg)
    b = sc.link.budget
    static = b.diffraction_dB + b.tx_pointing_turbulence_dB + b.fixed_dB
    c = pointing_coupling(run.deviation, sc.link.receiver_fov_deg)
    tracked = run.t >= sc.acquisition_s
    if sc.link.normalize_pointing and tracked.any() and c[tracked].mean() > 0:
        c = c * (10 ** (-b.rx_pointing_dB / 10) / c[tracked].mean())
    with np.errstate(divide="ignore"):
        rx = -10 * np.log10(c)
    return run, LossSeries(run.t, static + rx)


def loss_series(sc: Scenario, traj: Trajectory, tx):
    if sc.link.loss_mode == "constant":
        loss = sc.link.constant_loss_db
        if loss is None:
            b = sc.link.budget
            loss = b.diffraction_dB + b.tx_pointing_turbulence_dB + b.rx_pointing_dB + b.fixed_dB
        run = simulate_tracking(trajectory_path(traj, tx, target_is_observer=True), sc.vibration,
                                sc.controller, sc.duration_s, seed=sc.seed,
                                acquisition_time=sc.acquisition_s, initial_offset=sc.initial_offset_deg)
        return run, LossSeries.constant(loss)
    return tracking_loss_series(sc, traj, tx)


def polarization_stage(sc: Scenario):
    """Drifted source states, tomography per second, and the waveplate correction from second 0.

    Returns (source config with the states actually sent, counts series,
    compensation rows).
    """
    pol = sc.polarization
    intrinsic = sc.intrinsic_states()
    rng = np.random.default_rng(np.random.SeedSequence(sc.seed, spawn_key=(11,)))
    n_sec = int(math.ceil(sc.duration_s))

    def drift(t):
        ang = np.radians(pol.drift_angle_deg + pol.drift_rate_dps * t)
        return PolarizationTransform.from_rotation(rotation_matrix(pol.drift_axis, ang))

    counts_series, estimated = [], []
    for s in range(n_sec):
        drifted = SourceConfig(states=apply_to_states(drift(s), intrinsic))
        counts = tomography_counts(drifted, pol.tomography_rate_hz, rng)
        counts_series.append((float(s), counts))
        estimated.append({k: stokes_from_counts(v) for k, v in counts.items()})

    stack = None
    if pol.compensate:
        stack = optimize_compensation(estimated[0], seed=sc.seed).stack
    rows = []
    for (t, _), est in zip(counts_series, estimated):
        pre = predicted_qber(est)
        post = predicted_qber(est, stack) if stack is not None else pre
        th = (stack.theta1, stack.theta2, stack.theta3) if stack is not None else (0.0, 0.0, 0.0)
        rows.append({"theta1_deg": th[0], "theta2_deg": th[1], "theta3_deg": th[2],
                     "predicted_qber": post, "t_s": t, "pre_qber": pre})

    sent = apply_to_states(drift(0.0), intrinsic)
    if stack is not None:
        sent = apply_to_states(waveplate_transform(stack), sent)
    return sent, counts_series, rows


def simulate(sc: Scenario, out_dir, overwrite: bool = False) -> dict:
    """Run the full pipeline and write every artifact into ``out_dir``.

    Files are produced in a scratch directory and moved into place at the
    end, so a failing run leaves nothing behind. Returns the report.
    """
    out_dir = Path(out_dir)
    if out_dir.exists() and any(out_dir.iterdir()) and not overwrite:
        raise ConfigError(f"{out_dir}: output directory exists and is not empty")
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=".qkdlab-", dir=out_dir.parent))
    try:
        report = _simulate_into(sc, tmp)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    if out_dir.exists():
        shutil.rmtree(out_dir)
    tmp.rename(out_dir)
    return report


def _simulate_into(sc: Scenario, d: Path) -> dict:
    traj, tx = sc.load_trajectory()
    track, loss = loss_series(sc, traj, tx)
    states, counts_series, comp_rows = polarization_stage(sc)
    src = sc.source
    cfg = SourceConfig(src.pulse_rate, src.mu_signal, src.mu_decoy, src.p_signal, src.p_decoy, src.p_vacuum,
                       src.duty_open, src.duty_polarized, src.duty_blocked, states)

    def tof(t):
        return time_of_flight(tx, interpolate_position(traj, np.atleast_1d(t)))

    run = simulate_link(cfg, sc.detector, sc.duration_s, loss, tof, seed=sc.seed)

    io.write_trajectory(d / "trajectory.csv", traj)
    io.write_deviation(d / "deviation.csv", track)
    io.write_series(d / "loss.csv", ["t_s", "loss_db"], [loss.t_start.tolist(), loss.loss_dB.tolist()])
    io.write_counts(d / "counts.csv", counts_series)
    io.write_compensation(d / "compensation.csv", comp_rows)
    tgrid = np.arange(0.0, sc.duration_s + 1e-9, 0.1)
    io.write_series(d / "tof.csv", ["t_s", "tof_ns", "tof_rate_ns_per_s"],
                    [tgrid.tolist(), (tof(tgrid) * 1e9).tolist(),
                     (np.asarray(tof_rate(traj, tx, tgrid)) * 1e9).tolist()])
    io.write_truth(d / "truth.csv", run.truth)
    io.write_emitted(d / "emitted.csv", run.emitted)
    meta = {
        "scenario": sc.name, "duration_s": sc.duration_s,
        "mu_signal": src.mu_signal, "mu_decoy": src.mu_decoy, "duty_open": src.duty_open,
        "tx_position_m": [float(v) for v in tx],
        "timing": {"pulse_period_ns": sc.timing.pulse_period * 1e9, "window_ns": sc.timing.coincidence_window * 1e9,
                   "histogram_bins": sc.timing.histogram_bins, "lock_threshold": sc.timing.lock_threshold,
                   "clock_skew": sc.timing.clock_skew},
        "snr_threshold": sc.keyproc.snr_threshold, "round_to_bytes": sc.keyproc.round_to_bytes,
        "pa_seed": sc.keyproc.pa_seed, "reconciliation_seed": sc.keyproc.reconciliation_seed,
        "truth": "truth.csv", "emitted": "emitted.csv",
        "mean_loss_db": float(np.mean(loss.at(np.arange(min(0.5, sc.duration_s / 2), sc.duration_s, 1.0)))),
    }
    io.write_events(d / "events.csv", run.events, meta)
    return analyze_files(d / "events.csv", d / "trajectory.csv", d)


# ---------------------------------------------------------------- analysis

@dataclass(frozen=True, eq=False)
class Analysis:
    report: dict
    key: np.ndarray
    per_second: dict
    assignment: object


def _timing_from_meta(meta: dict) -> TimingConfig:
    t = meta.get("timing", {})
    return TimingConfig(pulse_period=float(t.get("pulse_period_ns", 1e9 / meta["pulse_rate_hz"])) * 1e-9,
                        coincidence_window=float(t.get("window_ns", 0.16)) * 1e-9,
                        histogram_bins=int(t.get("histogram_bins", 256)),
                        lock_threshold=float(t.get("lock_threshold", 3.0)),
                        clock_skew=float(t.get("clock_skew", 0.0)))


def window_signal_fraction(ts_ps, phase_ps: float, cfg: TimingConfig) -> float:
    """Share of the above-baseline (signal) events that land inside the window."""
    period = cfg.period_ps
    r = (fold(np.asarray(ts_ps) - phase_ps + period / 2, cfg) - period / 2)
    n = r.size
    nb = cfg.histogram_bins
    hist = np.bincount(np.minimum(((r + period / 2) / period * nb).astype(int), nb - 1), minlength=nb)
    base = float(np.median(hist)) * nb / period  # background events per ps
    half = cfg.coincidence_window * 1e12 / 2
    inside = np.count_nonzero(np.abs(r) <= half + 1e-9) - base * 2 * half
    signal = n - base * period
    return float(min(max(inside / signal, 1e-12), 1.0)) if signal > 0 else float("nan")


def analyze(log, meta: dict, truth, emitted, traj: Trajectory) -> Analysis:
    """Timing recovery and key extraction on recorded logs.

    Raises NoLockError when the timing histogram shows no peak. A missing
    single-photon bound or an empty key is not an error: the report then
    carries ``secure_bits`` = 0 and a status line in its details.
    """
    cfg = _timing_from_meta(meta)
    rate = float(meta["pulse_rate_hz"])
    tx = np.asarray(meta.get("tx_position_m", [0.0, 0.0, 12.0]), dtype=float)
    corr = correct_tof(log.timestamp_ps, log.channel, traj, tx, log.t0_ps, cfg.clock_skew)
    ts_rel = corr.timestamp_ps - log.t0_ps
    phase, contrast = find_phase(ts_rel, cfg)
    asg = apply_window(ts_rel, corr.channel, phase, cfg)

    n_sec = emitted.shape[0]
    acc_slots = asg.slot[asg.accepted]
    sec_of = np.floor(acc_slots / rate).astype(np.int64)
    inside = (sec_of >= 0) & (sec_of < n_sec)
    counts = np.bincount(sec_of[inside], minlength=n_sec)
    selected = snr_filter(counts, float(meta.get("snr_threshold", 1000.0)))

    outcomes = resolve_clicks(acc_slots, asg.channel[asg.accepted], int(meta.get("reconciliation_seed", 0)))
    block = sift(truth, outcomes, rate)
    block_sel = block.select(np.isin(block.second, selected))

    # per-second QBER series
    qs, qd = [], []
    for s in range(n_sec):
        b = block.select(block.second == s)
        sig, dec = b.of_class(0), b.of_class(1)
        qs.append(sig.qber if len(sig) else float("nan"))
        qd.append(dec.qber if len(dec) else float("nan"))
    per_second = {"second": list(range(n_sec)), "counts": counts.tolist(), "qber_signal": qs,
                  "qber_decoy": qd, "selected": [int(s in set(selected.tolist())) for s in range(n_sec)]}

    mu, nu = float(meta["mu_signal"]), float(meta["mu_decoy"])
    report = {k: 0 for k in io.REPORT_FIELDS}
    report.update(duration_s=int(len(selected)), mu_signal=mu, mu_decoy=nu)
    key = np.zeros(0, np.uint8)
    extra = {"phase_ps": phase, "timing_contrast": contrast, "tof_rejected": corr.rejected,
             "selected_seconds": selected.tolist(), "events": int(len(log)),
             "accepted_events": int(asg.accepted.sum()), "double_clicks": int(outcomes.double.sum()),
             "leaked_bits": 0, "discarded_frames": 0, "status": "ok"}
    if selected.size == 0:
        extra["status"] = "no seconds above the count threshold"
    else:
        try:
            stats = measure_statistics(truth, outcomes, emitted, selected, mu, nu, rate)
        except ValueError as exc:
            stats = None
            extra["status"] = f"parameter estimation failed: {exc}"
        if stats is not None:
            d = stats.inputs
            in_sel = np.isin(np.floor(asg.slot / rate).astype(np.int64), selected)
            acc = window_signal_fraction(ts_rel[in_sel], phase, cfg)
            duty = float(meta.get("duty_open", 0.5))
            eta = -math.log1p(-min(d.Q_mu / duty, 1 - 1e-12)) / (mu * acc) if acc > 0 else float("nan")
            report.update(qber_signal=d.E_mu, qber_decoy=d.E_nu, gain_signal=d.Q_mu, gain_decoy=d.Q_nu,
                          y0=d.Y0, loss_db=-10 * math.log10(eta) if eta > 0 else float("inf"),
                          raw_bits=stats.raw_bits, sifted_bits=stats.sifted_bits)
            extra["window_signal_fraction"] = acc
            try:
                km = extract_key(block_sel, stats,
                                 ReconciliationParams(seed=int(meta.get("reconciliation_seed", 0))),
                                 pa_seed=int(meta.get("pa_seed", 0)),
                                 round_to_bytes=bool(meta.get("round_to_bytes", False)))
                report.update(q1_lower=km.estimate.Q1_lower, e1_upper=km.estimate.e1_upper,
                              ec_efficiency=km.ec_efficiency, secure_bits=len(km.final))
                extra.update(leaked_bits=km.leaked_bits, discarded_frames=km.discarded_frames)
                key = km.final
            except NoSinglePhotonBoundError as exc:
                extra["status"] = f"no single-photon bound: {exc}"
    report = {k: _clean(v) for k, v in report.items()}
    report["details"] = {k: _clean(v) for k, v in extra.items()}
    return Analysis(report, key, per_second, asg)


def _clean(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


def analyze_files(events_path, traj_path, out_dir) -> dict:
    """Load logs, analyze them and write the report, key and series into ``out_dir``."""
    events_path = Path(events_path)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", io.TruncationWarning)
        log, meta = io.read_events(events_path)
    truncated = [str(w.message) for w in caught if issubclass(w.category, io.TruncationWarning)]
    for w in caught:
        warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
    base = events_path.parent
    truth = io.read_truth(base / meta.get("truth", "truth.csv"))
    emitted = io.read_emitted(base / meta.get("emitted", "emitted.csv"))
    traj = io.read_trajectory(traj_path)
    res = analyze(log, meta, truth, emitted, traj)
    if truncated:
        res.report["details"]["warnings"] = truncated
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_json(out / "report.json", res.report)
    io.write_key(out, res.key)
    ps = res.per_second
    io.write_series(out / "per_second.csv", ["second", "counts", "qber_signal", "qber_decoy", "selected"],
                    [ps["second"], ps["counts"], ps["qber_signal"], ps["qber_decoy"], ps["selected"]])
    io.write_slots(out / "slots.csv", res.assignment)
    return res.report
