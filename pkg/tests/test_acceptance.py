"""Acceptance criteria 1-11, each printing one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the summary lines.
"""
import math

import numpy as np
import pytest

from qkdlab import io
from qkdlab.cli import main
from qkdlab.keyproc import (DecoyInputs, ReconciliationParams, asymptotic_key_length, decoy_bounds,
                            error_correct, measure_statistics, resolve_clicks)
from qkdlab.keyproc.privacy import bits_to_hex, expand_seed, privacy_amplify, toeplitz_matrix
from qkdlab.linkgeom import C_LIGHT, Trajectory, leo_max_angular_rate
from qkdlab.polcomp import (PolarizationTransform, apply_to_states, ideal_states, optimize_compensation,
                            paper_intrinsic_states, predicted_qber, random_rotation, rotation_matrix)
from qkdlab.qkdsim import DetectorConfig, SourceConfig, simulate_link, true_single_photon
from qkdlab.scenario import bundled_scenario_path
from qkdlab.timesync import TimingConfig, apply_window, correct_tof, find_phase
from qkdlab.tracksim import (STATIC_JITTER, TRUCK_VIBRATION, ControllerParams, VibrationModel,
                             constant_rate_path, simulate_tracking)

TABLE1 = DecoyInputs(mu=0.495, nu=0.120, Q_mu=5.86e-5, Q_nu=1.5e-5, E_mu=0.0655, E_nu=0.0549, Y0=1.35e-7)


def verdict(n, ok, detail):
    print(f"\nCRITERION {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def test_c01_decoy_bounds_golden():
    est = decoy_bounds(TABLE1)
    ok = abs(est.Q1_lower / 3.72e-5 - 1) <= 0.02 and abs(est.e1_upper - 0.0585) <= 0.001
    verdict(1, ok, f"Q1_lower={est.Q1_lower:.4e} (3.72e-5 +-2%), e1_upper={est.e1_upper:.4%} (5.85% +-0.1pp)")


def test_c02_key_length_golden():
    est = decoy_bounds(TABLE1)
    L = asymptotic_key_length(5844, TABLE1.Q_mu, est, TABLE1.E_mu, 1.15)
    rate = L / 4.0
    ok = 155 <= L <= 185 and abs(rate / 40 - 1) <= 0.15
    verdict(2, ok, f"key length {L} bits in [155, 185], rate {rate:.2f} bit/s vs 40 +-15%")


def test_c03_leo_bound():
    w = leo_max_angular_rate(600e3)
    verdict(3, abs(w - 0.72) <= 0.005, f"{w:.4f} deg/s vs 0.72 +-0.005")


def test_c04_tof_drift():
    traj = Trajectory.straight_line([600.0, 0.0, 0.0], [4.5, 0.0, 0.0], 10)
    ts = np.arange(0, 9 * 10**12, 10**9)  # one tag per ms
    corr = correct_tof(ts, np.zeros(ts.size, np.uint8), traj, [0.0, 0.0, 0.0])
    # corrected minus raw time tags, differenced over one second
    removed = (ts[corr.index] - corr.timestamp_ps) * 1e-3  # ns
    t = ts[corr.index] * 1e-12
    step = 1000
    rate = np.mean((removed[step:] - removed[:-step]) / (t[step:] - t[:-step]))
    expected = 4.5 / C_LIGHT * 1e9
    verdict(4, abs(rate - 15.0) <= 0.1, f"d(ToF)/dt = {rate:.3f} ns/s (radial oracle {expected:.3f}) vs 15 +-0.1")


def test_c05_coincidence_window_statistics():
    rng = np.random.default_rng(5)
    cfg = TimingConfig(pulse_period=12.5e-9, coincidence_window=0.16e-9)
    period = 12500
    n = 10**6
    n_bg = n // 5
    n_sig = n - n_bg
    slots = np.sort(rng.choice(8 * 10**7, n_sig, replace=False))
    phase_true = 4321.0
    sig_ts = slots * period + phase_true + rng.normal(0, 50.0, n_sig)
    bg_ts = rng.uniform(0, 8 * 10**7 * period, n_bg)
    ts = np.rint(np.concatenate([sig_ts, bg_ts])).astype(np.int64)
    is_bg = np.r_[np.zeros(n_sig, bool), np.ones(n_bg, bool)]
    # signal bits carry a 3 % flip rate, background bits are coin flips
    tx = rng.integers(0, 2, n)
    rx = np.where(is_bg, rng.integers(0, 2, n), tx ^ (rng.random(n) < 0.03))
    phase, _ = find_phase(ts, cfg)
    narrow = apply_window(ts, np.zeros(n), phase, cfg).accepted
    full = apply_window(ts, np.zeros(n), phase, TimingConfig(coincidence_window=12.5e-9)).accepted
    acc = narrow[is_bg].mean()
    q_narrow = np.mean(tx[narrow] != rx[narrow])
    q_full = np.mean(tx[full] != rx[full])
    ok = abs(acc - 0.0128) <= 0.0005 and q_narrow < q_full
    verdict(5, ok, f"background acceptance {acc:.4%} (1.28% +-0.05), QBER {q_narrow:.3%} windowed < {q_full:.3%} full")


def _decoy_run(seed, cfg, det, tcfg, duration, loss):
    run = simulate_link(cfg, det, duration, loss, None, seed)
    phase, _ = find_phase(run.events.timestamp_ps, tcfg)
    a = apply_window(run.events.timestamp_ps, run.events.channel, phase, tcfg)
    out = resolve_clicks(a.slot[a.accepted], a.channel[a.accepted], seed)
    stats = measure_statistics(run.truth, out, run.emitted, [0], cfg.mu_signal, cfg.mu_decoy, cfg.pulse_rate)
    return decoy_bounds(stats.inputs)


@pytest.mark.slow
def test_c06_decoy_bound_validity():
    cfg = SourceConfig(p_signal=0.5, p_decoy=0.3, p_vacuum=0.2, states=paper_intrinsic_states())
    det = DetectorConfig(background_rate=1687.5, jitter=231e-12, dead_time=50e-9)
    tcfg = TimingConfig()
    loss = 10.0
    duration = 3e7 / cfg.pulse_rate  # 3e7 slots per run
    q1, e1 = true_single_photon(cfg, det, loss, tcfg.coincidence_window)
    runs = 200
    valid = 0
    for seed in range(runs):
        est = _decoy_run(seed, cfg, det, tcfg, duration, loss)
        valid += est.Q1_lower <= q1 and est.e1_upper >= e1
    frac = valid / runs
    verdict(6, frac >= 0.99, f"{valid}/{runs} runs with Q1_lower <= Q1 and e1_upper >= e1 ({frac:.1%}, need 99%)")


@pytest.mark.slow
def test_c07_reconciliation():
    n, qber = 5844, 0.0655
    n_err = round(n * qber)
    good = 0
    effs = []
    for seed in range(100):
        rng = np.random.default_rng(seed)
        x = rng.integers(0, 2, n, dtype=np.uint8)
        flip = np.zeros(n, np.uint8)
        flip[rng.choice(n, n_err, replace=False)] = 1
        res = error_correct(x, x ^ flip, qber, ReconciliationParams(seed=seed))
        clean = res.success and np.array_equal(res.corrected, x)
        effs.append(res.efficiency)
        good += clean and res.efficiency <= 1.20
    verdict(7, good >= 95, f"{good}/100 blocks verified error-free with f <= 1.20 "
                           f"(mean f {np.mean(effs):.3f}, worst {np.max(effs):.3f})")


def test_c08_privacy_amplification():
    bits = (np.arange(64) % 3 == 0).astype(np.uint8)
    golden = bits_to_hex(privacy_amplify(bits, 32, 12345)) == "c879c5d2"
    n, m, seeds, k = 64, 16, 10_000, 48
    rng = np.random.default_rng(8)
    pairs = k * (k - 1) // 2
    hits = 0
    for s in range(seeds):
        x = rng.integers(0, 2, (k, n), dtype=np.uint8)
        T = toeplitz_matrix(expand_seed(s, n + m - 1), m, n).astype(np.int64)
        h = (x.astype(np.int64) @ T.T) & 1
        assert len({r.tobytes() for r in x}) == k  # distinct inputs
        keys = h @ (1 << np.arange(m))
        _, counts = np.unique(keys, return_counts=True)
        hits += int(np.sum(counts * (counts - 1) // 2))
    trials = seeds * pairs
    p = 2.0**-m
    sigma = math.sqrt(trials * p * (1 - p))
    ok = golden and abs(hits - trials * p) <= 3 * sigma
    verdict(8, ok, f"golden output {'matches' if golden else 'differs'}; {hits} collisions in {trials} pairs, "
                   f"expected {trials * p:.1f} +- {3 * sigma:.1f} (3 sigma)")


@pytest.mark.slow
def test_c09_polarization_compensation():
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(100):
        T = PolarizationTransform.from_rotation(random_rotation(rng))
        res = optimize_compensation(apply_to_states(T, ideal_states()), starts=8)
        worst = max(worst, res.predicted_qber)
    drift = PolarizationTransform.from_rotation(rotation_matrix([0.3, 0.5, 0.8], math.radians(28)))
    drifted = apply_to_states(drift, paper_intrinsic_states())
    pre = predicted_qber(drifted)
    post = optimize_compensation(drifted).predicted_qber
    ok = worst < 0.001 and abs(post - 0.06) <= 0.01 and 0.10 <= pre <= 0.13
    verdict(9, ok, f"ideal states worst post QBER {worst:.2e} (< 0.1%); impure states pre {pre:.2%} "
                   f"(10-13%), post {post:.2%} (6.0 +-1.0%)")


def test_c10_tracking():
    p = ControllerParams()
    clean = simulate_tracking(constant_rate_path(0.75), VibrationModel(), p, 30.0, acquisition_time=0.5)
    late = clean.t > 20
    rate_err = float(np.max(np.abs(clean.rates[late, 0] - 0.75)))
    bounded = float(np.max(clean.radial_deviation()[clean.t > 1]))
    truck = np.mean([simulate_tracking(constant_rate_path(0.75), TRUCK_VIBRATION, p, 20.0, seed=s)
                     .rms_deviation(after=5) for s in range(5)])
    still = np.mean([simulate_tracking(constant_rate_path(0.75), STATIC_JITTER, p, 20.0, seed=s)
                     .rms_deviation(after=5) for s in range(5)])
    ok = rate_err < 1e-3 and bounded < 0.3 and abs(truck - 0.06) <= 0.02 and abs(still - 0.005) <= 0.002
    verdict(10, ok, f"steady rate error {rate_err:.1e} deg/s, max deviation {bounded:.3f} deg, "
                    f"RMS {truck:.4f} deg with vibration (0.06 +-0.02), {still:.4f} deg noiseless (0.005 +-0.002)")


@pytest.mark.slow
def test_c11_end_to_end(tmp_path):
    rc = main(["simulate", str(bundled_scenario_path("paper")), "--out", str(tmp_path / "run")])
    rep = io.read_json(tmp_path / "run" / "report.json")
    fields = all(k in rep for k in io.REPORT_FIELDS)
    q = rep["qber_signal"]
    ok = rc == 0 and fields and rep["secure_bits"] > 0 and 0.05 <= q <= 0.08
    verdict(11, ok, f"secure_bits={rep['secure_bits']}, qber_signal={q:.2%} in [5%, 8%], "
                    f"{'all' if fields else 'missing'} report fields, {rep['duration_s']} s above 1000 counts/s")
