"""Time-of-flight correction, pulse-phase recovery and coincidence windowing.

All timestamps are integer picoseconds. Corrections are computed in floating
point and rounded once, so applying the returned shift with the opposite sign
restores the input exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoLockError
from .linkgeom import Trajectory, interpolate_position, time_of_flight


@dataclass(frozen=True)
class TimingConfig:
    pulse_period: float = 12.5e-9
    coincidence_window: float = 0.16e-9
    histogram_bins: int = 256
    lock_threshold: float = 3.0
    clock_skew: float = 0.0  # receiver clock rate offset, s/s

    def __post_init__(self):
        if not 0 < self.coincidence_window <= self.pulse_period:
            raise ValueError("need 0 < coincidence_window <= pulse_period")
        if self.histogram_bins < 64:
            raise ValueError("histogram_bins must be at least 64")

    @property
    def period_ps(self) -> float:
        return self.pulse_period * 1e12


@dataclass(frozen=True)
class TofCorrection:
    timestamp_ps: np.ndarray  # corrected
    channel: np.ndarray
    shift_ps: np.ndarray  # subtracted from the input
    index: np.ndarray  # position of each kept event in the input
    rejected: int


def correct_tof(timestamp_ps, channel, traj: Trajectory, tx_pos, t0_ps: int = 0,
                clock_skew: float = 0.0) -> TofCorrection:
    """Subtract the modelled time of flight from each time tag.

    The receiver position comes from the latest trajectory fix extrapolated
    with its velocity, which makes the correction linear within each fix
    interval. Events before the first fix or more than one cadence after the
    last are rejected and counted. A nonzero ``clock_skew`` also removes a
    linear receiver-clock drift.
    """
    ts = np.asarray(timestamp_ps, dtype=np.int64)
    ch = np.asarray(channel)
    t = (ts - t0_ps) * 1e-12
    lo, hi = traj.span
    ok = (t >= lo) & (t <= hi)
    idx = np.nonzero(ok)[0]
    t_ok = t[ok]
    pos = interpolate_position(traj, t_ok) if t_ok.size else np.zeros((0, 3))
    tof = np.asarray(time_of_flight(tx_pos, pos), dtype=float).reshape(-1)
    shift = np.rint((tof + clock_skew * t_ok) * 1e12).astype(np.int64)
    return TofCorrection(ts[ok] - shift, ch[ok], shift, idx, int(ts.size - idx.size))


def fold(timestamp_ps, cfg: TimingConfig) -> np.ndarray:
    """Residual of each time tag within the pulse period, in [0, period) picoseconds."""
    return np.mod(np.asarray(timestamp_ps, dtype=np.float64), cfg.period_ps)


def find_phase(timestamp_ps, cfg: TimingConfig) -> tuple[float, float]:
    """Pulse arrival phase in ps, wrapped to [-period/2, period/2), and histogram contrast.

    The folded histogram's peak bin and its neighbours (baseline removed) are
    averaged on the circle. Contrast is peak count over median count.
    """
    ts = np.asarray(timestamp_ps)
    if ts.size < 100:
        raise NoLockError(f"need at least 100 events to lock, got {ts.size}")
    period = cfg.period_ps
    nb = cfg.histogram_bins
    hist = np.bincount(np.minimum((fold(ts, cfg) / period * nb).astype(np.int64), nb - 1), minlength=nb)
    peak = int(np.argmax(hist))
    med = float(np.median(hist))
    contrast = hist[peak] / med if med > 0 else float("inf")
    if contrast < cfg.lock_threshold:
        raise NoLockError(f"no timing lock: contrast {contrast:.2f} below {cfg.lock_threshold}")
    half = max(3, nb // 16)
    k = np.arange(peak - half, peak + half + 1)
    w = np.clip(hist[k % nb] - med, 0, None).astype(float)
    ang = 2 * np.pi * (k + 0.5) / nb
    phase = np.angle(np.sum(w * np.exp(1j * ang))) / (2 * np.pi) * period
    return float((phase + period / 2) % period - period / 2), float(contrast)


@dataclass(frozen=True, eq=False)
class SlotAssignment:
    """Per event: nearest pulse slot, signed distance from it (ps), and window verdict.

    ``residual_ps`` is measured from the slot's expected arrival time
    (slot * period + phase), so it lies within half a period of zero.
    """

    slot: np.ndarray
    channel: np.ndarray
    residual_ps: np.ndarray
    accepted: np.ndarray
    phase_ps: float

    def __len__(self):
        return len(self.slot)


def apply_window(timestamp_ps, channel, phase_ps: float, cfg: TimingConfig,
                 slot_offset: int = 0) -> SlotAssignment:
    """Assign each event to its nearest slot and keep those within window/2 of the phase.

    The window is closed: an event exactly window/2 away is accepted.
    """
    ts = np.asarray(timestamp_ps, dtype=np.int64)
    period = cfg.period_ps
    x = (ts - phase_ps) / period
    slot = np.rint(x).astype(np.int64)
    resid = (x - slot) * period
    accepted = np.abs(resid) <= cfg.coincidence_window * 1e12 / 2 + 1e-9
    return SlotAssignment(slot + slot_offset, np.asarray(channel), resid, accepted, float(phase_ps))


def assign_slots(timestamp_ps, channel, cfg: TimingConfig, traj: Trajectory | None = None,
                 tx_pos=None, t0_ps: int = 0) -> tuple[SlotAssignment, TofCorrection | None]:
    """ToF correction (when a trajectory is given), phase search and windowing in one call."""
    if traj is not None:
        corr = correct_tof(timestamp_ps, channel, traj, tx_pos, t0_ps, cfg.clock_skew)
        ts, ch = corr.timestamp_ps, corr.channel
    else:
        corr, ts, ch = None, np.asarray(timestamp_ps, np.int64), np.asarray(channel)
    phase, _ = find_phase(ts - t0_ps, cfg)
    return apply_window(ts - t0_ps, ch, phase, cfg), corr
