"""Two-axis beacon tracking loop: velocity feed-forward plus proportional correction.

Each tick the camera reports the beacon-spot deviation from the nominal
center. The controller keeps an exponentially weighted average of the spot's
per-tick velocity and commands the motors to that velocity plus a
proportional term on the current deviation. Both axes run independently.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import InsufficientHistoryError


@dataclass(frozen=True)
class GimbalState:
    azimuth: float = 0.0
    elevation: float = 0.0
    azimuth_rate: float = 0.0
    elevation_rate: float = 0.0

    @property
    def angles(self) -> np.ndarray:
        return np.array([self.azimuth, self.elevation])

    @property
    def rates(self) -> np.ndarray:
        return np.array([self.azimuth_rate, self.elevation_rate])


@dataclass(frozen=True)
class BeaconSample:
    """Camera measurement at time ``t``.

    ``motor_rate`` is the gimbal rate applied over the interval that ended at
    this sample; it lets the controller convert camera-frame spot motion into
    target motion.
    """

    t: float
    deviation: tuple[float, float]
    valid: bool = True
    motor_rate: tuple[float, float] = (0.0, 0.0)


@dataclass(frozen=True)
class ControllerParams:
    loop_rate: float = 24.0
    ewma_decay: float = 0.1
    proportional_gain: float = 3.0
    motor_rate_limit: float = 5.0

    def __post_init__(self):
        if self.loop_rate <= 0:
            raise ValueError("loop_rate must be positive")
        if not 0 < self.ewma_decay <= 1:
            raise ValueError("ewma_decay must lie in (0, 1]")
        if self.proportional_gain < 0:
            raise ValueError("proportional_gain must be nonnegative")
        if self.motor_rate_limit <= 0:
            raise ValueError("motor_rate_limit must be positive")

    @property
    def dt(self) -> float:
        return 1.0 / self.loop_rate


@dataclass(frozen=True)
class VibrationModel:
    """Additive pointing jitter: white noise per tick plus a slow sinusoidal sway (degrees)."""

    white_noise_rms: float = 0.0
    low_frequency_amplitude: float = 0.0
    low_frequency_period: float = 1.0

    def __post_init__(self):
        if min(self.white_noise_rms, self.low_frequency_amplitude, self.low_frequency_period) < 0:
            raise ValueError("vibration parameters must be nonnegative")


# Calibrated to the field-test deviation statistics (transmitter / truck receiver).
STATIC_JITTER = VibrationModel(white_noise_rms=0.005)
TRUCK_VIBRATION = VibrationModel(white_noise_rms=0.048, low_frequency_amplitude=0.04,
                                 low_frequency_period=1.3)


def estimate_spot_velocity(history: Sequence[BeaconSample], params: ControllerParams,
                           use_motor_rates: bool = False) -> np.ndarray:
    """EWMA of per-tick finite-difference spot velocities, degrees/second per axis.

    Only consecutive valid samples contribute differences. With
    ``use_motor_rates`` each difference has the motor rate of that interval
    added back, which turns camera-frame motion into target motion.
    """
    valid = [s for s in history if s.valid]
    if len(valid) < 2:
        raise InsufficientHistoryError("need at least two valid beacon samples")
    alpha = params.ewma_decay
    est = None
    for prev, cur in zip(valid[:-1], valid[1:]):
        dt = cur.t - prev.t
        v = (np.asarray(cur.deviation) - np.asarray(prev.deviation)) / dt
        if use_motor_rates:
            v = v + np.asarray(cur.motor_rate)
        est = v if est is None else (1 - alpha) * est + alpha * v
    return est


def clamp_rates(rates, limit: float) -> np.ndarray:
    return np.clip(rates, -limit, limit)


def control_step(state: GimbalState, sample: BeaconSample, history: Sequence[BeaconSample],
                 params: ControllerParams, use_motor_rates: bool = False) -> np.ndarray:
    """Commanded motor rates: estimated spot velocity + gain * deviation, saturated per axis.

    ``history`` holds earlier samples; ``sample`` is the newest. An invalid
    sample holds the gimbal's current rates.
    """
    if not sample.valid:
        return state.rates
    try:
        vel = estimate_spot_velocity(list(history) + [sample], params, use_motor_rates)
    except InsufficientHistoryError:
        vel = np.zeros(2)
    cmd = vel + params.proportional_gain * np.asarray(sample.deviation, dtype=float)
    return clamp_rates(cmd, params.motor_rate_limit)


class Tracker:
    """Recursive form of the controller used inside the simulation loop.

    Keeps the EWMA of target-velocity samples so each tick costs O(1); the
    result matches ``control_step`` fed with the full history and motor rates.
    """

    def __init__(self, params: ControllerParams):
        self.params = params
        self.velocity = None
        self._prev = None
        self.command = np.zeros(2)

    def step(self, sample: BeaconSample) -> np.ndarray:
        p = self.params
        if not sample.valid:
            return self.command
        dev = np.asarray(sample.deviation, dtype=float)
        if self._prev is not None:
            v = (dev - self._prev[1]) / (sample.t - self._prev[0]) + np.asarray(sample.motor_rate)
            self.velocity = v if self.velocity is None else (1 - p.ewma_decay) * self.velocity + p.ewma_decay * v
        self._prev = (sample.t, dev)
        vel = self.velocity if self.velocity is not None else np.zeros(2)
        self.command = clamp_rates(vel + p.proportional_gain * dev, p.motor_rate_limit)
        return self.command


@dataclass(frozen=True, eq=False)
class TrackingRun:
    t: np.ndarray
    deviation: np.ndarray  # (n, 2) measured deviation, degrees
    rates: np.ndarray  # (n, 2) commanded motor rates, degrees/second
    valid: np.ndarray  # (n,) beacon acquired

    def radial_deviation(self) -> np.ndarray:
        return np.hypot(self.deviation[:, 0], self.deviation[:, 1])

    def rms_deviation(self, after: float = 0.0) -> float:
        sel = self.valid & (self.t >= after)
        r = self.radial_deviation()[sel]
        return float(np.sqrt(np.mean(r**2))) if r.size else float("nan")

    def mean_deviation(self, after: float = 0.0) -> float:
        sel = self.valid & (self.t >= after)
        return float(np.mean(self.radial_deviation()[sel]))


def constant_rate_path(rate_az: float, rate_el: float = 0.0, az0: float = 0.0, el0: float = 0.0):
    return lambda t: np.array([az0 + rate_az * t, el0 + rate_el * t])


def trajectory_path(traj, observer, target_is_observer: bool = False):
    """Pointing direction (az, el) in degrees versus time along a trajectory.

    By default this is the receiver direction seen from ``observer`` (the
    transmitter). With ``target_is_observer`` the roles swap: the receiver
    looks back at the fixed ``observer``.
    """
    from .linkgeom import azimuth_elevation, interpolate_position

    observer = np.asarray(observer, dtype=float)

    def path(t):
        p = interpolate_position(traj, np.asarray([t], dtype=float))[0]
        if target_is_observer:
            az, el = azimuth_elevation(p, observer)
        else:
            az, el = azimuth_elevation(observer, p)
        return np.array([float(az), float(el)])

    return path


def simulate_tracking(target: Callable[[float], np.ndarray], vibration: VibrationModel,
                      params: ControllerParams, duration: float, seed: int = 0,
                      acquisition_time: float = 1.6,
                      initial_offset=(0.25, -0.1)) -> TrackingRun:
    """Closed-loop tracking run at the controller's loop rate.

    The gimbal starts pointing ``initial_offset`` degrees away from the target
    and stays still until ``acquisition_time``. Vibration is added to the
    measured deviation; the sinusoidal sway has a seed-dependent phase.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    rng = np.random.default_rng(seed)
    dt = params.dt
    n = int(round(duration * params.loop_rate))
    t = np.arange(n) * dt
    phase = rng.uniform(0, 2 * np.pi, size=2)
    white = rng.normal(0.0, vibration.white_noise_rms / np.sqrt(2), size=(n, 2))
    if vibration.low_frequency_amplitude > 0 and vibration.low_frequency_period > 0:
        sway = vibration.low_frequency_amplitude * np.sin(
            2 * np.pi * t[:, None] / vibration.low_frequency_period + phase)
    else:
        sway = np.zeros((n, 2))
    noise = white + sway

    angle = np.asarray(target(0.0), dtype=float) - np.asarray(initial_offset, dtype=float)
    tracker = Tracker(params)
    rate = np.zeros(2)
    dev_out = np.empty((n, 2))
    rate_out = np.empty((n, 2))
    valid = t >= acquisition_time
    for k in range(n):
        true_dev = np.asarray(target(t[k]), dtype=float) - angle
        dev = true_dev + noise[k]
        sample = BeaconSample(float(t[k]), (dev[0], dev[1]), bool(valid[k]), (rate[0], rate[1]))
        rate = tracker.step(sample) if valid[k] else rate
        dev_out[k] = dev
        rate_out[k] = rate
        angle = angle + rate * dt
    return TrackingRun(t, dev_out, rate_out, valid)


def pointing_coupling(deviation, receiver_fov: float, beam_divergence: float | None = None) -> np.ndarray:
    """Per-sample Gaussian acceptance, zero beyond the field of view.

    ``deviation`` may be radial angles (n,) or two-axis offsets (n, 2).
    """
    d = np.asarray(deviation, dtype=float)
    theta = np.hypot(d[:, 0], d[:, 1]) if d.ndim == 2 else np.abs(d)
    theta_e = beam_divergence if beam_divergence is not None else receiver_fov
    c = np.exp(-2.0 * (theta / theta_e) ** 2)
    c[theta > receiver_fov] = 0.0
    return c


def pointing_loss(deviation, receiver_fov: float, beam_divergence: float | None = None) -> float:
    """Time-averaged pointing loss in dB: -10 log10 of the mean per-sample coupling."""
    if receiver_fov <= 0:
        raise ValueError("receiver_fov must be positive")
    d = np.asarray(deviation, dtype=float)
    if d.size == 0:
        raise ValueError("empty deviation series")
    mean = float(np.mean(pointing_coupling(d, receiver_fov, beam_divergence)))
    return float("inf") if mean == 0 else -10.0 * np.log10(mean)
