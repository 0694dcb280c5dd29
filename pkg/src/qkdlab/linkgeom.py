"""Link geometry and radiometry for a ground transmitter and a moving receiver.

Positions live in a single local East-North-Up frame in meters. Angles are
degrees at the public boundary and radians internally.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import OutOfRangeError, SingularGeometryError

C_LIGHT = 299_792_458.0  # m/s, exact
GM_EARTH = 3.986004418e14  # m^3/s^2
R_EARTH = 6.371e6  # m
OMEGA_EARTH = 7.2921159e-5  # rad/s


@dataclass(frozen=True)
class GroundFrame:
    """Local tangent frame anchored at a geodetic point.

    Only the ENU convention is supported; all positions in a scenario must
    be expressed in the same frame.
    """

    latitude_deg: float = 43.4723
    longitude_deg: float = -80.5449
    altitude_m: float = 330.0
    axes: str = "ENU"

    def __post_init__(self):
        if self.axes != "ENU":
            raise ValueError(f"unsupported axes convention {self.axes!r}")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Timestamped receiver positions and velocities (one row per GPS fix)."""

    t: np.ndarray
    position: np.ndarray
    velocity: np.ndarray
    frame: GroundFrame = field(default_factory=GroundFrame)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float).reshape(-1)
        pos = np.asarray(self.position, dtype=float).reshape(-1, 3)
        vel = np.asarray(self.velocity, dtype=float).reshape(-1, 3)
        if not (len(t) == len(pos) == len(vel)):
            raise ValueError("t, position and velocity must have the same length")
        if len(t) == 0:
            raise ValueError("trajectory needs at least one sample")
        if np.any(np.diff(t) <= 0):
            raise ValueError("trajectory timestamps must be strictly increasing")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(vel))):
            raise ValueError("positions and velocities must be finite")
        for name, arr in (("t", t), ("position", pos), ("velocity", vel)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self):
        return len(self.t)

    @property
    def cadence(self) -> float:
        """Median sample spacing in seconds (1 s for per-second GPS)."""
        if len(self.t) < 2:
            return 1.0
        return float(np.median(np.diff(self.t)))

    @property
    def span(self) -> tuple[float, float]:
        """Time interval over which first-order hold is trusted (last sample + one cadence)."""
        return float(self.t[0]), float(self.t[-1] + self.cadence)

    @classmethod
    def straight_line(cls, start, velocity, duration: float, cadence: float = 1.0,
                      t0: float = 0.0) -> "Trajectory":
        """Constant-velocity trajectory sampled every ``cadence`` seconds."""
        start = np.asarray(start, dtype=float)
        velocity = np.asarray(velocity, dtype=float)
        n = int(np.floor(duration / cadence + 1e-9)) + 1
        t = t0 + cadence * np.arange(n)
        pos = start + np.outer(t - t0, velocity)
        vel = np.tile(velocity, (n, 1))
        return cls(t, pos, vel)


@dataclass(frozen=True)
class LossBudget:
    """Link loss split into its dB contributions (all nonnegative)."""

    diffraction_dB: float = 0.0
    tx_pointing_turbulence_dB: float = 0.0
    rx_pointing_dB: float = 0.0
    fixed_dB: float = 0.0

    def __post_init__(self):
        for name in ("diffraction_dB", "tx_pointing_turbulence_dB", "rx_pointing_dB", "fixed_dB"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    @property
    def total_dB(self) -> float:
        return total_loss(self)


@dataclass(frozen=True)
class BeamModel:
    waist_radius: float
    wavelength: float = 532e-9
    m2: float = 1.0
    receiver_aperture_radius: float = 0.0254

    def __post_init__(self):
        if self.waist_radius <= 0:
            raise ValueError("waist_radius must be positive")
        if self.wavelength <= 0:
            raise ValueError("wavelength must be positive")
        if self.m2 < 1:
            raise ValueError("beam quality factor M2 must be >= 1")


PAPER_BUDGET = LossBudget(diffraction_dB=12.0, tx_pointing_turbulence_dB=4.3,
                          rx_pointing_dB=7.3, fixed_dB=7.0)


def time_of_flight(tx_pos, rx_pos):
    """Light propagation delay in seconds between two points (vectorized over leading axes)."""
    d = np.linalg.norm(np.asarray(rx_pos, dtype=float) - np.asarray(tx_pos, dtype=float), axis=-1)
    out = d / C_LIGHT
    return float(out) if np.ndim(out) == 0 else out


def _sample_index(traj: Trajectory, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(t < traj.t[0]):
        raise OutOfRangeError(f"time {np.min(t)} precedes first trajectory sample {traj.t[0]}")
    return np.searchsorted(traj.t, t, side="right") - 1


def interpolate_position(traj: Trajectory, t):
    """Position at ``t`` by first-order hold: latest fix plus its velocity times elapsed time."""
    idx = _sample_index(traj, t)
    dt = np.asarray(t, dtype=float) - traj.t[idx]
    return traj.position[idx] + dt[..., None] * traj.velocity[idx]


def velocity_at(traj: Trajectory, t):
    return traj.velocity[_sample_index(traj, t)]


def radial_velocity(traj: Trajectory, observer, t):
    """Range rate in m/s of the receiver as seen from ``observer`` (positive = receding)."""
    r = interpolate_position(traj, t) - np.asarray(observer, dtype=float)
    rng = np.linalg.norm(r, axis=-1)
    if np.any(rng == 0):
        raise SingularGeometryError("zero range to receiver")
    return np.sum(r * velocity_at(traj, t), axis=-1) / rng


def tof_rate(traj: Trajectory, observer, t):
    """Time-of-flight drift d(ToF)/dt, dimensionless (s per s)."""
    return radial_velocity(traj, observer, t) / C_LIGHT


def angular_rate(traj: Trajectory, observer, t):
    """Apparent angular speed of the receiver seen from ``observer``, degrees/second."""
    r = interpolate_position(traj, t) - np.asarray(observer, dtype=float)
    v = velocity_at(traj, t)
    rng = np.linalg.norm(r, axis=-1)
    if np.any(rng == 0):
        raise SingularGeometryError("zero range: angular rate undefined")
    rhat = r / rng[..., None]
    v_perp = v - np.sum(v * rhat, axis=-1)[..., None] * rhat
    out = np.degrees(np.linalg.norm(v_perp, axis=-1) / rng)
    return float(out) if np.ndim(out) == 0 else out


def azimuth_elevation(observer, target):
    """Azimuth (from north, toward east) and elevation of ``target``, in degrees."""
    d = np.asarray(target, dtype=float) - np.asarray(observer, dtype=float)
    az = np.degrees(np.arctan2(d[..., 0], d[..., 1]))
    el = np.degrees(np.arctan2(d[..., 2], np.hypot(d[..., 0], d[..., 1])))
    return az, el


def leo_max_angular_rate(altitude: float, earth_rotation: bool = False) -> float:
    """Zenith angular rate of a circular LEO pass, degrees/second.

    With ``earth_rotation`` the ground observer co-rotates with a prograde
    equatorial orbit, which lowers the apparent rate slightly.
    """
    if altitude <= 0:
        raise ValueError("altitude must be positive")
    r = R_EARTH + altitude
    v = np.sqrt(GM_EARTH / r)
    if earth_rotation:
        v -= OMEGA_EARTH * r
    return float(np.degrees(v / altitude))


def beam_radius_at(beam: BeamModel, z: float) -> float:
    """1/e^2 radius of an M^2-scaled Gaussian beam after propagating ``z`` meters."""
    if np.any(np.asarray(z) < 0):
        raise ValueError("z must be nonnegative")
    zr_inv = beam.m2 * beam.wavelength / (np.pi * beam.waist_radius**2)
    return beam.waist_radius * np.sqrt(1.0 + (np.asarray(z) * zr_inv) ** 2)


def fit_m2(waist_radius: float, wavelength: float, z: float, spot_radius: float) -> float:
    """M^2 that makes the beam radius at ``z`` equal ``spot_radius``."""
    def resid(m2):
        return beam_radius_at(BeamModel(waist_radius, wavelength, m2), z) - spot_radius

    if resid(1.0) > 0:
        raise ValueError("spot is smaller than a diffraction-limited beam allows")
    hi = 2.0
    while resid(hi) < 0:
        hi *= 2
    return float(brentq(resid, 1.0, hi, xtol=1e-12))


def aperture_coupling_loss(spot_radius, aperture_radius):
    """Loss in dB of a centered Gaussian spot (1/e^2 radius) clipped by a circular aperture."""
    spot_radius = np.asarray(spot_radius, dtype=float)
    aperture_radius = np.asarray(aperture_radius, dtype=float)
    if np.any(spot_radius <= 0) or np.any(aperture_radius <= 0):
        raise ValueError("radii must be positive")
    frac = -np.expm1(-2.0 * (aperture_radius / spot_radius) ** 2)
    out = -10.0 * np.log10(frac)
    return float(out) if np.ndim(out) == 0 else out


def total_loss(budget: LossBudget) -> float:
    return (budget.diffraction_dB + budget.tx_pointing_turbulence_dB
            + budget.rx_pointing_dB + budget.fixed_dB)


def db_to_transmittance(loss_db):
    return 10.0 ** (-np.asarray(loss_db, dtype=float) / 10.0)


def transmittance_to_db(eta):
    with np.errstate(divide="ignore"):
        return -10.0 * np.log10(np.asarray(eta, dtype=float))


def paper_trajectory(duration: float = 10.0, cadence: float = 1.0) -> tuple[Trajectory, np.ndarray]:
    """Truck pass resembling the field test: 580-625 m range at 33 km/h.

    Over 10 s the mean apparent angular rate is ~0.76 deg/s and the mean
    time-of-flight drift ~15 ns/s.

    Returns the trajectory and the transmitter position.
    """
    speed = 33.0 / 3.6
    radial = 4.0
    transverse = np.sqrt(speed**2 - radial**2)
    tx = np.array([0.0, 0.0, 12.0])
    # line of sight to the start point points north-east; truck moves mostly across it
    los = np.array([np.sin(np.radians(40.0)), np.cos(np.radians(40.0)), 0.0])
    across = np.array([los[1], -los[0], 0.0])
    start = tx + 580.0 * los + np.array([0.0, 0.0, -10.0])
    vel = radial * los + transverse * across
    return Trajectory.straight_line(start, vel, duration, cadence), tx
