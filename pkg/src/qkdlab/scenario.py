"""Scenario files: one TOML document describing a complete simulated run.

Every key is optional except ``seed``; omitted keys take the defaults of the
bundled ``paper`` scenario. Unknown keys are rejected so typos surface as
errors instead of silently falling back to defaults.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .linkgeom import BeamModel, LossBudget, Trajectory, paper_trajectory
from .polcomp import BB84_LABELS, ideal_states, paper_intrinsic_states
from .qkdsim import DetectorConfig, SourceConfig
from .timesync import TimingConfig
from .tracksim import ControllerParams, VibrationModel

# section -> key -> expected type
_SCHEMA = {
    "": {"name": str, "duration_s": float, "seed": int},
    "source": {"pulse_rate_hz": float, "mu_signal": float, "mu_decoy": float, "p_signal": float,
               "p_decoy": float, "p_vacuum": float, "duty_open": float, "duty_polarized": float,
               "duty_blocked": float, "states": str},
    "detector": {"efficiency": float, "background_rate_hz": float, "jitter_ps": float, "dead_time_ns": float},
    "timing": {"pulse_period_ns": float, "window_ns": float, "histogram_bins": int,
               "lock_threshold": float, "clock_skew": float},
    "tracking": {"loop_rate_hz": float, "ewma_decay": float, "proportional_gain": float,
                 "motor_rate_limit_dps": float, "acquisition_s": float, "initial_offset_deg": list},
    "vibration": {"white_noise_rms_deg": float, "sway_amplitude_deg": float, "sway_period_s": float},
    "beam": {"waist_radius_m": float, "wavelength_m": float, "m2": float, "aperture_radius_m": float},
    "link": {"trajectory": str, "tx_position_m": list, "loss_mode": str, "constant_loss_db": float,
             "diffraction_db": float, "tx_pointing_turbulence_db": float, "rx_pointing_db": float,
             "fixed_db": float, "receiver_fov_deg": float, "normalize_pointing": bool},
    "polarization": {"drift_axis": list, "drift_angle_deg": float, "drift_rate_dps": float,
                     "compensate": bool, "tomography_rate_hz": float},
    "keyproc": {"snr_threshold": float, "round_to_bytes": bool, "pa_seed": int,
                "reconciliation_seed": int},
}


@dataclass(frozen=True)
class LinkConfig:
    trajectory: str = "paper"  # "paper", "static" or a CSV path
    tx_position_m: tuple = (0.0, 0.0, 12.0)
    loss_mode: str = "tracking"  # or "constant"
    constant_loss_db: float | None = None
    budget: LossBudget = field(default_factory=lambda: LossBudget(12.0, 4.3, 7.3, 7.0))
    receiver_fov_deg: float = 0.02
    normalize_pointing: bool = True


@dataclass(frozen=True)
class PolarizationConfig:
    drift_axis: tuple = (0.3, 0.5, 0.8)
    drift_angle_deg: float = 28.0
    drift_rate_dps: float = 0.0
    compensate: bool = True
    tomography_rate_hz: float = 5000.0  # counts per projector per second


@dataclass(frozen=True)
class KeyprocConfig:
    snr_threshold: float = 1000.0
    round_to_bytes: bool = False
    pa_seed: int = 0
    reconciliation_seed: int = 0


@dataclass(frozen=True)
class Scenario:
    seed: int
    name: str = "custom"
    duration_s: float = 10.0
    source: SourceConfig = field(default_factory=SourceConfig)
    states_name: str = "paper"
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    timing: TimingConfig = field(default_factory=TimingConfig)
    controller: ControllerParams = field(default_factory=ControllerParams)
    acquisition_s: float = 1.6
    initial_offset_deg: tuple = (0.25, -0.1)
    vibration: VibrationModel = field(default_factory=VibrationModel)
    beam: BeamModel | None = None
    link: LinkConfig = field(default_factory=LinkConfig)
    polarization: PolarizationConfig = field(default_factory=PolarizationConfig)
    keyproc: KeyprocConfig = field(default_factory=KeyprocConfig)
    base_dir: Path = field(default_factory=Path.cwd)

    def load_trajectory(self) -> tuple[Trajectory, np.ndarray]:
        from .io import read_trajectory

        tx = np.asarray(self.link.tx_position_m, dtype=float)
        if self.link.trajectory == "paper":
            traj, _ = paper_trajectory(self.duration_s)
            return traj, tx
        if self.link.trajectory == "static":
            start = tx + np.array([650.0, 0.0, 0.0])
            return Trajectory.straight_line(start, np.zeros(3), self.duration_s), tx
        return read_trajectory(self.base_dir / self.link.trajectory), tx

    def intrinsic_states(self):
        return paper_intrinsic_states() if self.states_name == "paper" else ideal_states()


def _check_types(doc: dict, path: str):
    for section, value in doc.items():
        if isinstance(value, dict):
            if section not in _SCHEMA or section == "":
                raise ConfigError(f"{path}: unknown section [{section}]")
            keys = value.items()
            schema = _SCHEMA[section]
            prefix = f"[{section}]."
        else:
            keys = [(section, value)]
            schema = _SCHEMA[""]
            prefix = ""
        for key, v in keys:
            if key not in schema:
                raise ConfigError(f"{path}: unknown key {prefix}{key}")
            want = schema[key]
            ok = (isinstance(v, want) and not (want is int and isinstance(v, bool))
                  or (want is float and isinstance(v, int) and not isinstance(v, bool)))
            if not ok:
                raise ConfigError(f"{path}: {prefix}{key}: expected {want.__name__}, got {type(v).__name__}")


def _vec(path, name, v, n):
    if len(v) != n or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        raise ConfigError(f"{path}: {name}: expected a list of {n} numbers")
    return tuple(float(x) for x in v)


def parse_scenario(doc: dict, path: str = "<scenario>", base_dir: Path | None = None,
                   require_seed: bool = True) -> Scenario:
    _check_types(doc, path)
    if require_seed and "seed" not in doc:
        raise ConfigError(f"{path}: seed is required")
    g = lambda sec, key, default: doc.get(sec, {}).get(key, default)  # noqa: E731
    try:
        src = doc.get("source", {})
        states_name = src.get("states", "paper")
        if states_name not in ("paper", "ideal"):
            raise ConfigError(f"{path}: [source].states: expected 'paper' or 'ideal', got {states_name!r}")
        states = paper_intrinsic_states() if states_name == "paper" else ideal_states()
        source = SourceConfig(
            pulse_rate=float(src.get("pulse_rate_hz", 8e7)), mu_signal=float(src.get("mu_signal", 0.495)),
            mu_decoy=float(src.get("mu_decoy", 0.120)), p_signal=float(src.get("p_signal", 0.62)),
            p_decoy=float(src.get("p_decoy", 0.07)), p_vacuum=float(src.get("p_vacuum", 0.31)),
            duty_open=float(src.get("duty_open", 0.5)), duty_polarized=float(src.get("duty_polarized", 0.2)),
            duty_blocked=float(src.get("duty_blocked", 0.3)), states=tuple(states[k] for k in BB84_LABELS))
        detector = DetectorConfig(
            efficiency=float(g("detector", "efficiency", 1.0)),
            background_rate=float(g("detector", "background_rate_hz", 1687.5)),
            jitter=float(g("detector", "jitter_ps", 231.0)) * 1e-12,
            dead_time=float(g("detector", "dead_time_ns", 50.0)) * 1e-9)
        timing = TimingConfig(
            pulse_period=float(g("timing", "pulse_period_ns", 1e9 / source.pulse_rate)) * 1e-9,
            coincidence_window=float(g("timing", "window_ns", 0.16)) * 1e-9,
            histogram_bins=int(g("timing", "histogram_bins", 256)),
            lock_threshold=float(g("timing", "lock_threshold", 3.0)),
            clock_skew=float(g("timing", "clock_skew", 0.0)))
        controller = ControllerParams(
            loop_rate=float(g("tracking", "loop_rate_hz", 24.0)),
            ewma_decay=float(g("tracking", "ewma_decay", 0.1)),
            proportional_gain=float(g("tracking", "proportional_gain", 3.0)),
            motor_rate_limit=float(g("tracking", "motor_rate_limit_dps", 5.0)))
        vibration = VibrationModel(
            white_noise_rms=float(g("vibration", "white_noise_rms_deg", 0.048)),
            low_frequency_amplitude=float(g("vibration", "sway_amplitude_deg", 0.04)),
            low_frequency_period=float(g("vibration", "sway_period_s", 1.3)))
        beam = None
        if "beam" in doc:
            b = doc["beam"]
            beam = BeamModel(float(b.get("waist_radius_m", 5e-3)), float(b.get("wavelength_m", 532e-9)),
                             float(b.get("m2", 1.0)), float(b.get("aperture_radius_m", 0.0254)))
        ln = doc.get("link", {})
        mode = ln.get("loss_mode", "tracking")
        if mode not in ("tracking", "constant"):
            raise ConfigError(f"{path}: [link].loss_mode: expected 'tracking' or 'constant', got {mode!r}")
        budget = LossBudget(float(ln.get("diffraction_db", 12.0)), float(ln.get("tx_pointing_turbulence_db", 4.3)),
                            float(ln.get("rx_pointing_db", 7.3)), float(ln.get("fixed_db", 7.0)))
        fov = float(ln.get("receiver_fov_deg", 0.02))
        if fov <= 0:
            raise ConfigError(f"{path}: [link].receiver_fov_deg: must be positive")
        link = LinkConfig(ln.get("trajectory", "paper"),
                          _vec(path, "[link].tx_position_m", ln.get("tx_position_m", [0.0, 0.0, 12.0]), 3),
                          mode, ln.get("constant_loss_db"), budget, fov, ln.get("normalize_pointing", True))
        if link.constant_loss_db is not None and link.constant_loss_db < 0:
            raise ConfigError(f"{path}: [link].constant_loss_db: must be nonnegative")
        pol = doc.get("polarization", {})
        polc = PolarizationConfig(_vec(path, "[polarization].drift_axis", pol.get("drift_axis", [0.3, 0.5, 0.8]), 3),
                                  float(pol.get("drift_angle_deg", 28.0)), float(pol.get("drift_rate_dps", 0.0)),
                                  bool(pol.get("compensate", True)), float(pol.get("tomography_rate_hz", 5000.0)))
        kp = doc.get("keyproc", {})
        keyc = KeyprocConfig(float(kp.get("snr_threshold", 1000.0)), bool(kp.get("round_to_bytes", False)),
                             int(kp.get("pa_seed", 0)), int(kp.get("reconciliation_seed", 0)))
        if keyc.snr_threshold < 0:
            raise ConfigError(f"{path}: [keyproc].snr_threshold: must be nonnegative")
        duration = float(doc.get("duration_s", 10.0))
        if duration <= 0:
            raise ConfigError(f"{path}: duration_s: must be positive")
        acq = float(g("tracking", "acquisition_s", 1.6))
        offset = _vec(path, "[tracking].initial_offset_deg", g("tracking", "initial_offset_deg", [0.25, -0.1]), 2)
        sc = Scenario(seed=int(doc.get("seed", 0)), name=str(doc.get("name", "custom")), duration_s=duration,
                      source=source, states_name=states_name, detector=detector, timing=timing, controller=controller,
                      acquisition_s=acq, initial_offset_deg=offset, vibration=vibration, beam=beam,
                      link=link, polarization=polc, keyproc=keyc, base_dir=base_dir or Path.cwd())
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if link.trajectory not in ("paper", "static"):
        p = sc.base_dir / link.trajectory
        if not p.exists():
            raise ConfigError(f"{path}: [link].trajectory: file not found: {p}")
    return sc


def load_scenario(path, seed: int | None = None) -> Scenario:
    """Read a scenario file; ``seed`` overrides the file's seed."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from exc
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if seed is not None:
        doc["seed"] = seed
    return parse_scenario(doc, str(path), path.parent)


def bundled_scenario_path(name: str = "paper") -> Path:
    p = resources.files("qkdlab") / "data" / f"{name}.toml"
    if not p.is_file():
        raise ConfigError(f"no bundled scenario named {name!r}")
    return Path(str(p))
