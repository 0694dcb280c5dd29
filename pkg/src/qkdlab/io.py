"""CSV and JSON readers/writers for every file a run produces or consumes.

Readers validate each row and raise ConfigError naming the file and line.
A last line that is cut short (no trailing newline and too few fields) is
treated as truncation: it is dropped and a warning is issued.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .linkgeom import Trajectory
from .polcomp import PROJECTORS, ProjectorCounts
from .qkdsim import CLASS_NAMES, FATE_NAMES, POLARIZED, BASIS_NAMES, DetectionLog, TruthLog

TRAJECTORY_HEADER = ["t_s", "x_m", "y_m", "z_m", "vx_mps", "vy_mps", "vz_mps"]
DEVIATION_HEADER = ["t_s", "dev_az_deg", "dev_el_deg", "rate_az_dps", "rate_el_dps"]
COUNTS_HEADER = ["t_s", "state", "nH", "nV", "nD", "nA", "nR", "nL"]
COMPENSATION_HEADER = ["theta1_deg", "theta2_deg", "theta3_deg", "predicted_qber"]
EVENTS_HEADER = ["timestamp_ps", "channel"]
TRUTH_HEADER = ["slot", "class", "basis", "bit", "fate"]
SLOTS_HEADER = ["slot", "channel", "accepted", "residual_ps"]
EMITTED_HEADER = ["second", "signal", "decoy", "vacuum"]

REPORT_FIELDS = ("duration_s", "mu_signal", "mu_decoy", "qber_signal", "qber_decoy", "gain_signal",
                 "gain_decoy", "q1_lower", "e1_upper", "y0", "loss_db", "ec_efficiency", "raw_bits",
                 "sifted_bits", "secure_bits")


class TruncationWarning(UserWarning):
    pass


def _read_rows(path, header: list[str]) -> list[tuple[int, list[str]]]:
    """(line number, fields) for each data row after checking the header."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from exc
    lines = text.splitlines()
    if not lines:
        raise ConfigError(f"{path}: empty file")
    got = [h.strip() for h in lines[0].split(",")]
    if got[:len(header)] != header:
        raise ConfigError(f"{path}:1: expected header {','.join(header)}, got {lines[0]!r}")
    rows = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = [f.strip() for f in next(csv.reader([line]))]
        if len(fields) < len(header):
            if i == len(lines) and not text.endswith("\n"):
                warnings.warn(f"{path}:{i}: truncated last line dropped", TruncationWarning, stacklevel=3)
                break
            raise ConfigError(f"{path}:{i}: expected {len(header)} fields, got {len(fields)}")
        rows.append((i, fields))
    return rows


def _num(path, lineno, name, value, kind=float):
    try:
        v = kind(value)
    except ValueError:
        raise ConfigError(f"{path}:{lineno}: field {name}: not a valid {kind.__name__}: {value!r}") from None
    if kind is float and not math.isfinite(v):
        raise ConfigError(f"{path}:{lineno}: field {name}: must be finite")
    return v


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def fmt(x: float) -> str:
    """Shortest round-trip repr, so files are byte-stable."""
    return repr(float(x))


# ---------------------------------------------------------------- trajectory

def write_trajectory(path, traj: Trajectory):
    _write_csv(path, TRAJECTORY_HEADER,
               ([fmt(t), *map(fmt, p), *map(fmt, v)] for t, p, v in zip(traj.t, traj.position, traj.velocity)))


def read_trajectory(path) -> Trajectory:
    rows = _read_rows(path, TRAJECTORY_HEADER)
    data = np.array([[_num(path, ln, h, f) for h, f in zip(TRAJECTORY_HEADER, fields)] for ln, fields in rows])
    if data.size == 0:
        raise ConfigError(f"{path}: no trajectory samples")
    try:
        return Trajectory(data[:, 0], data[:, 1:4], data[:, 4:7])
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------- tracking

def write_deviation(path, run):
    _write_csv(path, DEVIATION_HEADER,
               ([fmt(t), fmt(d[0]), fmt(d[1]), fmt(r[0]), fmt(r[1])]
                for t, d, r in zip(run.t, run.deviation, run.rates)))


def read_deviation(path) -> np.ndarray:
    rows = _read_rows(path, DEVIATION_HEADER)
    return np.array([[_num(path, ln, h, f) for h, f in zip(DEVIATION_HEADER, fields)] for ln, fields in rows]).reshape(-1, 5)


# ---------------------------------------------------------------- polarization

def write_counts(path, series):
    """``series`` is a list of (t_s, {state: ProjectorCounts})."""
    rows = []
    for t, by_state in series:
        for state, pc in by_state.items():
            rows.append([fmt(t), state, *(str(pc[p]) for p in PROJECTORS)])
    _write_csv(path, COUNTS_HEADER, rows)


def read_counts(path) -> list[tuple[float, dict[str, ProjectorCounts]]]:
    rows = _read_rows(path, COUNTS_HEADER)
    out: dict[float, dict[str, ProjectorCounts]] = {}
    for ln, f in rows:
        t = _num(path, ln, "t_s", f[0])
        state = f[1]
        if state not in ("H", "V", "D", "A"):
            raise ConfigError(f"{path}:{ln}: field state: must be one of H, V, D, A, got {state!r}")
        vals = {p: _num(path, ln, "n" + p, v, int) for p, v in zip(PROJECTORS, f[2:8])}
        if any(v < 0 for v in vals.values()):
            raise ConfigError(f"{path}:{ln}: counts must be nonnegative")
        out.setdefault(t, {})[state] = ProjectorCounts(vals)
    return sorted(out.items())


def write_compensation(path, rows):
    """``rows``: dicts with theta1_deg..predicted_qber and optional t_s, pre_qber."""
    extra = [k for k in ("t_s", "pre_qber") if rows and k in rows[0]]
    header = COMPENSATION_HEADER + extra
    _write_csv(path, header, ([fmt(r[k]) for k in header] for r in rows))


def read_compensation(path) -> list[dict]:
    rows = _read_rows(path, COMPENSATION_HEADER)
    header = [h.strip() for h in Path(path).read_text().splitlines()[0].split(",")]
    return [{h: _num(path, ln, h, v) for h, v in zip(header, f)} for ln, f in rows]


# ---------------------------------------------------------------- events and truth

def write_events(path, log: DetectionLog, extra_meta: dict | None = None):
    path = Path(path)
    _write_csv(path, EVENTS_HEADER, zip(log.timestamp_ps.tolist(), log.channel.tolist()))
    meta = {"pulse_rate_hz": log.pulse_rate, "t0_ps": int(log.t0_ps), "seed": log.seed}
    meta.update(extra_meta or {})
    write_json(sidecar_path(path), meta)


def sidecar_path(events_path) -> Path:
    p = Path(events_path)
    return p.with_suffix(".json")


def read_events(path) -> tuple[DetectionLog, dict]:
    path = Path(path)
    side = sidecar_path(path)
    if not side.exists():
        raise ConfigError(f"{path}: missing sidecar metadata {side.name}")
    meta = read_json(side)
    for key in ("pulse_rate_hz", "t0_ps", "seed"):
        if key not in meta:
            raise ConfigError(f"{side}: missing field {key}")
    rows = _read_rows(path, EVENTS_HEADER)
    ts = np.empty(len(rows), dtype=np.int64)
    ch = np.empty(len(rows), dtype=np.uint8)
    prev = None
    for k, (ln, f) in enumerate(rows):
        t = _num(path, ln, "timestamp_ps", f[0], int)
        c = _num(path, ln, "channel", f[1], int)
        if not 0 <= c <= 3:
            raise ConfigError(f"{path}:{ln}: field channel: must be 0..3, got {c}")
        if prev is not None and t < prev:
            raise ConfigError(f"{path}:{ln}: field timestamp_ps: timestamps must be nondecreasing")
        ts[k], ch[k], prev = t, c, t
    return DetectionLog(ts, ch, float(meta["pulse_rate_hz"]), int(meta["t0_ps"]), meta["seed"]), meta


def _fate_label(fate: int, proj: int) -> str:
    return f"polarized-{PROJECTORS[proj]}" if fate == POLARIZED else FATE_NAMES[fate]


def write_truth(path, truth: TruthLog):
    _write_csv(path, TRUTH_HEADER,
               ([s, CLASS_NAMES[c], BASIS_NAMES[b], k, _fate_label(f, p)]
                for s, c, b, k, f, p in zip(truth.slot.tolist(), truth.cls.tolist(), truth.basis.tolist(),
                                            truth.bit.tolist(), truth.fate.tolist(), truth.projector.tolist())))


def read_truth(path) -> TruthLog:
    rows = _read_rows(path, TRUTH_HEADER)
    n = len(rows)
    slot = np.empty(n, np.int64)
    cols = [np.empty(n, np.uint8) for _ in range(4)]
    proj = np.full(n, -1, np.int8)
    for k, (ln, f) in enumerate(rows):
        slot[k] = _num(path, ln, "slot", f[0], int)
        try:
            cols[0][k] = CLASS_NAMES.index(f[1])
            cols[1][k] = BASIS_NAMES.index(f[2])
        except ValueError:
            raise ConfigError(f"{path}:{ln}: unknown class or basis {f[1]!r}/{f[2]!r}") from None
        bit = _num(path, ln, "bit", f[3], int)
        if bit not in (0, 1):
            raise ConfigError(f"{path}:{ln}: field bit: must be 0 or 1")
        cols[2][k] = bit
        fate = f[4]
        if fate.startswith("polarized-") and fate[10:] in PROJECTORS:
            cols[3][k], proj[k] = POLARIZED, PROJECTORS.index(fate[10:])
        elif fate in ("open", "blocked"):
            cols[3][k] = FATE_NAMES.index(fate)
        else:
            raise ConfigError(f"{path}:{ln}: field fate: unknown value {fate!r}")
    if np.any(np.diff(slot) <= 0):
        raise ConfigError(f"{path}: slot indices must be strictly increasing")
    return TruthLog(slot, *cols, proj)


def write_emitted(path, emitted: np.ndarray):
    _write_csv(path, EMITTED_HEADER, ([i, *row] for i, row in enumerate(np.asarray(emitted).tolist())))


def read_emitted(path) -> np.ndarray:
    rows = _read_rows(path, EMITTED_HEADER)
    return np.array([[_num(path, ln, h, v, int) for h, v in zip(EMITTED_HEADER[1:], f[1:4])]
                     for ln, f in rows], dtype=np.int64).reshape(-1, 3)


def write_slots(path, assignment):
    _write_csv(path, SLOTS_HEADER,
               ([s, c, "true" if a else "false", int(round(r))]
                for s, c, a, r in zip(assignment.slot.tolist(), np.asarray(assignment.channel).tolist(),
                                      assignment.accepted.tolist(), assignment.residual_ps.tolist())))


# ---------------------------------------------------------------- keys and reports

def write_key(directory, bits, stem: str = "key"):
    from .keyproc.privacy import bits_to_hex, bits_to_str

    directory = Path(directory)
    (directory / f"{stem}.hex").write_text(bits_to_hex(bits) + "\n")
    (directory / f"{stem}.bits").write_text(bits_to_str(bits) + "\n")


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def write_series(path, header, columns):
    _write_csv(path, header, ([fmt(v) if isinstance(v, float) else v for v in row] for row in zip(*columns)))


def report_to_csv(report: dict) -> str:
    lines = ["field,value"]
    lines += [f"{k},{report[k]}" for k in REPORT_FIELDS]
    return "\n".join(lines) + "\n"
