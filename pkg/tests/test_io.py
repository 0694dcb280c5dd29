import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qkdlab import io
from qkdlab.errors import ConfigError
from qkdlab.linkgeom import Trajectory
from qkdlab.polcomp import ProjectorCounts
from qkdlab.qkdsim import DetectionLog, TruthLog


def test_trajectory_roundtrip(tmp_path):
    traj = Trajectory.straight_line([600.0, 1.5, 12.0], [4.5, -9.1, 0.0], 5)
    io.write_trajectory(tmp_path / "t.csv", traj)
    back = io.read_trajectory(tmp_path / "t.csv")
    np.testing.assert_array_equal(back.position, traj.position)
    np.testing.assert_array_equal(back.velocity, traj.velocity)


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=5))
def test_float_format_roundtrips(xs):
    assert [float(io.fmt(x)) for x in xs] == [float(x) for x in xs]


def test_events_roundtrip_with_sidecar(tmp_path):
    log = DetectionLog(np.array([5, 7, 7, 10**12]), np.array([0, 3, 1, 2]), 8e7, 0, 4)
    io.write_events(tmp_path / "e.csv", log, {"note": "x"})
    back, meta = io.read_events(tmp_path / "e.csv")
    np.testing.assert_array_equal(back.timestamp_ps, log.timestamp_ps)
    np.testing.assert_array_equal(back.channel, log.channel)
    assert meta["seed"] == 4 and meta["note"] == "x" and back.pulse_rate == 8e7


def test_events_need_sidecar(tmp_path):
    (tmp_path / "e.csv").write_text("timestamp_ps,channel\n1,0\n")
    with pytest.raises(ConfigError, match="sidecar"):
        io.read_events(tmp_path / "e.csv")


@pytest.mark.parametrize("body,msg", [
    ("timestamp_ps,channel\n1,0\nabc,1\n", ":3"),
    ("timestamp_ps,channel\n1,0\n2,7\n", "channel"),
    ("timestamp_ps,channel\n5,0\n2,1\n", "nondecreasing"),
    ("time,channel\n5,0\n", ":1"),
])
def test_event_errors_name_the_line(tmp_path, body, msg):
    (tmp_path / "e.csv").write_text(body)
    io.write_json(tmp_path / "e.json", {"pulse_rate_hz": 8e7, "t0_ps": 0, "seed": 0})
    with pytest.raises(ConfigError, match=msg):
        io.read_events(tmp_path / "e.csv")


def test_truncated_last_line_warns(tmp_path):
    (tmp_path / "e.csv").write_text("timestamp_ps,channel\n1,0\n2,1\n3")
    io.write_json(tmp_path / "e.json", {"pulse_rate_hz": 8e7, "t0_ps": 0, "seed": 0})
    with pytest.warns(io.TruncationWarning):
        log, _ = io.read_events(tmp_path / "e.csv")
    assert len(log) == 2


def test_short_line_in_the_middle_is_an_error(tmp_path):
    (tmp_path / "e.csv").write_text("timestamp_ps,channel\n1\n2,1\n")
    io.write_json(tmp_path / "e.json", {"pulse_rate_hz": 8e7, "t0_ps": 0, "seed": 0})
    with pytest.raises(ConfigError, match=":2"):
        io.read_events(tmp_path / "e.csv")


def test_truth_roundtrip(tmp_path):
    t = TruthLog(np.array([1, 4, 9]), np.array([0, 1, 2], np.uint8), np.array([0, 1, 0], np.uint8),
                 np.array([1, 0, 1], np.uint8), np.array([0, 1, 2], np.uint8), np.array([-1, 4, -1], np.int8))
    io.write_truth(tmp_path / "t.csv", t)
    assert "polarized-R" in (tmp_path / "t.csv").read_text()
    back = io.read_truth(tmp_path / "t.csv")
    for name in ("slot", "cls", "basis", "bit", "fate", "projector"):
        np.testing.assert_array_equal(getattr(back, name), getattr(t, name))


def test_counts_and_compensation_roundtrip(tmp_path):
    pc = ProjectorCounts({"H": 9, "V": 1, "D": 5, "A": 5, "R": 6, "L": 4})
    io.write_counts(tmp_path / "c.csv", [(0.0, {s: pc for s in "HVDA"}), (1.0, {"H": pc})])
    back = io.read_counts(tmp_path / "c.csv")
    assert [t for t, _ in back] == [0.0, 1.0]
    assert back[0][1]["D"]["R"] == 6
    rows = [{"theta1_deg": 1.0, "theta2_deg": 2.0, "theta3_deg": 3.0, "predicted_qber": 0.05, "t_s": 0.0}]
    io.write_compensation(tmp_path / "k.csv", rows)
    assert io.read_compensation(tmp_path / "k.csv") == rows


def test_counts_reject_unknown_state(tmp_path):
    (tmp_path / "c.csv").write_text("t_s,state,nH,nV,nD,nA,nR,nL\n0,Q,1,1,1,1,1,1\n")
    with pytest.raises(ConfigError, match=":2"):
        io.read_counts(tmp_path / "c.csv")


def test_emitted_and_key_files(tmp_path):
    io.write_emitted(tmp_path / "m.csv", np.array([[1, 2, 3], [4, 5, 6]]))
    np.testing.assert_array_equal(io.read_emitted(tmp_path / "m.csv"), [[1, 2, 3], [4, 5, 6]])
    io.write_key(tmp_path, np.array([1, 0, 1, 0, 0, 0, 0, 1, 1], np.uint8))
    assert (tmp_path / "key.hex").read_text() == "a180\n"
    assert (tmp_path / "key.bits").read_text() == "101000011\n"


def test_report_csv():
    rep = {k: i for i, k in enumerate(io.REPORT_FIELDS)}
    lines = io.report_to_csv(rep).splitlines()
    assert lines[0] == "field,value" and len(lines) == 16
    assert lines[-1] == "secure_bits,14"


def test_missing_file_is_config_error(tmp_path):
    with pytest.raises(ConfigError):
        io.read_trajectory(tmp_path / "none.csv")
    with pytest.raises(ConfigError):
        io.read_json(tmp_path / "none.json")
