import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qkdlab.errors import OutOfRangeError, SingularGeometryError
from qkdlab.linkgeom import (C_LIGHT, PAPER_BUDGET, BeamModel, LossBudget, Trajectory, angular_rate,
                             aperture_coupling_loss, azimuth_elevation, beam_radius_at,
                             db_to_transmittance, fit_m2, interpolate_position, leo_max_angular_rate,
                             paper_trajectory, radial_velocity, time_of_flight, tof_rate, total_loss,
                             transmittance_to_db)


def test_time_of_flight_650m():
    assert time_of_flight([0, 0, 0], [650.0, 0, 0]) == pytest.approx(2.16817e-6, rel=1e-5)


def test_time_of_flight_vectorized():
    rx = np.array([[300.0, 0, 0], [0, 600.0, 0]])
    np.testing.assert_allclose(time_of_flight(np.zeros(3), rx), [300 / C_LIGHT, 600 / C_LIGHT])


def test_interpolation_is_first_order_hold():
    traj = Trajectory([0.0, 1.0], [[0, 0, 0], [10, 0, 0]], [[4, 0, 0], [4, 1, 0]])
    # between fixes the latest fix is extrapolated with its own velocity
    np.testing.assert_allclose(interpolate_position(traj, [0.5]), [[2.0, 0, 0]])
    np.testing.assert_allclose(interpolate_position(traj, [1.5]), [[12.0, 0.5, 0]])


def test_interpolation_before_span_raises():
    traj = Trajectory.straight_line([0, 0, 0], [1, 0, 0], 5)
    with pytest.raises(OutOfRangeError):
        interpolate_position(traj, [-0.1])


def test_trajectory_rejects_unsorted_times():
    with pytest.raises(ValueError):
        Trajectory([0.0, 0.0], np.zeros((2, 3)), np.zeros((2, 3)))


def test_radial_velocity_and_tof_rate():
    traj = Trajectory.straight_line([600.0, 0, 0], [4.5, 3.0, 0], 10)
    assert radial_velocity(traj, [0, 0, 0], [0.0])[0] == pytest.approx(4.5)
    assert tof_rate(traj, [0, 0, 0], [0.0])[0] * 1e9 == pytest.approx(15.01, abs=0.01)


def test_angular_rate_transverse_motion():
    traj = Trajectory.straight_line([650.0, 0, 0], [0, 10.0, 0], 2)
    assert angular_rate(traj, [0, 0, 0], 0.0) == pytest.approx(math.degrees(10 / 650))


def test_angular_rate_zero_range():
    traj = Trajectory.straight_line([0.0, 0, 0], [1.0, 0, 0], 2)
    with pytest.raises(SingularGeometryError):
        angular_rate(traj, [0, 0, 0], 0.0)


def test_azimuth_elevation_convention():
    az, el = azimuth_elevation([0, 0, 0], [1.0, 0, 0])
    assert az == pytest.approx(90.0) and el == pytest.approx(0.0)
    az, el = azimuth_elevation([0, 0, 0], [0, 1.0, 1.0])
    assert az == pytest.approx(0.0) and el == pytest.approx(45.0)


def test_leo_bound_matches_circular_orbit_oracle():
    # vis-viva circular speed over altitude, evaluated longhand
    r = 6.371e6 + 600e3
    v = math.sqrt(3.986004418e14 / r)
    assert leo_max_angular_rate(600e3) == pytest.approx(math.degrees(v / 600e3), rel=1e-12)
    assert leo_max_angular_rate(600e3) == pytest.approx(0.722, abs=0.005)


def test_leo_bound_with_earth_rotation_is_lower():
    assert leo_max_angular_rate(600e3, earth_rotation=True) < leo_max_angular_rate(600e3)


@given(st.floats(200e3, 2000e3), st.floats(1e3, 500e3))
def test_leo_rate_decreases_with_altitude(h, dh):
    assert leo_max_angular_rate(h + dh) < leo_max_angular_rate(h)


def test_beam_radius_far_field():
    beam = BeamModel(5e-3)
    zr = math.pi * 5e-3**2 / 532e-9
    assert beam_radius_at(beam, 650.0) == pytest.approx(5e-3 * math.sqrt(1 + (650 / zr) ** 2))
    assert beam_radius_at(beam, 650.0) == pytest.approx(22.575e-3, rel=1e-3)


def test_fit_m2_roundtrip():
    m2 = fit_m2(5e-3, 532e-9, 650.0, 0.06)
    assert beam_radius_at(BeamModel(5e-3, 532e-9, m2), 650.0) == pytest.approx(0.06, rel=1e-9)
    assert m2 == pytest.approx(2.72, abs=0.02)


def test_fit_m2_rejects_sub_diffraction_spot():
    with pytest.raises(ValueError):
        fit_m2(5e-3, 532e-9, 650.0, 1e-3)


def test_aperture_loss_oracle():
    # fraction of Gaussian power in a disc: 1 - exp(-2 a^2 / w^2)
    frac = 1 - math.exp(-2 * (0.0254 / 0.06) ** 2)
    assert aperture_coupling_loss(0.06, 0.0254) == pytest.approx(-10 * math.log10(frac))
    assert aperture_coupling_loss(0.06, 0.0254) == pytest.approx(5.2111, abs=1e-3)


@given(st.floats(1e-3, 1.0), st.floats(1e-3, 1.0), st.floats(1e-4, 1.0))
def test_aperture_loss_monotone_in_spot(w, dw, a):
    assert aperture_coupling_loss(w + dw, a) >= aperture_coupling_loss(w, a) - 1e-12


def test_aperture_loss_rejects_nonpositive():
    with pytest.raises(ValueError):
        aperture_coupling_loss(0.0, 0.0254)


def test_budget_totals():
    assert total_loss(PAPER_BUDGET) == pytest.approx(30.6)
    assert PAPER_BUDGET.total_dB == pytest.approx(30.6)
    with pytest.raises(ValueError):
        LossBudget(diffraction_dB=-1)


@given(st.lists(st.floats(0, 40), min_size=1, max_size=4))
def test_db_components_multiply_transmittances(parts):
    total = sum(parts)
    assert db_to_transmittance(total) == pytest.approx(np.prod([db_to_transmittance(p) for p in parts]), rel=1e-9)
    assert transmittance_to_db(db_to_transmittance(total)) == pytest.approx(total, abs=1e-9)


def test_truck_pass_geometry():
    traj, tx = paper_trajectory(10)
    t = np.linspace(0, 9.9, 100)
    rate = angular_rate(traj, tx, t)
    assert 0.7 < np.mean(rate) < 0.8
    drift = tof_rate(traj, tx, t) * 1e9
    assert np.mean(drift) == pytest.approx(15.0, abs=0.5)
    speed = np.linalg.norm(traj.velocity[0]) * 3.6
    assert speed == pytest.approx(33.0)
