import numpy as np
import pytest
from hypothesis import given, strategies as st

from qkdlab.errors import NoSignalError, UnidentifiableChannelError
from qkdlab.polcomp import (PROJECTOR_VECTORS, PolarizationTransform, ProjectorCounts, StokesState,
                            WaveplateStack, apply_to_states, apply_transform, expected_counts, fidelity,
                            fit_channel, ideal_state, ideal_states, optimize_compensation,
                            paper_intrinsic_states, predicted_qber, purity, random_rotation,
                            rotation_matrix, sample_counts, stokes_from_counts, waveplate_transform)

angles = st.floats(0, 180, allow_nan=False)

# Jones -> Mueller in the (H, V) basis
_A = np.array([[1, 0, 0, 1], [1, 0, 0, -1], [0, 1, 1, 0], [0, -1j, 1j, 0]])


def _jones_retarder(theta_deg, delta):
    t = np.radians(theta_deg)
    c, s = np.cos(t), np.sin(t)
    rot = np.array([[c, s], [-s, c]])
    return rot.T @ np.diag([1, np.exp(1j * delta)]) @ rot


def _jones_to_mueller(J):
    return np.real(_A @ np.kron(J, J.conj()) @ np.linalg.inv(_A))


def test_quarter_wave_at_45_makes_right_circular():
    out = apply_transform(PolarizationTransform.retarder(45, np.pi / 2), ideal_state("H"))
    np.testing.assert_allclose(out.vector, [0, 0, 1], atol=1e-12)


@given(angles, angles, angles)
def test_stack_matches_jones_calculus(t1, t2, t3):
    J = _jones_retarder(t3, np.pi / 2) @ _jones_retarder(t2, np.pi) @ _jones_retarder(t1, np.pi / 2)
    M = waveplate_transform(WaveplateStack(t1, t2, t3)).mueller
    np.testing.assert_allclose(M, _jones_to_mueller(J), atol=1e-10)


@given(angles, angles, angles)
def test_stack_is_a_rotation(t1, t2, t3):
    R = waveplate_transform(WaveplateStack(t1, t2, t3)).rotation
    np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-10)
    assert np.linalg.det(R) == pytest.approx(1.0)


def test_stokes_validation():
    with pytest.raises(ValueError):
        StokesState([1.0, 1.0, 1.0, 0.0])
    with pytest.raises(ValueError):
        StokesState([0.0, 0.0, 0.0, 0.0])


def test_counts_validation():
    with pytest.raises(ValueError):
        ProjectorCounts({"H": 1, "V": 1, "D": 1, "A": 1, "R": 1})
    with pytest.raises(ValueError):
        ProjectorCounts({"H": -1, "V": 1, "D": 1, "A": 1, "R": 1, "L": 1})


def test_reconstruction_of_exact_counts():
    n = ProjectorCounts({"H": 900, "V": 100, "D": 500, "A": 500, "R": 600, "L": 400})
    np.testing.assert_allclose(stokes_from_counts(n).vector, [0.8, 0.0, 0.2])


def test_reconstruction_clips_to_sphere():
    s = stokes_from_counts(ProjectorCounts({"H": 10, "V": 0, "D": 10, "A": 0, "R": 5, "L": 5}))
    assert s.dop == pytest.approx(1.0)
    assert s.clip_scale == pytest.approx(1 / np.sqrt(2))


def test_reconstruction_without_signal():
    with pytest.raises(NoSignalError):
        stokes_from_counts(ProjectorCounts(dict.fromkeys("HVDARL", 0)))


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_expected_counts_roundtrip(x, y, z):
    v = np.array([x, y, z])
    if np.linalg.norm(v) > 1:
        v = v / np.linalg.norm(v)
    s = StokesState.from_vector(v)
    lam = expected_counts(s, 1e6)
    counts = ProjectorCounts({k: int(round(c)) for k, c in lam.items()})
    np.testing.assert_allclose(stokes_from_counts(counts).vector, v, atol=5e-6)


def test_sampled_tomography_is_unbiased():
    s = StokesState.from_vector([0.6, 0.3, -0.5])
    rng = np.random.default_rng(3)
    est = np.mean([stokes_from_counts(sample_counts(s, 2000, rng)).vector for _ in range(400)], axis=0)
    np.testing.assert_allclose(est, s.vector, atol=0.01)


@given(st.floats(0, 1))
def test_purity_and_fidelity_bounds(d):
    s = StokesState.from_vector([d, 0, 0])
    assert 0.5 <= purity(s) <= 1.0
    assert fidelity(s, "H") == pytest.approx((1 + d) / 2)
    assert fidelity(s, "V") == pytest.approx((1 - d) / 2)


def test_ideal_states_have_zero_qber():
    assert predicted_qber(ideal_states()) == pytest.approx(0.0, abs=1e-15)


def test_intrinsic_state_calibration():
    st_ = paper_intrinsic_states()
    assert np.mean([purity(s) for s in st_.values()]) == pytest.approx(0.91, abs=0.005)
    assert np.mean([fidelity(s, k) for k, s in st_.items()]) == pytest.approx(0.94, abs=0.005)


@given(st.integers(0, 2**32 - 1))
def test_fit_channel_recovers_rotation(seed):
    R = random_rotation(np.random.default_rng(seed))
    measured = apply_to_states(PolarizationTransform.from_rotation(R), ideal_states())
    fit = fit_channel(measured)
    np.testing.assert_allclose(fit.transform.rotation, R, atol=1e-9)
    assert fit.residual < 1e-15


def test_fit_channel_rejects_collinear_states():
    h, v = ideal_state("H"), ideal_state("V")
    with pytest.raises(UnidentifiableChannelError):
        fit_channel([h, v, h, v])


def test_rotation_matrix_rodrigues():
    np.testing.assert_allclose(rotation_matrix([0, 0, 1], np.pi / 2) @ [1, 0, 0], [0, 1, 0], atol=1e-12)


def test_compensation_never_worse_than_identity():
    states = paper_intrinsic_states()
    res = optimize_compensation(states, starts=2)
    assert res.predicted_qber <= res.initial_qber + 1e-12


def test_compensation_undoes_rotation():
    R = rotation_matrix([0.3, 0.5, 0.8], np.radians(28))
    measured = apply_to_states(PolarizationTransform.from_rotation(R), ideal_states())
    res = optimize_compensation(measured, seed=1)
    assert res.initial_qber > 0.02
    assert res.predicted_qber < 1e-6
    assert res.improved


def test_projector_vectors_are_antipodal_pairs():
    for a, b in (("H", "V"), ("D", "A"), ("R", "L")):
        np.testing.assert_array_equal(PROJECTOR_VECTORS[a], -PROJECTOR_VECTORS[b])
